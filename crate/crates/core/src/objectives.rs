//! Scalar objectives with closed-form gradients.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A point in parameter space. Always non-empty with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T>(Vec<T>);

impl<T: Scalar> ParamVector<T> {
    pub fn new(components: Vec<T>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyVector);
        }
        if let Some(index) = components.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteComponent { index });
        }
        Ok(Self(components))
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "parameter dimension must be at least 1");
        Self(vec![T::zero(); n])
    }

    pub fn splat(n: usize, value: T) -> Result<Self> {
        Self::new(vec![value; n])
    }

    /// Wraps a buffer the caller has already checked.
    pub(crate) fn from_vec_unchecked(components: Vec<T>) -> Self {
        debug_assert!(!components.is_empty());
        Self(components)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn norm_sq(&self) -> T {
        norm_sq(&self.0)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &Self) -> T {
        self.0
            .iter()
            .zip(&other.0)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt()
    }
}

impl<T> Index<usize> for ParamVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> AsRef<[T]> for ParamVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

pub(crate) fn norm_sq<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x)
}

pub(crate) fn all_finite<T: Scalar>(v: &[T]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Differentiable objective `f: R^n -> R`.
#[derive(Debug, Clone, PartialEq)]
pub enum Objective<T> {
    /// `f(θ) = Σᵢ (θᵢ − center)²`.
    ShiftedQuadratic { center: T, dim: usize },
    /// Mean squared error of the model `y = θx` against the target `y = slope·x`
    /// over the sample `inputs`. Scalar parameter.
    LinearRegressionMse { inputs: Vec<T>, target_slope: T },
}

impl<T: Scalar> Objective<T> {
    pub fn shifted_quadratic(center: T, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyVector);
        }
        if !center.is_finite() {
            return Err(Error::InvalidConfig("quadratic center must be finite".into()));
        }
        Ok(Self::ShiftedQuadratic { center, dim })
    }

    pub fn linear_regression_mse(inputs: Vec<T>, target_slope: T) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidConfig("MSE objective needs at least one input".into()));
        }
        if !all_finite(&inputs) || !target_slope.is_finite() {
            return Err(Error::InvalidConfig("MSE inputs and slope must be finite".into()));
        }
        Ok(Self::LinearRegressionMse { inputs, target_slope })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::ShiftedQuadratic { dim, .. } => *dim,
            Self::LinearRegressionMse { .. } => 1,
        }
    }

    /// The analytic minimizer.
    pub fn minimizer(&self) -> ParamVector<T> {
        match self {
            Self::ShiftedQuadratic { center, dim } => ParamVector(vec![*center; *dim]),
            Self::LinearRegressionMse { target_slope, .. } => ParamVector(vec![*target_slope]),
        }
    }

    fn check_dim(&self, theta: &[T]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    pub fn eval(&self, theta: &ParamVector<T>) -> Result<T> {
        self.check_dim(theta.as_slice())?;
        Ok(self.eval_slice(theta.as_slice()))
    }

    pub fn grad(&self, theta: &ParamVector<T>) -> Result<ParamVector<T>> {
        self.check_dim(theta.as_slice())?;
        let mut out = vec![T::zero(); self.dim()];
        self.grad_into(theta.as_slice(), &mut out);
        Ok(ParamVector(out))
    }

    /// Unchecked evaluation on a raw slice of length `dim()`.
    pub(crate) fn eval_slice(&self, theta: &[T]) -> T {
        match self {
            Self::ShiftedQuadratic { center, .. } => theta
                .iter()
                .fold(T::zero(), |acc, &x| acc + (x - *center) * (x - *center)),
            Self::LinearRegressionMse { inputs, target_slope } => {
                let m = T::from_index(inputs.len());
                inputs
                    .iter()
                    .map(|&x| {
                        let r = theta[0] * x - *target_slope * x;
                        r * r
                    })
                    .fold(T::zero(), |acc, r| acc + r)
                    / m
            }
        }
    }

    /// Unchecked gradient on raw slices of length `dim()`.
    pub(crate) fn grad_into(&self, theta: &[T], out: &mut [T]) {
        let two = T::lit(2.0);
        match self {
            Self::ShiftedQuadratic { center, .. } => {
                for (o, &x) in out.iter_mut().zip(theta) {
                    *o = two * (x - *center);
                }
            }
            Self::LinearRegressionMse { inputs, target_slope } => {
                let m = T::from_index(inputs.len());
                let s = inputs
                    .iter()
                    .map(|&x| x * (theta[0] * x - *target_slope * x))
                    .fold(T::zero(), |acc, r| acc + r);
                out[0] = two * s / m;
            }
        }
    }
}

/// Largest absolute difference between the analytic gradient and a central
/// difference with step `h`.
pub fn fd_check<T: Scalar>(obj: &Objective<T>, theta: &ParamVector<T>, h: T) -> Result<T> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::InvalidConfig("finite-difference step must be positive".into()));
    }
    let analytic = obj.grad(theta)?;
    let mut probe = theta.as_slice().to_vec();
    let two_h = h + h;
    let mut worst = T::zero();
    for i in 0..probe.len() {
        let x = probe[i];
        probe[i] = x + h;
        let plus = obj.eval_slice(&probe);
        probe[i] = x - h;
        let minus = obj.eval_slice(&probe);
        probe[i] = x;
        let diff = (analytic[i] - (plus - minus) / two_h).abs();
        worst = worst.max(diff);
    }
    Ok(worst)
}
