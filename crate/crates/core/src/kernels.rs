//! Memory kernels and the nonlocal integrals `G(t)`, `v(t)` and `m(t)`.
//!
//! A memory integral has the form `∫₀ᵗ K(t − τ) φ(θ(τ)) dτ` where `φ` is
//! either the squared gradient norm or the gradient itself, and `θ(τ)` is a
//! trajectory sampled on a uniform grid and linearly interpolated between
//! nodes.

use crate::error::{Error, Result};
use crate::objectives::{norm_sq, Objective, ParamVector};
use crate::quadrature::{gauss_legendre_rule, QuadratureRule};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec<T> {
    /// `K(t) = scale`.
    Constant { scale: T },
    /// `K(t) = scale · e^{−rate·t}`.
    ExpDecay { rate: T, scale: T },
}

impl<T: Scalar> KernelSpec<T> {
    pub fn constant(scale: T) -> Result<Self> {
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kernel scale must be positive, got {scale}"
            )));
        }
        Ok(Self::Constant { scale })
    }

    pub fn exp_decay(rate: T, scale: T) -> Result<Self> {
        if !(scale > T::zero() && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "kernel scale must be positive, got {scale}"
            )));
        }
        if !(rate >= T::zero() && rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("kernel rate must be >= 0, got {rate}")));
        }
        Ok(Self::ExpDecay { rate, scale })
    }

    /// AdaGrad's accumulator kernel `1/α`.
    pub fn accumulating(alpha: T) -> Result<Self> {
        check_alpha(alpha)?;
        Self::constant(T::one() / alpha)
    }

    /// Exponential moving-average kernel `(1−β)/α · e^{−(1−β)t/α}`, unit mass.
    pub fn moving_average(alpha: T, beta: T) -> Result<Self> {
        check_alpha(alpha)?;
        if !(beta >= T::zero() && beta < T::one()) {
            return Err(Error::InvalidConfig(format!("beta must lie in [0, 1), got {beta}")));
        }
        let r = (T::one() - beta) / alpha;
        Self::exp_decay(r, r)
    }

    pub fn scale(&self) -> T {
        match *self {
            Self::Constant { scale } | Self::ExpDecay { scale, .. } => scale,
        }
    }

    /// Decay rate; zero for the constant kernel.
    pub fn rate(&self) -> T {
        match *self {
            Self::Constant { .. } => T::zero(),
            Self::ExpDecay { rate, .. } => rate,
        }
    }

    pub fn eval(&self, t: T) -> Result<T> {
        if !(t >= T::zero()) {
            return Err(Error::NegativeTime(t.as_f64()));
        }
        Ok(self.value(t))
    }

    fn value(&self, t: T) -> T {
        match *self {
            Self::Constant { scale } => scale,
            Self::ExpDecay { rate, scale } => scale * (-rate * t).exp(),
        }
    }
}

fn check_alpha<T: Scalar>(alpha: T) -> Result<()> {
    if alpha > T::zero() && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")))
    }
}

pub fn kernel_eval<T: Scalar>(spec: &KernelSpec<T>, t: T) -> Result<T> {
    spec.eval(t)
}

/// What the kernel is integrated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Integrand {
    /// `‖∇f(θ)‖²`, a scalar.
    SquaredGradNorm,
    /// `∇f(θ)`, one value per parameter.
    Gradient,
}

impl Integrand {
    pub fn width(self, dim: usize) -> usize {
        match self {
            Self::SquaredGradNorm => 1,
            Self::Gradient => dim,
        }
    }

    /// Adds `weight · φ(grad)` to `out`.
    fn accumulate<T: Scalar>(self, grad: &[T], weight: T, out: &mut [T]) {
        match self {
            Self::SquaredGradNorm => out[0] = out[0] + weight * norm_sq(grad),
            Self::Gradient => {
                for (o, &g) in out.iter_mut().zip(grad) {
                    *o = *o + weight * g;
                }
            }
        }
    }
}

/// A trajectory on the uniform grid `t_j = j·spacing`.
pub trait GridPath<T: Scalar>: Sync {
    fn spacing(&self) -> T;

    /// Number of grid nodes.
    fn node_count(&self) -> usize;

    fn node(&self, j: usize) -> &[T];

    fn dim(&self) -> usize {
        self.node(0).len()
    }

    /// Piecewise-linear interpolation; beyond the last node the final segment is
    /// extended linearly.
    fn interpolate_into(&self, t: T, out: &mut [T]) -> Result<()> {
        if !(t >= T::zero()) {
            return Err(Error::NegativeTime(t.as_f64()));
        }
        let s = t / self.spacing();
        let nearest = s.round();
        let last = self.node_count() - 1;
        // snap to a node when `t` is a grid time up to rounding
        if (s - nearest).abs() <= T::lit(1e-9) * nearest.max(T::one()) {
            if let Some(j) = nearest.to_usize().filter(|&j| j <= last) {
                out.copy_from_slice(self.node(j));
                return Ok(());
            }
        }
        let (j, frac) = match s.floor().to_usize() {
            Some(j) if j < last => (j, s - T::from_index(j)),
            _ => {
                if last == 0 {
                    return Err(Error::PathTooShort { t: t.as_f64() });
                }
                (last - 1, s - T::from_index(last - 1))
            }
        };
        let (a, b) = (self.node(j), self.node(j + 1));
        for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
            *o = x + frac * (y - x);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath<T> {
    alpha: T,
    values: Vec<ParamVector<T>>,
}

impl<T: Scalar> SampledPath<T> {
    pub fn new(alpha: T, values: Vec<ParamVector<T>>) -> Result<Self> {
        check_alpha(alpha)?;
        let first = values.first().ok_or(Error::EmptyVector)?;
        let n = first.len();
        if let Some(bad) = values.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: bad.len(),
            });
        }
        Ok(Self { alpha, values })
    }

    /// `steps + 1` copies of `value`.
    pub fn constant(alpha: T, value: ParamVector<T>, steps: usize) -> Result<Self> {
        Self::new(alpha, vec![value; steps + 1])
    }

    /// A path from raw per-node vectors; every node must be finite.
    pub fn from_rows(alpha: T, rows: Vec<Vec<T>>) -> Result<Self> {
        let values = rows.into_iter().map(ParamVector::new).collect::<Result<Vec<_>>>()?;
        Self::new(alpha, values)
    }

    pub(crate) fn from_parts_unchecked(alpha: T, values: Vec<ParamVector<T>>) -> Self {
        Self { alpha, values }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Number of grid intervals `N`.
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[ParamVector<T>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<ParamVector<T>> {
        self.values
    }

    pub fn time(&self, j: usize) -> T {
        self.alpha * T::from_index(j)
    }

    /// Component `i` of every node.
    pub fn component(&self, i: usize) -> Vec<T> {
        self.values.iter().map(|v| v[i]).collect()
    }
}

impl<T: Scalar> GridPath<T> for SampledPath<T> {
    fn spacing(&self) -> T {
        self.alpha
    }

    fn node_count(&self) -> usize {
        self.values.len()
    }

    fn node(&self, j: usize) -> &[T] {
        self.values[j].as_slice()
    }
}

/// Live nodes `0..live.len()` followed by the remainder of a frozen path.
pub(crate) struct Spliced<'a, T> {
    pub live: &'a [ParamVector<T>],
    pub frozen: &'a SampledPath<T>,
}

impl<T: Scalar> GridPath<T> for Spliced<'_, T> {
    fn spacing(&self) -> T {
        self.frozen.alpha
    }

    fn node_count(&self) -> usize {
        self.frozen.values.len().max(self.live.len())
    }

    fn node(&self, j: usize) -> &[T] {
        match self.live.get(j) {
            Some(v) => v.as_slice(),
            None => self.frozen.values[j].as_slice(),
        }
    }
}

pub fn path_interpolate<T: Scalar>(path: &impl GridPath<T>, t: T) -> Result<ParamVector<T>> {
    let mut out = vec![T::zero(); path.dim()];
    path.interpolate_into(t, &mut out)?;
    Ok(ParamVector::from_vec_unchecked(out))
}

/// `∫₀ᵗ K(t − τ) φ(θ(τ)) dτ` by the fixed rule on `[0, t]`.
pub fn memory_integral<T: Scalar>(
    kernel: &KernelSpec<T>,
    path: &impl GridPath<T>,
    obj: &Objective<T>,
    integrand: Integrand,
    t: T,
    rule: &QuadratureRule<T>,
) -> Result<Vec<T>> {
    if !(t >= T::zero()) {
        return Err(Error::NegativeTime(t.as_f64()));
    }
    let n = path.dim();
    if n != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            found: n,
        });
    }
    let mut out = vec![T::zero(); integrand.width(n)];
    if t == T::zero() {
        return Ok(out);
    }
    let mut theta = vec![T::zero(); n];
    let mut grad = vec![T::zero(); n];
    for (tau, w) in rule.mapped(T::zero(), t) {
        path.interpolate_into(tau, &mut theta)?;
        obj.grad_into(&theta, &mut grad);
        if !grad.iter().all(|g| g.is_finite()) {
            return Err(Error::NonFiniteIntegrand { x: tau.as_f64() });
        }
        let k = kernel.value((t - tau).max(T::zero()));
        integrand.accumulate(&grad, w * k, &mut out);
    }
    if !out.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFiniteIntegrand { x: t.as_f64() });
    }
    Ok(out)
}

/// Scalar memory `∫₀ᵗ K(t − τ) ‖∇f(θ(τ))‖² dτ`, the form of `G` and `v`.
pub fn memory_scalar<T: Scalar>(
    kernel: &KernelSpec<T>,
    path: &impl GridPath<T>,
    obj: &Objective<T>,
    t: T,
    rule: &QuadratureRule<T>,
) -> Result<T> {
    Ok(memory_integral(kernel, path, obj, Integrand::SquaredGradNorm, t, rule)?[0])
}

/// Vector memory `∫₀ᵗ K(t − τ) ∇f(θ(τ)) dτ`, the form of `m`.
pub fn memory_vector<T: Scalar>(
    kernel: &KernelSpec<T>,
    path: &impl GridPath<T>,
    obj: &Objective<T>,
    t: T,
    rule: &QuadratureRule<T>,
) -> Result<ParamVector<T>> {
    let v = memory_integral(kernel, path, obj, Integrand::Gradient, t, rule)?;
    Ok(ParamVector::from_vec_unchecked(v))
}

/// Points per grid panel used by the incremental recurrence. The integrand on a
/// panel is a low-degree polynomial in `τ` times a smooth exponential, so this
/// is exact to rounding for the built-in objectives.
pub const PANEL_ORDER: usize = 8;

/// Gauss–Legendre rule on `[0, 1]` with weights summing to one.
#[derive(Debug, Clone)]
pub(crate) struct PanelRule<T> {
    u: Vec<T>,
    w: Vec<T>,
}

impl<T: Scalar> PanelRule<T> {
    pub fn new() -> Self {
        let rule = gauss_legendre_rule::<T>(PANEL_ORDER).expect("panel order in range");
        let half = T::lit(0.5);
        Self {
            u: rule.nodes().iter().map(|&x| half * (x + T::one())).collect(),
            w: rule.weights().iter().map(|&w| half * w).collect(),
        }
    }
}

/// Running value of one memory integral on the grid, advanced panel by panel:
/// `S_{j+1} = e^{−λα} S_j + scale·∫_{t_j}^{t_{j+1}} e^{−λ(t_{j+1}−τ)} φ(θ(τ)) dτ`.
#[derive(Debug, Clone)]
pub(crate) struct MemoryAccumulator<T> {
    kernel: KernelSpec<T>,
    integrand: Integrand,
    alpha: T,
    decay: T,
    value: Vec<T>,
    theta: Vec<T>,
    grad: Vec<T>,
}

impl<T: Scalar> MemoryAccumulator<T> {
    pub fn new(kernel: KernelSpec<T>, integrand: Integrand, alpha: T, dim: usize) -> Self {
        Self {
            kernel,
            integrand,
            alpha,
            decay: (-kernel.rate() * alpha).exp(),
            value: vec![T::zero(); integrand.width(dim)],
            theta: vec![T::zero(); dim],
            grad: vec![T::zero(); dim],
        }
    }

    pub fn value(&self) -> &[T] {
        &self.value
    }

    /// Value after one more panel from `start` to `end`, without committing it.
    pub fn peek(&mut self, rule: &PanelRule<T>, obj: &Objective<T>, start: &[T], end: &[T]) -> Vec<T> {
        let mut next: Vec<T> = self.value.iter().map(|&x| self.decay * x).collect();
        let rate = self.kernel.rate();
        let scale = self.kernel.scale() * self.alpha;
        for (&u, &w) in rule.u.iter().zip(&rule.w) {
            for ((th, &a), &b) in self.theta.iter_mut().zip(start).zip(end) {
                *th = a + u * (b - a);
            }
            obj.grad_into(&self.theta, &mut self.grad);
            let k = (-rate * self.alpha * (T::one() - u)).exp();
            self.integrand.accumulate(&self.grad, scale * w * k, &mut next);
        }
        next
    }

    pub fn advance(&mut self, rule: &PanelRule<T>, obj: &Objective<T>, start: &[T], end: &[T]) {
        self.value = self.peek(rule, obj, start, end);
    }
}

/// Memory values at every grid node in `O(N)` using the panel recurrence.
pub fn memory_incremental<T: Scalar>(
    kernel: &KernelSpec<T>,
    path: &impl GridPath<T>,
    obj: &Objective<T>,
    integrand: Integrand,
) -> Result<Vec<Vec<T>>> {
    let n = path.dim();
    if n != obj.dim() {
        return Err(Error::DimensionMismatch {
            expected: obj.dim(),
            found: n,
        });
    }
    let rule = PanelRule::new();
    let mut acc = MemoryAccumulator::new(*kernel, integrand, path.spacing(), n);
    let mut out = Vec::with_capacity(path.node_count());
    out.push(acc.value().to_vec());
    for j in 1..path.node_count() {
        acc.advance(&rule, obj, path.node(j - 1), path.node(j));
        if !acc.value().iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteIntegrand {
                x: (path.spacing() * T::from_index(j)).as_f64(),
            });
        }
        out.push(acc.value().to_vec());
    }
    Ok(out)
}

pub fn memory_incremental_scalar<T: Scalar>(
    kernel: &KernelSpec<T>,
    path: &impl GridPath<T>,
    obj: &Objective<T>,
) -> Result<Vec<T>> {
    Ok(memory_incremental(kernel, path, obj, Integrand::SquaredGradNorm)?
        .into_iter()
        .map(|v| v[0])
        .collect())
}

pub fn memory_incremental_vector<T: Scalar>(
    kernel: &KernelSpec<T>,
    path: &impl GridPath<T>,
    obj: &Objective<T>,
) -> Result<Vec<ParamVector<T>>> {
    Ok(memory_incremental(kernel, path, obj, Integrand::Gradient)?
        .into_iter()
        .map(ParamVector::from_vec_unchecked)
        .collect())
}
