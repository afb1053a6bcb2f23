//! Fixed-order Gauss–Legendre quadrature.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_ORDER: usize = 10_000;

/// Nodes on (−1, 1), strictly increasing, with positive weights summing to 2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule<T> {
    nodes: Vec<T>,
    weights: Vec<T>,
}

impl<T: Scalar> QuadratureRule<T> {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Nodes and weights affinely mapped onto `[a, b]`.
    pub fn mapped(&self, a: T, b: T) -> impl Iterator<Item = (T, T)> + '_ {
        let half = (b - a) / T::lit(2.0);
        let mid = (a + b) / T::lit(2.0);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, w * half))
    }
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p_prev = 1.0;
    let mut p = x;
    for j in 2..=n {
        let jf = j as f64;
        let next = ((2.0 * jf - 1.0) * x * p - (jf - 1.0) * p_prev) / jf;
        p_prev = p;
        p = next;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p - p_prev) / (x * x - 1.0);
    (p, dp)
}

/// Builds the `n`-point rule. Roots are found by Newton's method from
/// Chebyshev-like initial guesses, in `f64`, then converted to `T`.
pub fn gauss_legendre_rule<T: Scalar>(n: usize) -> Result<QuadratureRule<T>> {
    if !(1..=MAX_ORDER).contains(&n) {
        return Err(Error::QuadratureOrder(n));
    }
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let nf = n as f64;

    for i in 0..n / 2 {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    if n % 2 == 1 {
        let (_, d) = legendre(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 2.0 / (d * d);
    }

    Ok(QuadratureRule {
        nodes: nodes.into_iter().map(T::lit).collect(),
        weights: weights.into_iter().map(T::lit).collect(),
    })
}

/// `∫_a^b f(x) dx` with the fixed rule. Returns exactly zero on an empty interval.
pub fn integrate<T: Scalar, F: Fn(T) -> T>(rule: &QuadratureRule<T>, f: F, a: T, b: T) -> Result<T> {
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidInterval {
            a: a.as_f64(),
            b: b.as_f64(),
        });
    }
    if a == b {
        return Ok(T::zero());
    }
    let mut sum = T::zero();
    for (x, w) in rule.mapped(a, b) {
        let y = f(x);
        if !y.is_finite() {
            return Err(Error::NonFiniteIntegrand { x: x.as_f64() });
        }
        sum = sum + w * y;
    }
    Ok(sum)
}
