//! Continuous-time nonlocal models of AdaGrad, RMSProp and Adam.
//!
//! Each builder returns an [`IdeProblem`] whose right-hand side divides the
//! gradient (or Adam's first moment) by the square root of a memory integral.
//! The memory-free starting trajectory is plain gradient flow.

use std::sync::Arc;

use crate::discrete::{AdamVariant, OptimizerConfig, OptimizerKind};
use crate::error::{Error, Result};
use crate::ide::{gradient_flow_rhs, IdeProblem, MemoryTerm, RhsContext, RhsFn, StepAnchor};
use crate::kernels::{Integrand, KernelSpec};
use crate::objectives::{Objective, ParamVector};
use crate::scalar::Scalar;

/// Adam's time-dependent coefficients
/// `α(t) = √(1 − β₂^{t/α}) / (1 − β₁^{t/α})` and `ε(t) = ε·√(1 − β₂^{t/α})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasCorrection<T> {
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    pub alpha: T,
}

impl<T: Scalar> BiasCorrection<T> {
    /// `(α(t), ε(t))`, defined for `t ≥ α`.
    pub fn eval(&self, t: T) -> Result<(T, T)> {
        let domain = Error::BiasCorrectionDomain {
            t: t.as_f64(),
            alpha: self.alpha.as_f64(),
        };
        let s = t / self.alpha;
        let r = s.round();
        // grid times use integer powers so they agree with the discrete factors bit for bit
        let snapped = (s - r).abs() <= T::lit(1e-9) * r.max(T::one());
        let (p1, p2) = match (snapped, r.to_i32()) {
            (true, Some(k)) => {
                if k < 1 {
                    return Err(domain);
                }
                (self.beta1.powi(k), self.beta2.powi(k))
            }
            _ => {
                if !(s >= T::one()) {
                    return Err(domain);
                }
                (self.beta1.powf(s), self.beta2.powf(s))
            }
        };
        let root = (T::one() - p2).sqrt();
        Ok((root / (T::one() - p1), self.epsilon * root))
    }
}

pub fn bias_correction_eval<T: Scalar>(beta1: T, beta2: T, epsilon: T, alpha: T, t: T) -> Result<(T, T)> {
    check_beta("beta1", beta1)?;
    check_beta("beta2", beta2)?;
    BiasCorrection {
        beta1,
        beta2,
        epsilon,
        alpha,
    }
    .eval(t)
}

fn check_alpha_eps<T: Scalar>(alpha: T, epsilon: T) -> Result<()> {
    if !(alpha > T::zero() && alpha <= T::one()) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(epsilon > T::zero() && epsilon.is_finite()) {
        return Err(Error::InvalidConfig(format!("epsilon must be positive, got {epsilon}")));
    }
    Ok(())
}

fn check_beta<T: Scalar>(name: &str, beta: T) -> Result<()> {
    if beta >= T::zero() && beta < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} must lie in [0, 1), got {beta}")))
    }
}

/// `θ̇ = −∇f(θ) / (√M + ε)` where `M` is the first memory value.
fn preconditioned_rhs<T: Scalar>(epsilon: T) -> RhsFn<T> {
    Arc::new(move |ctx: &RhsContext<'_, T>, out: &mut [T]| {
        let d = ctx.memory[0][0].sqrt() + epsilon;
        for (o, &g) in out.iter_mut().zip(ctx.gradient) {
            *o = -g / d;
        }
    })
}

/// `θ̇ = −∇f(θ) / (√G(t + α) + ε)` with `G(t) = ∫₀ᵗ (1/α)‖∇f(θ(τ))‖² dτ`.
pub fn build_adagrad<T: Scalar>(
    obj: Objective<T>,
    theta0: ParamVector<T>,
    alpha: T,
    epsilon: T,
    steps: usize,
) -> Result<IdeProblem<T>> {
    check_alpha_eps(alpha, epsilon)?;
    let g = MemoryTerm::new("G", KernelSpec::accumulating(alpha)?, Integrand::SquaredGradNorm, alpha)?;
    Ok(IdeProblem::new(obj, theta0, alpha, steps, preconditioned_rhs(epsilon))?
        .with_memory(g)
        .with_initial_rhs(gradient_flow_rhs()))
}

/// `θ̇ = −∇f(θ) / (√v(t + α) + ε)` with `v` the exponentially weighted memory
/// of `‖∇f‖²` at rate `(1 − β)/α`.
pub fn build_rmsprop<T: Scalar>(
    obj: Objective<T>,
    theta0: ParamVector<T>,
    alpha: T,
    beta: T,
    epsilon: T,
    steps: usize,
) -> Result<IdeProblem<T>> {
    check_alpha_eps(alpha, epsilon)?;
    check_beta("beta", beta)?;
    let v = MemoryTerm::new(
        "v",
        KernelSpec::moving_average(alpha, beta)?,
        Integrand::SquaredGradNorm,
        alpha,
    )?;
    Ok(IdeProblem::new(obj, theta0, alpha, steps, preconditioned_rhs(epsilon))?
        .with_memory(v)
        .with_initial_rhs(gradient_flow_rhs()))
}

/// `θ̇ = −α(t)·m(t) / (√v(t) + ε(t))` with both moments as exponentially
/// weighted memories and no lookahead. The right-hand side of step `j → j+1`
/// is evaluated at `t_{j+1}`, where the bias correction is defined.
pub fn build_adam<T: Scalar>(
    obj: Objective<T>,
    theta0: ParamVector<T>,
    alpha: T,
    beta1: T,
    beta2: T,
    epsilon: T,
    steps: usize,
) -> Result<IdeProblem<T>> {
    check_alpha_eps(alpha, epsilon)?;
    check_beta("beta1", beta1)?;
    check_beta("beta2", beta2)?;
    let v = MemoryTerm::new(
        "v",
        KernelSpec::moving_average(alpha, beta2)?,
        Integrand::SquaredGradNorm,
        T::zero(),
    )?;
    let m = MemoryTerm::new(
        "m",
        KernelSpec::moving_average(alpha, beta1)?,
        Integrand::Gradient,
        T::zero(),
    )?;
    let bias = BiasCorrection {
        beta1,
        beta2,
        epsilon,
        alpha,
    };
    let rhs: RhsFn<T> = Arc::new(move |ctx: &RhsContext<'_, T>, out: &mut [T]| {
        // the anchor keeps t ≥ α, so the domain error cannot occur
        let (a_t, e_t) = bias.eval(ctx.t).unwrap_or((T::nan(), T::nan()));
        let d = ctx.memory[0][0].sqrt() + e_t;
        for (o, &m) in out.iter_mut().zip(&ctx.memory[1]) {
            *o = -a_t * m / d;
        }
    });
    Ok(IdeProblem::new(obj, theta0, alpha, steps, rhs)?
        .with_memory(v)
        .with_memory(m)
        .with_initial_rhs(gradient_flow_rhs())
        .with_anchor(StepAnchor::Right))
}

/// The continuous model matching a discrete optimizer configuration.
pub fn build_continuous<T: Scalar>(
    kind: OptimizerKind,
    obj: Objective<T>,
    theta0: ParamVector<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<IdeProblem<T>> {
    match kind {
        OptimizerKind::Gd => IdeProblem::gradient_flow(obj, theta0, cfg.alpha, cfg.steps),
        OptimizerKind::AdaGrad => build_adagrad(obj, theta0, cfg.alpha, cfg.epsilon, cfg.steps),
        OptimizerKind::RmsProp => build_rmsprop(obj, theta0, cfg.alpha, cfg.beta, cfg.epsilon, cfg.steps),
        OptimizerKind::Adam(AdamVariant::Plain) => {
            build_adam(obj, theta0, cfg.alpha, cfg.beta1, cfg.beta2, cfg.epsilon, cfg.steps)
        }
        OptimizerKind::Adam(_) => Err(Error::Unsupported(format!("no continuous model for {kind}; use adam"))),
    }
}
