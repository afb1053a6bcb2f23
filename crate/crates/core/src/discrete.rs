//! Reference implementations of the discrete optimizers.
//!
//! Every runner records a [`Trajectory`] indexed by the iteration counter `k`
//! with physical time `t = α·k`. AdaGrad's `G` and the second moment `v` are
//! scalar accumulators of `‖g‖²` shared by all components; Adam's first
//! moment `m` is a vector.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::objectives::{all_finite, norm_sq, Objective, ParamVector};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AdamVariant {
    Plain,
    /// Decoupled weight decay.
    W,
    /// L2 penalty folded into the gradient.
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Gd,
    AdaGrad,
    RmsProp,
    Adam(AdamVariant),
}

impl OptimizerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gd => "gd",
            Self::AdaGrad => "adagrad",
            Self::RmsProp => "rmsprop",
            Self::Adam(AdamVariant::Plain) => "adam",
            Self::Adam(AdamVariant::W) => "adamw",
            Self::Adam(AdamVariant::L2) => "adaml2",
        }
    }

    /// Names of the auxiliary series recorded by this optimizer, in CSV order.
    pub fn aux_keys(self) -> &'static [&'static str] {
        match self {
            Self::Gd => &[],
            Self::AdaGrad => &["G"],
            Self::RmsProp => &["v"],
            Self::Adam(_) => &["v", "m"],
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gd" => Self::Gd,
            "adagrad" => Self::AdaGrad,
            "rmsprop" => Self::RmsProp,
            "adam" => Self::Adam(AdamVariant::Plain),
            "adamw" => Self::Adam(AdamVariant::W),
            "adaml2" => Self::Adam(AdamVariant::L2),
            other => {
                return Err(Error::InvalidConfig(format!("unknown optimizer '{other}'")));
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig<T> {
    pub alpha: T,
    pub epsilon: T,
    pub beta: T,
    pub beta1: T,
    pub beta2: T,
    pub weight_decay: T,
    pub l2_lambda: T,
    pub steps: usize,
    /// Record every `record_stride`-th step (the last step is always kept).
    pub record_stride: usize,
}

impl<T: Scalar> OptimizerConfig<T> {
    pub fn new(alpha: T, steps: usize) -> Self {
        Self {
            alpha,
            epsilon: T::lit(1e-8),
            beta: T::lit(0.9),
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            weight_decay: T::zero(),
            l2_lambda: T::zero(),
            steps,
            record_stride: 1,
        }
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_betas(mut self, beta1: T, beta2: T) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn with_weight_decay(mut self, w: T) -> Self {
        self.weight_decay = w;
        self
    }

    pub fn with_l2_lambda(mut self, lambda: T) -> Self {
        self.l2_lambda = lambda;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    /// Every violated constraint, by field name.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let unit = |x: T| x >= T::zero() && x < T::one();
        if !(self.alpha > T::zero() && self.alpha <= T::one()) {
            out.push(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if !(self.epsilon > T::zero() && self.epsilon.is_finite()) {
            out.push(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !unit(self.beta) {
            out.push(format!("beta must lie in [0, 1), got {}", self.beta));
        }
        if !unit(self.beta1) {
            out.push(format!("beta1 must lie in [0, 1), got {}", self.beta1));
        }
        if !unit(self.beta2) {
            out.push(format!("beta2 must lie in [0, 1), got {}", self.beta2));
        }
        if !(self.weight_decay >= T::zero() && self.weight_decay.is_finite()) {
            out.push(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if !(self.l2_lambda >= T::zero() && self.l2_lambda.is_finite()) {
            out.push(format!("l2_lambda must be >= 0, got {}", self.l2_lambda));
        }
        if self.steps == 0 {
            out.push("steps must be >= 1".to_string());
        }
        if self.record_stride == 0 {
            out.push("record_stride must be >= 1".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(v.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEntry<T> {
    pub k: usize,
    pub t: T,
    pub theta: ParamVector<T>,
    /// Values of the auxiliary series, aligned with [`Trajectory::aux_keys`].
    pub aux: Vec<Vec<T>>,
    pub loss: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub alpha: T,
    pub aux_keys: Vec<String>,
    pub entries: Vec<TrajectoryEntry<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn new(alpha: T, aux_keys: Vec<String>) -> Self {
        Self {
            alpha,
            aux_keys,
            entries: Vec::new(),
        }
    }

    pub fn aux_index(&self, key: &str) -> Option<usize> {
        self.aux_keys.iter().position(|k| k == key)
    }

    pub fn last(&self) -> Option<&TrajectoryEntry<T>> {
        self.entries.last()
    }

    /// Entry recorded at iteration `k`, if any.
    pub fn at(&self, k: usize) -> Option<&TrajectoryEntry<T>> {
        self.entries
            .binary_search_by_key(&k, |e| e.k)
            .ok()
            .map(|i| &self.entries[i])
    }

    /// The `component`-th coordinate of θ over all recorded entries.
    pub fn theta_series(&self, component: usize) -> Vec<T> {
        self.entries.iter().map(|e| e.theta[component]).collect()
    }

    /// Component `component` of the auxiliary series `key`.
    pub fn aux_series(&self, key: &str, component: usize) -> Option<Vec<T>> {
        let i = self.aux_index(key)?;
        Some(self.entries.iter().map(|e| e.aux[i][component]).collect())
    }

    pub fn push(&mut self, k: usize, theta: ParamVector<T>, aux: Vec<Vec<T>>, loss: T) {
        let t = self.alpha * T::from_index(k);
        self.entries.push(TrajectoryEntry { k, t, theta, aux, loss });
    }
}

/// Per-optimizer state update.
trait StepRule<T: Scalar> {
    /// Advances `theta` in place given the gradient at the previous iterate.
    fn step(&mut self, k: usize, theta: &mut [T], grad: &[T]);
    fn aux(&self) -> Vec<Vec<T>>;
    fn state_finite(&self) -> bool;
}

struct Gd<T> {
    alpha: T,
}

impl<T: Scalar> StepRule<T> for Gd<T> {
    fn step(&mut self, _k: usize, theta: &mut [T], grad: &[T]) {
        for (x, &g) in theta.iter_mut().zip(grad) {
            *x = *x - self.alpha * g;
        }
    }

    fn aux(&self) -> Vec<Vec<T>> {
        Vec::new()
    }

    fn state_finite(&self) -> bool {
        true
    }
}

struct AdaGrad<T> {
    alpha: T,
    epsilon: T,
    g_acc: T,
}

impl<T: Scalar> StepRule<T> for AdaGrad<T> {
    fn step(&mut self, _k: usize, theta: &mut [T], grad: &[T]) {
        self.g_acc = self.g_acc + norm_sq(grad);
        let denom = self.g_acc.sqrt() + self.epsilon;
        for (x, &g) in theta.iter_mut().zip(grad) {
            *x = *x - self.alpha * g / denom;
        }
    }

    fn aux(&self) -> Vec<Vec<T>> {
        vec![vec![self.g_acc]]
    }

    fn state_finite(&self) -> bool {
        self.g_acc.is_finite()
    }
}

struct RmsProp<T> {
    alpha: T,
    epsilon: T,
    beta: T,
    v: T,
}

impl<T: Scalar> StepRule<T> for RmsProp<T> {
    fn step(&mut self, _k: usize, theta: &mut [T], grad: &[T]) {
        self.v = self.beta * self.v + (T::one() - self.beta) * norm_sq(grad);
        let denom = self.v.sqrt() + self.epsilon;
        for (x, &g) in theta.iter_mut().zip(grad) {
            *x = *x - self.alpha * g / denom;
        }
    }

    fn aux(&self) -> Vec<Vec<T>> {
        vec![vec![self.v]]
    }

    fn state_finite(&self) -> bool {
        self.v.is_finite()
    }
}

struct Adam<T> {
    alpha: T,
    epsilon: T,
    beta1: T,
    beta2: T,
    variant: AdamVariant,
    weight_decay: T,
    l2_lambda: T,
    m: Vec<T>,
    v: T,
    scratch: Vec<T>,
}

impl<T: Scalar> StepRule<T> for Adam<T> {
    fn step(&mut self, k: usize, theta: &mut [T], grad: &[T]) {
        let one = T::one();
        self.scratch.clear();
        self.scratch.extend_from_slice(grad);
        if self.variant == AdamVariant::L2 {
            let half_lambda = self.l2_lambda / T::lit(2.0);
            for (g, &x) in self.scratch.iter_mut().zip(theta.iter()) {
                *g = *g + half_lambda * x;
            }
        }
        let g = &self.scratch;
        for (m, &gi) in self.m.iter_mut().zip(g) {
            *m = self.beta1 * *m + (one - self.beta1) * gi;
        }
        self.v = self.beta2 * self.v + (one - self.beta2) * norm_sq(g);

        let exp = i32::try_from(k).unwrap_or(i32::MAX);
        let m_corr = one - self.beta1.powi(exp);
        let v_hat = self.v / (one - self.beta2.powi(exp));
        let denom = v_hat.sqrt() + self.epsilon;
        let decay = match self.variant {
            AdamVariant::W => one - self.weight_decay,
            _ => one,
        };
        for (x, &m) in theta.iter_mut().zip(&self.m) {
            *x = decay * *x - self.alpha * (m / m_corr) / denom;
        }
    }

    fn aux(&self) -> Vec<Vec<T>> {
        vec![vec![self.v], self.m.clone()]
    }

    fn state_finite(&self) -> bool {
        self.v.is_finite() && all_finite(&self.m)
    }
}

fn drive<T: Scalar, R: StepRule<T>>(
    kind: OptimizerKind,
    obj: &Objective<T>,
    theta0: &ParamVector<T>,
    cfg: &OptimizerConfig<T>,
    mut rule: R,
) -> Result<Trajectory<T>> {
    cfg.validate()?;
    let n = obj.dim();
    if theta0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: theta0.len(),
        });
    }

    let keys = kind.aux_keys().iter().map(|s| s.to_string()).collect();
    let mut traj = Trajectory::new(cfg.alpha, keys);
    let mut theta = theta0.as_slice().to_vec();
    let mut grad = vec![T::zero(); n];

    let initial_aux = rule.aux().into_iter().map(|a| vec![T::zero(); a.len()]).collect();
    traj.push(0, theta0.clone(), initial_aux, obj.eval_slice(&theta));

    for k in 1..=cfg.steps {
        obj.grad_into(&theta, &mut grad);
        rule.step(k, &mut theta, &grad);
        if !rule.state_finite() {
            return Err(Error::Diverged {
                last_valid_step: k - 1,
                quantity: "optimizer state",
            });
        }
        if !all_finite(&theta) {
            return Err(Error::Diverged {
                last_valid_step: k - 1,
                quantity: "theta",
            });
        }
        if k % cfg.record_stride == 0 || k == cfg.steps {
            let loss = obj.eval_slice(&theta);
            traj.push(k, ParamVector::from_vec_unchecked(theta.clone()), rule.aux(), loss);
        }
    }
    Ok(traj)
}

/// Plain gradient descent `θ_k = θ_{k−1} − α ∇f(θ_{k−1})`.
pub fn run_gd<T: Scalar>(
    obj: &Objective<T>,
    theta0: &ParamVector<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<Trajectory<T>> {
    drive(OptimizerKind::Gd, obj, theta0, cfg, Gd { alpha: cfg.alpha })
}

pub fn run_adagrad<T: Scalar>(
    obj: &Objective<T>,
    theta0: &ParamVector<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<Trajectory<T>> {
    let rule = AdaGrad {
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        g_acc: T::zero(),
    };
    drive(OptimizerKind::AdaGrad, obj, theta0, cfg, rule)
}

pub fn run_rmsprop<T: Scalar>(
    obj: &Objective<T>,
    theta0: &ParamVector<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<Trajectory<T>> {
    let rule = RmsProp {
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        beta: cfg.beta,
        v: T::zero(),
    };
    drive(OptimizerKind::RmsProp, obj, theta0, cfg, rule)
}

pub fn run_adam<T: Scalar>(
    obj: &Objective<T>,
    theta0: &ParamVector<T>,
    cfg: &OptimizerConfig<T>,
    variant: AdamVariant,
) -> Result<Trajectory<T>> {
    let rule = Adam {
        alpha: cfg.alpha,
        epsilon: cfg.epsilon,
        beta1: cfg.beta1,
        beta2: cfg.beta2,
        variant,
        weight_decay: cfg.weight_decay,
        l2_lambda: cfg.l2_lambda,
        m: vec![T::zero(); obj.dim()],
        v: T::zero(),
        scratch: Vec::with_capacity(obj.dim()),
    };
    drive(OptimizerKind::Adam(variant), obj, theta0, cfg, rule)
}

/// Dispatches to the runner for `kind`.
pub fn run_discrete<T: Scalar>(
    kind: OptimizerKind,
    obj: &Objective<T>,
    theta0: &ParamVector<T>,
    cfg: &OptimizerConfig<T>,
) -> Result<Trajectory<T>> {
    match kind {
        OptimizerKind::Gd => run_gd(obj, theta0, cfg),
        OptimizerKind::AdaGrad => run_adagrad(obj, theta0, cfg),
        OptimizerKind::RmsProp => run_rmsprop(obj, theta0, cfg),
        OptimizerKind::Adam(v) => run_adam(obj, theta0, cfg, v),
    }
}
