//! Fixed-point solver for the nonlocal models.
//!
//! A whole trajectory on the grid `t_j = jα` is refined repeatedly: each pass
//! is a forward-Euler sweep in which the memory integrals are evaluated against
//! the previous trajectory, and successive passes are blended with an adaptive
//! smoothing factor until the sum of squared differences falls below the
//! tolerance.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{
    memory_incremental, memory_integral, GridPath, Integrand, KernelSpec, MemoryAccumulator, PanelRule, SampledPath,
    Spliced,
};
use crate::objectives::{all_finite, Objective, ParamVector};
use crate::quadrature::{gauss_legendre_rule, QuadratureRule, MAX_ORDER};
use crate::scalar::Scalar;

/// One memory integral required by a right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryTerm<T> {
    pub name: String,
    pub kernel: KernelSpec<T>,
    pub integrand: Integrand,
    /// Added to the step's evaluation time, so `α` gives `G(t + α)`.
    pub lookahead: T,
}

impl<T: Scalar> MemoryTerm<T> {
    pub fn new(name: impl Into<String>, kernel: KernelSpec<T>, integrand: Integrand, lookahead: T) -> Result<Self> {
        if !(lookahead >= T::zero() && lookahead.is_finite()) {
            return Err(Error::InvalidConfig(format!("lookahead must be >= 0, got {lookahead}")));
        }
        Ok(Self {
            name: name.into(),
            kernel,
            integrand,
            lookahead,
        })
    }
}

/// Time at which the right-hand side of step `j → j+1` is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepAnchor {
    /// `t_j`, plain forward Euler.
    #[default]
    Left,
    /// `t_{j+1}`.
    Right,
}

/// Everything a right-hand side may look at.
#[derive(Debug)]
pub struct RhsContext<'a, T> {
    pub step: usize,
    pub t: T,
    pub theta: &'a [T],
    pub gradient: &'a [T],
    /// Memory values in the order of [`IdeProblem::memory`].
    pub memory: &'a [Vec<T>],
}

/// Writes `θ̇` into the output slice, which arrives zeroed.
pub type RhsFn<T> = Arc<dyn Fn(&RhsContext<'_, T>, &mut [T]) + Send + Sync>;

#[derive(Clone)]
pub struct IdeProblem<T> {
    objective: Objective<T>,
    rhs: RhsFn<T>,
    initial_rhs: Option<RhsFn<T>>,
    memory: Vec<MemoryTerm<T>>,
    theta0: ParamVector<T>,
    alpha: T,
    steps: usize,
    anchor: StepAnchor,
}

impl<T: Scalar> IdeProblem<T> {
    pub fn new(objective: Objective<T>, theta0: ParamVector<T>, alpha: T, steps: usize, rhs: RhsFn<T>) -> Result<Self> {
        if !(alpha > T::zero() && alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        if steps == 0 {
            return Err(Error::InvalidConfig("steps must be at least 1".into()));
        }
        if theta0.len() != objective.dim() {
            return Err(Error::DimensionMismatch {
                expected: objective.dim(),
                found: theta0.len(),
            });
        }
        Ok(Self {
            objective,
            rhs,
            initial_rhs: None,
            memory: Vec::new(),
            theta0,
            alpha,
            steps,
            anchor: StepAnchor::Left,
        })
    }

    /// `θ̇ = −∇f(θ)` with no memory.
    pub fn gradient_flow(objective: Objective<T>, theta0: ParamVector<T>, alpha: T, steps: usize) -> Result<Self> {
        Self::new(objective, theta0, alpha, steps, gradient_flow_rhs())
    }

    pub fn with_memory(mut self, term: MemoryTerm<T>) -> Self {
        self.memory.push(term);
        self
    }

    /// Right-hand side for the memory-free starting trajectory. Without one the
    /// full right-hand side is used with every memory value set to zero.
    pub fn with_initial_rhs(mut self, rhs: RhsFn<T>) -> Self {
        self.initial_rhs = Some(rhs);
        self
    }

    pub fn with_anchor(mut self, anchor: StepAnchor) -> Self {
        self.anchor = anchor;
        self
    }

    pub fn objective(&self) -> &Objective<T> {
        &self.objective
    }

    pub fn memory(&self) -> &[MemoryTerm<T>] {
        &self.memory
    }

    pub fn theta0(&self) -> &ParamVector<T> {
        &self.theta0
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn anchor(&self) -> StepAnchor {
        self.anchor
    }

    pub fn dim(&self) -> usize {
        self.theta0.len()
    }

    fn anchor_index(&self, j: usize) -> usize {
        match self.anchor {
            StepAnchor::Left => j,
            StepAnchor::Right => j + 1,
        }
    }

    fn eval_time(&self, term: &MemoryTerm<T>, j: usize) -> T {
        self.alpha * T::from_index(self.anchor_index(j)) + term.lookahead
    }

    /// Grid offset of a term's evaluation time relative to `t_j`, if it lands on a node.
    fn node_offset(&self, term: &MemoryTerm<T>) -> Option<usize> {
        let s = term.lookahead / self.alpha;
        let r = s.round();
        if (s - r).abs() <= T::lit(1e-9) * r.max(T::one()) {
            r.to_usize().map(|r| r + self.anchor_index(0))
        } else {
            None
        }
    }
}

impl<T: Scalar> fmt::Debug for IdeProblem<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IdeProblem")
            .field("objective", &self.objective)
            .field("memory", &self.memory)
            .field("theta0", &self.theta0)
            .field("alpha", &self.alpha)
            .field("steps", &self.steps)
            .field("anchor", &self.anchor)
            .field("initial_rhs", &self.initial_rhs.is_some())
            .finish_non_exhaustive()
    }
}

pub fn gradient_flow_rhs<T: Scalar>() -> RhsFn<T> {
    Arc::new(|ctx: &RhsContext<'_, T>, out: &mut [T]| {
        for (o, &g) in out.iter_mut().zip(ctx.gradient) {
            *o = -g;
        }
    })
}

/// How memory values are computed inside a pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MemoryEval {
    /// Panel recurrence along the grid, `O(N)` per pass.
    #[default]
    Incremental,
    /// The fixed Gauss–Legendre rule on `[0, t]` at every evaluation.
    Quadrature,
}

/// Which trajectory the memory integrals of a pass are evaluated against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// History up to `t_j` is the pass's own Euler state; only the panel ahead
    /// of the current node comes from the previous trajectory.
    #[default]
    Causal,
    /// The whole integral comes from the previous trajectory.
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    pub tolerance: T,
    pub smoothing_init: T,
    pub smoothing_increment: T,
    pub smoothing_max: T,
    pub max_outer_iterations: usize,
    pub quad_order: usize,
    pub memory_eval: MemoryEval,
    pub coupling: Coupling,
}

impl<T: Scalar> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            tolerance: T::lit(1e-4),
            smoothing_init: T::lit(0.5),
            smoothing_increment: T::lit(0.0005),
            smoothing_max: T::lit(0.9999),
            max_outer_iterations: 100_000,
            quad_order: 1000,
            memory_eval: MemoryEval::Incremental,
            coupling: Coupling::Causal,
        }
    }
}

impl<T: Scalar> SolverConfig<T> {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.tolerance > T::zero() && self.tolerance.is_finite()) {
            v.push(format!("tolerance: must be positive, got {}", self.tolerance));
        }
        if !(self.smoothing_init > T::zero()) {
            v.push(format!("smoothing_init: must be positive, got {}", self.smoothing_init));
        }
        if !(self.smoothing_init <= self.smoothing_max) {
            v.push(format!(
                "smoothing_init: {} exceeds smoothing_max {}",
                self.smoothing_init, self.smoothing_max
            ));
        }
        if !(self.smoothing_max < T::one()) {
            v.push(format!("smoothing_max: must be below 1, got {}", self.smoothing_max));
        }
        if !(self.smoothing_increment >= T::zero() && self.smoothing_increment.is_finite()) {
            v.push(format!(
                "smoothing_increment: must be >= 0, got {}",
                self.smoothing_increment
            ));
        }
        if self.max_outer_iterations == 0 {
            v.push("max_outer_iterations: must be at least 1".into());
        }
        if !(1..=MAX_ORDER).contains(&self.quad_order) {
            v.push(format!(
                "quad_order: must lie in 1..={MAX_ORDER}, got {}",
                self.quad_order
            ));
        }
        v
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
pub struct SolveReport<T> {
    pub converged: bool,
    pub outer_iterations: usize,
    pub final_error: T,
    pub final_smoothing: T,
    /// Smoothing factor after each outer iteration.
    pub smoothing_trace: Vec<T>,
    pub trajectory: SampledPath<T>,
}

/// Forward Euler with `memory` filling the memory values before each step.
fn sweep<T, M>(problem: &IdeProblem<T>, rhs: &RhsFn<T>, mut memory: M) -> Result<SampledPath<T>>
where
    T: Scalar,
    M: FnMut(usize, &[ParamVector<T>], &mut [Vec<T>]) -> Result<()>,
{
    let n = problem.dim();
    let mut nodes = Vec::with_capacity(problem.steps + 1);
    nodes.push(problem.theta0.clone());
    let mut mem: Vec<Vec<T>> = problem
        .memory
        .iter()
        .map(|m| vec![T::zero(); m.integrand.width(n)])
        .collect();
    let mut grad = vec![T::zero(); n];
    let mut dir = vec![T::zero(); n];
    for j in 0..problem.steps {
        memory(j, &nodes, &mut mem)?;
        if !mem.iter().all(|m| all_finite(m)) {
            return Err(Error::Diverged {
                last_valid_step: j,
                quantity: "memory",
            });
        }
        let theta = nodes[j].as_slice();
        problem.objective.grad_into(theta, &mut grad);
        let ctx = RhsContext {
            step: j,
            t: problem.alpha * T::from_index(problem.anchor_index(j)),
            theta,
            gradient: &grad,
            memory: &mem,
        };
        dir.iter_mut().for_each(|d| *d = T::zero());
        rhs(&ctx, &mut dir);
        let next: Vec<T> = theta.iter().zip(&dir).map(|(&x, &d)| x + problem.alpha * d).collect();
        if !all_finite(&next) {
            return Err(Error::Diverged {
                last_valid_step: j,
                quantity: "theta",
            });
        }
        nodes.push(ParamVector::from_vec_unchecked(next));
    }
    Ok(SampledPath::from_parts_unchecked(problem.alpha, nodes))
}

/// Euler solution with every memory value forced out of the picture.
pub fn initial_guess<T: Scalar>(problem: &IdeProblem<T>, config: &SolverConfig<T>) -> Result<SampledPath<T>> {
    config.validate()?;
    let rhs = problem.initial_rhs.as_ref().unwrap_or(&problem.rhs);
    sweep(problem, rhs, |_, _, _| Ok(()))
}

fn check_grid<T: Scalar>(problem: &IdeProblem<T>, path: &SampledPath<T>) -> Result<()> {
    if path.alpha() != problem.alpha || path.steps() != problem.steps {
        return Err(Error::GridMismatch(format!(
            "path has alpha {} and {} steps, problem has alpha {} and {} steps",
            path.alpha(),
            path.steps(),
            problem.alpha,
            problem.steps
        )));
    }
    if path.values()[0].len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            found: path.values()[0].len(),
        });
    }
    Ok(())
}

fn as_divergence(e: Error, step: usize) -> Error {
    match e {
        Error::NonFiniteIntegrand { .. } => Error::Diverged {
            last_valid_step: step,
            quantity: "memory",
        },
        other => other,
    }
}

/// Memory of `term` at the evaluation time of every step, computed on `path`.
fn frozen_table<T: Scalar>(
    problem: &IdeProblem<T>,
    term: &MemoryTerm<T>,
    path: &SampledPath<T>,
    config: &SolverConfig<T>,
    rule: &QuadratureRule<T>,
) -> Result<Vec<Vec<T>>> {
    let obj = &problem.objective;
    if let (MemoryEval::Incremental, Some(off)) = (config.memory_eval, problem.node_offset(term)) {
        if problem.steps - 1 + off <= path.steps() {
            let all = memory_incremental(&term.kernel, path, obj, term.integrand).map_err(|e| as_divergence(e, 0))?;
            return Ok((0..problem.steps).map(|j| all[j + off].clone()).collect());
        }
    }
    (0..problem.steps)
        .into_par_iter()
        .map(|j| {
            memory_integral(
                &term.kernel,
                path,
                obj,
                term.integrand,
                problem.eval_time(term, j),
                rule,
            )
            .map_err(|e| as_divergence(e, j))
        })
        .collect()
}

enum CausalTerm<T> {
    /// Running history; `peek` reaches one node past the current one.
    Running {
        acc: MemoryAccumulator<T>,
        ahead: bool,
    },
    Quadrature,
}

/// One Euler pass with memory taken from `frozen` as selected by the coupling.
pub fn refine_pass<T: Scalar>(
    problem: &IdeProblem<T>,
    frozen: &SampledPath<T>,
    config: &SolverConfig<T>,
) -> Result<SampledPath<T>> {
    config.validate()?;
    check_grid(problem, frozen)?;
    let rule = gauss_legendre_rule::<T>(config.quad_order)?;
    let obj = &problem.objective;
    match config.coupling {
        Coupling::Frozen => {
            let tables = problem
                .memory
                .iter()
                .map(|term| frozen_table(problem, term, frozen, config, &rule))
                .collect::<Result<Vec<_>>>()?;
            sweep(problem, &problem.rhs, |j, _, mem| {
                for (m, table) in mem.iter_mut().zip(&tables) {
                    m.copy_from_slice(&table[j]);
                }
                Ok(())
            })
        }
        Coupling::Causal => {
            let panel = PanelRule::new();
            let mut terms: Vec<CausalTerm<T>> = problem
                .memory
                .iter()
                .map(|term| match (config.memory_eval, problem.node_offset(term)) {
                    (MemoryEval::Incremental, Some(off)) if off <= 1 => CausalTerm::Running {
                        acc: MemoryAccumulator::new(term.kernel, term.integrand, problem.alpha, problem.dim()),
                        ahead: off == 1,
                    },
                    _ => CausalTerm::Quadrature,
                })
                .collect();
            sweep(problem, &problem.rhs, |j, live, mem| {
                for ((m, state), term) in mem.iter_mut().zip(&mut terms).zip(&problem.memory) {
                    match state {
                        CausalTerm::Running { acc, ahead } => {
                            if j > 0 {
                                acc.advance(&panel, obj, live[j - 1].as_slice(), live[j].as_slice());
                            }
                            if *ahead {
                                let next = acc.peek(&panel, obj, live[j].as_slice(), frozen.values()[j + 1].as_slice());
                                m.copy_from_slice(&next);
                            } else {
                                m.copy_from_slice(acc.value());
                            }
                        }
                        CausalTerm::Quadrature => {
                            let path = Spliced { live, frozen };
                            let t = problem.eval_time(term, j);
                            let v = memory_integral(&term.kernel, &path, obj, term.integrand, t, &rule)
                                .map_err(|e| as_divergence(e, j))?;
                            m.copy_from_slice(&v);
                        }
                    }
                }
                Ok(())
            })
        }
    }
}

fn check_same_grid<T: Scalar>(a: &SampledPath<T>, b: &SampledPath<T>) -> Result<()> {
    if a.alpha() != b.alpha() || a.steps() != b.steps() || a.values()[0].len() != b.values()[0].len() {
        return Err(Error::GridMismatch(format!(
            "({}, {} steps, dim {}) vs ({}, {} steps, dim {})",
            a.alpha(),
            a.steps(),
            a.values()[0].len(),
            b.alpha(),
            b.steps(),
            b.values()[0].len()
        )));
    }
    Ok(())
}

/// `Σ_j ‖a_j − b_j‖²`.
pub fn global_error<T: Scalar>(a: &SampledPath<T>, b: &SampledPath<T>) -> Result<T> {
    check_same_grid(a, b)?;
    Ok(a.values()
        .iter()
        .zip(b.values())
        .flat_map(|(x, y)| x.iter().zip(y.iter()))
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y)))
}

/// Pointwise `a·current + (1 − a)·guess`.
pub fn blend<T: Scalar>(current: &SampledPath<T>, guess: &SampledPath<T>, a: T) -> Result<SampledPath<T>> {
    check_same_grid(current, guess)?;
    if !(a >= T::zero() && a <= T::one()) {
        return Err(Error::InvalidConfig(format!(
            "blend weight must lie in [0, 1], got {a}"
        )));
    }
    let b = T::one() - a;
    let values = current
        .values()
        .iter()
        .zip(guess.values())
        .map(|(x, y)| ParamVector::from_vec_unchecked(x.iter().zip(y.iter()).map(|(&x, &y)| a * x + b * y).collect()))
        .collect();
    Ok(SampledPath::from_parts_unchecked(current.alpha(), values))
}

pub fn solve<T: Scalar>(problem: &IdeProblem<T>, config: &SolverConfig<T>) -> Result<SolveReport<T>> {
    config.validate()?;
    let mut current = initial_guess(problem, config)?;
    let mut guess = refine_pass(problem, &current, config)?;
    let mut error = global_error(&current, &guess)?;
    let mut a = config.smoothing_init;
    let mut iterations = 1;
    let mut trace = vec![a];

    while !(error <= config.tolerance) && iterations < config.max_outer_iterations {
        let new = blend(&current, &guess, a)?;
        guess = refine_pass(problem, &new, config)?;
        let new_error = global_error(&new, &guess)?;
        iterations += 1;
        if new_error > error {
            if a >= config.smoothing_max {
                error = new_error;
                trace.push(a);
                break;
            }
            a = (a + config.smoothing_increment).min(config.smoothing_max);
        }
        trace.push(a);
        current = new;
        error = new_error;
    }

    Ok(SolveReport {
        converged: error <= config.tolerance,
        outer_iterations: iterations,
        final_error: error,
        final_smoothing: a,
        smoothing_trace: trace,
        trajectory: guess,
    })
}

/// Each memory term of `problem` at every grid time `t_j` of `path`, without
/// lookahead. Indexed `[term][j][component]`.
pub fn memory_on_grid<T: Scalar>(
    problem: &IdeProblem<T>,
    path: &SampledPath<T>,
    config: &SolverConfig<T>,
) -> Result<Vec<Vec<Vec<T>>>> {
    config.validate()?;
    let obj = &problem.objective;
    let rule = gauss_legendre_rule::<T>(config.quad_order)?;
    problem
        .memory
        .iter()
        .map(|term| match config.memory_eval {
            MemoryEval::Incremental => memory_incremental(&term.kernel, path, obj, term.integrand),
            MemoryEval::Quadrature => (0..path.node_count())
                .into_par_iter()
                .map(|j| memory_integral(&term.kernel, path, obj, term.integrand, path.time(j), &rule))
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::{run_gd, OptimizerConfig};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn quad() -> Objective<f64> {
        Objective::shifted_quadratic(4.0, 1).unwrap()
    }

    fn pv(x: f64) -> ParamVector<f64> {
        ParamVector::new(vec![x]).unwrap()
    }

    fn path(xs: &[f64]) -> SampledPath<f64> {
        SampledPath::from_rows(0.1, xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    /// `θ̇ = −∇f/(√G(t+α) + ε)` with `G` the accumulating memory.
    fn adagrad_like(alpha: f64, steps: usize, theta0: f64) -> IdeProblem<f64> {
        let eps = 1e-8;
        let rhs: RhsFn<f64> = Arc::new(move |ctx: &RhsContext<'_, f64>, out: &mut [f64]| {
            let d = ctx.memory[0][0].sqrt() + eps;
            for (o, &g) in out.iter_mut().zip(ctx.gradient) {
                *o = -g / d;
            }
        });
        let term = MemoryTerm::new(
            "G",
            KernelSpec::accumulating(alpha).unwrap(),
            Integrand::SquaredGradNorm,
            alpha,
        )
        .unwrap();
        IdeProblem::new(quad(), pv(theta0), alpha, steps, rhs)
            .unwrap()
            .with_memory(term)
            .with_initial_rhs(gradient_flow_rhs())
    }

    fn frozen(eval: MemoryEval) -> SolverConfig<f64> {
        SolverConfig {
            coupling: Coupling::Frozen,
            memory_eval: eval,
            ..Default::default()
        }
    }

    #[test]
    fn single_euler_step_is_a_gd_step() {
        let p = IdeProblem::gradient_flow(quad(), pv(0.0), 0.1, 1).unwrap();
        let g = initial_guess(&p, &SolverConfig::default()).unwrap();
        assert_abs_diff_eq!(g.values()[1][0], 0.8, epsilon = 1e-15);
    }

    #[test]
    fn trivial_initial_guesses() {
        let cfg = SolverConfig::default();
        let p = IdeProblem::gradient_flow(quad(), pv(4.0), 0.1, 5).unwrap();
        assert!(initial_guess(&p, &cfg).unwrap().values().iter().all(|v| v[0] == 4.0));

        let still: RhsFn<f64> = Arc::new(|_: &RhsContext<'_, f64>, _: &mut [f64]| {});
        let p = IdeProblem::new(quad(), pv(1.5), 0.1, 5, still).unwrap();
        assert!(initial_guess(&p, &cfg).unwrap().values().iter().all(|v| v[0] == 1.5));
    }

    #[test]
    fn problem_validation() {
        assert!(IdeProblem::gradient_flow(quad(), pv(0.0), 0.1, 0).is_err());
        assert!(IdeProblem::gradient_flow(quad(), pv(0.0), -0.1, 3).is_err());
        let two = ParamVector::new(vec![0.0, 0.0]).unwrap();
        assert!(IdeProblem::gradient_flow(quad(), two, 0.1, 3).is_err());
        let k = KernelSpec::accumulating(0.1).unwrap();
        assert!(MemoryTerm::new("G", k, Integrand::SquaredGradNorm, -0.1).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let blowup: RhsFn<f64> = Arc::new(|ctx: &RhsContext<'_, f64>, out: &mut [f64]| {
            out[0] = ctx.theta[0].abs().max(1.0).powi(40);
        });
        let p = IdeProblem::new(quad(), pv(2.0), 0.5, 20, blowup).unwrap();
        assert!(matches!(
            initial_guess(&p, &SolverConfig::default()),
            Err(Error::Diverged { quantity: "theta", .. })
        ));
    }

    #[test]
    fn global_error_examples() {
        let a = path(&[0.0, 0.0, 0.0]);
        assert_eq!(global_error(&a, &a).unwrap(), 0.0);
        assert_eq!(global_error(&a, &path(&[0.0, 1.0, 0.0])).unwrap(), 1.0);
        assert_eq!(global_error(&a, &path(&[1.0, 2.0, 3.0])).unwrap(), 14.0);
        assert!(matches!(
            global_error(&a, &path(&[0.0, 0.0])),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn blend_examples() {
        let c = path(&[0.0, 3.0]);
        let g = path(&[2.0, 1.0]);
        assert_eq!(blend(&c, &g, 1.0).unwrap(), c);
        let same = blend(&c, &c, 0.3).unwrap();
        assert!(global_error(&same, &c).unwrap() <= 1e-30);
        assert_eq!(blend(&path(&[0.0]), &path(&[2.0]), 0.5).unwrap().values()[0][0], 1.0);
        assert!(blend(&c, &g, 1.5).is_err());
        assert!(blend(&c, &path(&[0.0]), 0.5).is_err());
    }

    #[test]
    fn config_validation_lists_every_violation() {
        let cfg = SolverConfig::<f64> {
            tolerance: 0.0,
            smoothing_max: 1.0,
            quad_order: 0,
            ..Default::default()
        };
        let v = cfg.violations();
        assert_eq!(v.len(), 3, "{v:?}");
        assert!(v[0].starts_with("tolerance"));
        assert!(SolverConfig::<f64>::default().validate().is_ok());
        let bad = SolverConfig::<f64> {
            smoothing_init: 0.95,
            smoothing_max: 0.9,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn frozen_pass_matches_hand_simulation() {
        let (alpha, n, eps) = (0.1, 10, 1e-8);
        let p = adagrad_like(alpha, n, 0.0);
        for eval in [MemoryEval::Incremental, MemoryEval::Quadrature] {
            let cfg = frozen(eval);
            let fr = initial_guess(&p, &cfg).unwrap();
            let out = refine_pass(&p, &fr, &cfg).unwrap();

            // |∇f|² = 4(θ−4)² is quadratic on each panel of the linear path,
            // so each panel contributes α·4(a² + ab + b²)/3 exactly.
            let e: Vec<f64> = fr.values().iter().map(|v| v[0] - 4.0).collect();
            let mut g_next = vec![0.0; n + 1];
            for j in 0..n {
                let (a, b) = (e[j], e[j + 1]);
                g_next[j + 1] = g_next[j] + 4.0 * (a * a + a * b + b * b) / 3.0;
            }
            let mut theta = 0.0f64;
            // the fixed 1000-point rule sees a kink at every node of the path
            let tol = if eval == MemoryEval::Incremental { 1e-10 } else { 1e-7 };
            for j in 0..n {
                theta -= alpha * 2.0 * (theta - 4.0) / (g_next[j + 1].sqrt() + eps);
                let got = out.values()[j + 1][0];
                assert!((got - theta).abs() <= tol, "{eval:?} step {j}: {got} vs {theta}");
            }
        }
    }

    #[test]
    fn zero_kernel_solve_is_gradient_descent() {
        for alpha in [0.1, 0.01, 0.3] {
            let n = 200;
            let p = IdeProblem::gradient_flow(quad(), pv(0.0), alpha, n).unwrap();
            let r = solve(&p, &SolverConfig::default()).unwrap();
            assert!(r.converged);
            assert_eq!(r.outer_iterations, 1);
            assert_eq!(r.final_error, 0.0);
            let gd = run_gd(&quad(), &pv(0.0), &OptimizerConfig::new(alpha, n)).unwrap();
            for (e, c) in gd.entries.iter().zip(r.trajectory.values()) {
                assert_abs_diff_eq!(e.theta[0], c[0], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn minimizer_is_a_fixed_point() {
        let p = adagrad_like(0.1, 50, 4.0);
        for cfg in [SolverConfig::default(), frozen(MemoryEval::Quadrature)] {
            let still = SampledPath::constant(0.1, pv(4.0), 50).unwrap();
            let out = refine_pass(&p, &still, &cfg).unwrap();
            assert!(global_error(&out, &still).unwrap() <= 1e-24);
            let r = solve(&p, &cfg).unwrap();
            assert!(r.converged);
            assert_eq!(r.outer_iterations, 1);
            assert!(r.trajectory.values().iter().all(|v| v[0] == 4.0));
        }
    }

    #[test]
    fn solve_is_deterministic() {
        let p = adagrad_like(0.1, 300, 0.0);
        for cfg in [SolverConfig::default(), frozen(MemoryEval::Quadrature)] {
            let a = solve(&p, &cfg).unwrap();
            let b = solve(&p, &cfg).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn converged_solution_is_self_consistent() {
        let p = adagrad_like(0.1, 400, 0.0);
        for cfg in [SolverConfig::default(), frozen(MemoryEval::Incremental)] {
            let r = solve(&p, &cfg).unwrap();
            assert!(r.converged && r.final_error <= cfg.tolerance);
            let again = refine_pass(&p, &r.trajectory, &cfg).unwrap();
            assert!(global_error(&again, &r.trajectory).unwrap() <= cfg.tolerance);
        }
    }

    #[test]
    fn couplings_share_the_fixed_point() {
        let p = adagrad_like(0.1, 300, 0.0);
        let tight = |coupling| SolverConfig {
            tolerance: 1e-12,
            coupling,
            ..Default::default()
        };
        let a = solve(&p, &tight(Coupling::Causal)).unwrap();
        let b = solve(&p, &tight(Coupling::Frozen)).unwrap();
        assert!(a.converged && b.converged);
        assert!(global_error(&a.trajectory, &b.trajectory).unwrap() <= 1e-10);
    }

    #[test]
    fn memory_evaluations_agree() {
        let p = adagrad_like(0.1, 60, 0.0);
        for coupling in [Coupling::Causal, Coupling::Frozen] {
            let mk = |memory_eval| SolverConfig {
                coupling,
                memory_eval,
                tolerance: 1e-10,
                ..Default::default()
            };
            let fast = solve(&p, &mk(MemoryEval::Incremental)).unwrap();
            let slow = solve(&p, &mk(MemoryEval::Quadrature)).unwrap();
            assert!(global_error(&fast.trajectory, &slow.trajectory).unwrap() <= 1e-12);
            let gf = memory_on_grid(&p, &fast.trajectory, &mk(MemoryEval::Incremental)).unwrap();
            let gs = memory_on_grid(&p, &fast.trajectory, &mk(MemoryEval::Quadrature)).unwrap();
            for (x, y) in gf[0].iter().zip(&gs[0]) {
                assert!((x[0] - y[0]).abs() <= 1e-6 * y[0].max(1.0));
            }
        }
    }

    #[test]
    fn iteration_cap_is_reported() {
        let p = adagrad_like(0.1, 200, 0.0);
        let cfg = SolverConfig {
            max_outer_iterations: 2,
            tolerance: 1e-300,
            ..Default::default()
        };
        let r = solve(&p, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.outer_iterations, 2);
    }

    #[test]
    fn grid_mismatch_in_refine_pass() {
        let p = adagrad_like(0.1, 10, 0.0);
        let wrong = SampledPath::constant(0.1, pv(0.0), 9).unwrap();
        assert!(matches!(
            refine_pass(&p, &wrong, &SolverConfig::default()),
            Err(Error::GridMismatch(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn smoothing_never_decreases(
            alpha in 0.02f64..0.5,
            theta0 in -6.0f64..12.0,
            frozen_coupling in any::<bool>(),
        ) {
            let p = adagrad_like(alpha, 80, theta0);
            let cfg = SolverConfig {
                coupling: if frozen_coupling { Coupling::Frozen } else { Coupling::Causal },
                smoothing_increment: 0.05,
                max_outer_iterations: 400,
                ..Default::default()
            };
            let r = solve(&p, &cfg).unwrap();
            prop_assert!(r.smoothing_trace.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(r.smoothing_trace.iter().all(|&a| a <= cfg.smoothing_max));
            prop_assert_eq!(*r.smoothing_trace.last().unwrap(), r.final_smoothing);
            prop_assert_eq!(r.converged, r.final_error <= cfg.tolerance);
        }
    }
}
