//! Discrete adaptive optimizers and their continuous-time nonlocal models.
//!
//! AdaGrad, RMSProp and Adam are implemented as plain iterations
//! ([`discrete`]) and as integro-differential equations whose memory terms are
//! integrals over the whole past trajectory ([`models`]). The continuous models
//! are solved on the grid `t = αk` by an iterative fixed-point method
//! ([`ide`]), so every continuous sample lines up with a discrete iteration and
//! the two can be compared index by index ([`experiments`]).
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.
//!
//! ```
//! use nonlocal_optim::{build_adagrad, solve, Objective64, ParamVector64, SolverConfig};
//!
//! let f = Objective64::shifted_quadratic(4.0, 1).unwrap();
//! let theta0 = ParamVector64::new(vec![0.0]).unwrap();
//! let problem = build_adagrad(f, theta0, 0.1, 1e-8, 200).unwrap();
//! let report = solve(&problem, &SolverConfig::default()).unwrap();
//! assert!(report.converged);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod discrete;
pub mod error;
pub mod experiments;
pub mod ide;
pub mod kernels;
pub mod models;
pub mod objectives;
pub mod quadrature;
pub mod scalar;

pub use discrete::{
    run_adagrad, run_adam, run_discrete, run_gd, run_rmsprop, AdamVariant, OptimizerConfig, OptimizerKind, Trajectory,
    TrajectoryEntry,
};
pub use error::{Error, Result};
pub use experiments::{
    compare, read_csv, reproduce_figure, run_experiment, write_csv, write_svg, ComparisonReport, ExperimentSpec, Mode,
};
pub use ide::{
    blend, global_error, initial_guess, refine_pass, solve, Coupling, IdeProblem, MemoryEval, SolveReport, SolverConfig,
};
pub use kernels::{memory_scalar, memory_vector, Integrand, KernelSpec, SampledPath};
pub use models::{bias_correction_eval, build_adagrad, build_adam, build_rmsprop, BiasCorrection};
pub use objectives::{fd_check, Objective, ParamVector};
pub use quadrature::{gauss_legendre_rule, integrate, QuadratureRule};
pub use scalar::Scalar;

pub type ParamVector64 = ParamVector<f64>;
pub type ParamVector32 = ParamVector<f32>;
pub type Objective64 = Objective<f64>;
pub type Objective32 = Objective<f32>;
pub type Trajectory64 = Trajectory<f64>;
pub type Trajectory32 = Trajectory<f32>;
pub type SampledPath64 = SampledPath<f64>;
pub type SampledPath32 = SampledPath<f32>;
pub type IdeProblem64 = IdeProblem<f64>;
pub type IdeProblem32 = IdeProblem<f32>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type SolverConfig32 = SolverConfig<f32>;
