use std::fs;
use std::path::{Path, PathBuf};

use nonlocal_optim::discrete::{AdamVariant, OptimizerConfig, OptimizerKind};
use nonlocal_optim::experiments::{ExperimentSpec, Mode};
use nonlocal_optim::ide::{Coupling, MemoryEval, SolverConfig};
use nonlocal_optim::objectives::{Objective, ParamVector};
use serde::Deserialize;

use crate::args::{CouplingArg, ExperimentArgs, ObjectiveArg, SolverArgs, Switch};

/// Contents of a `--config` file. Every field is optional; flags take precedence.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub optimizer: Option<String>,
    pub objective: Option<String>,
    pub center: Option<f64>,
    pub mse_inputs: Option<Vec<f64>>,
    pub mse_slope: Option<f64>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub beta: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub weight_decay: Option<f64>,
    pub l2_lambda: Option<f64>,
    pub theta0: Option<Vec<f64>>,
    pub steps: Option<usize>,
    pub stride: Option<usize>,
    pub tolerance: Option<f64>,
    pub quad_nodes: Option<usize>,
    pub max_outer: Option<usize>,
    pub fast_memory: Option<bool>,
    pub coupling: Option<String>,
    pub out: Option<PathBuf>,
    pub svg: Option<bool>,
}

pub fn read_config(path: &Path) -> Result<FileConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Reads the optional config file, applies `flags` over it and validates the
/// result as a complete experiment in `mode`.
pub fn load_config(path: Option<&Path>, flags: &ExperimentArgs, mode: Mode) -> Result<ExperimentSpec<f64>, String> {
    let file = match path {
        Some(p) => read_config(p)?,
        None => FileConfig::default(),
    };
    resolve(file, flags, mode)
}

fn pick<T: Clone>(flag: &Option<T>, file: &Option<T>) -> Option<T> {
    flag.clone().or_else(|| file.clone())
}

fn parse_objective(s: &str) -> Result<ObjectiveArg, String> {
    match s {
        "quadratic" => Ok(ObjectiveArg::Quadratic),
        "mse" => Ok(ObjectiveArg::Mse),
        other => Err(format!(
            "objective: unknown value '{other}' (expected quadratic or mse)"
        )),
    }
}

fn parse_coupling(s: &str) -> Result<CouplingArg, String> {
    match s {
        "causal" => Ok(CouplingArg::Causal),
        "frozen" => Ok(CouplingArg::Frozen),
        other => Err(format!("coupling: unknown value '{other}' (expected causal or frozen)")),
    }
}

pub fn solver_config(flags: &SolverArgs, file: &FileConfig) -> Result<SolverConfig<f64>, String> {
    let mut s = SolverConfig::default();
    if let Some(t) = pick(&flags.tolerance, &file.tolerance) {
        s.tolerance = t;
    }
    if let Some(n) = pick(&flags.quad_nodes, &file.quad_nodes) {
        s.quad_order = n;
    }
    if let Some(n) = pick(&flags.max_outer, &file.max_outer) {
        s.max_outer_iterations = n;
    }
    let fast = flags.fast_memory.map(|f| f == Switch::On).or(file.fast_memory);
    if fast == Some(false) {
        s.memory_eval = MemoryEval::Quadrature;
    }
    let coupling = match (flags.coupling, &file.coupling) {
        (Some(c), _) => Some(c),
        (None, Some(c)) => Some(parse_coupling(c)?),
        (None, None) => None,
    };
    if coupling == Some(CouplingArg::Frozen) {
        s.coupling = Coupling::Frozen;
    }
    let v = s.violations();
    if v.is_empty() {
        Ok(s)
    } else {
        Err(v.join("; "))
    }
}

/// Merges flags over the file and fills documented defaults. Every missing or
/// invalid field is reported in one message.
fn resolve(file: FileConfig, flags: &ExperimentArgs, mode: Mode) -> Result<ExperimentSpec<f64>, String> {
    let mut errors = Vec::new();

    let optimizer = match pick(&flags.optimizer, &file.optimizer) {
        Some(name) => match name.parse::<OptimizerKind>() {
            Ok(k) => Some(k),
            Err(e) => {
                errors.push(format!("optimizer: {e}"));
                None
            }
        },
        None => {
            errors.push("optimizer: required".to_string());
            None
        }
    };
    let alpha = pick(&flags.alpha, &file.alpha);
    if alpha.is_none() {
        errors.push("alpha: required".to_string());
    }
    let steps = pick(&flags.steps, &file.steps);
    if steps.is_none() {
        errors.push("steps: required".to_string());
    }
    let beta = pick(&flags.beta, &file.beta);
    let beta1 = pick(&flags.beta1, &file.beta1);
    let beta2 = pick(&flags.beta2, &file.beta2);
    match optimizer {
        Some(OptimizerKind::RmsProp) if beta.is_none() => errors.push("beta: required for rmsprop".to_string()),
        Some(OptimizerKind::Adam(_)) => {
            for (name, v) in [("beta1", beta1), ("beta2", beta2)] {
                if v.is_none() {
                    errors.push(format!("{name}: required for {}", optimizer.unwrap()));
                }
            }
        }
        _ => {}
    }

    let objective = match flags
        .objective
        .map(Ok)
        .or_else(|| file.objective.as_deref().map(parse_objective))
    {
        None => Ok(ObjectiveArg::Quadratic),
        Some(o) => o,
    };
    let theta0 = pick(&flags.theta0, &file.theta0);
    let objective = objective.and_then(|o| match o {
        ObjectiveArg::Quadratic => {
            let dim = theta0.as_ref().map_or(1, Vec::len);
            Objective::shifted_quadratic(pick(&flags.center, &file.center).unwrap_or(4.0), dim)
                .map_err(|e| format!("center: {e}"))
        }
        ObjectiveArg::Mse => Objective::linear_regression_mse(
            pick(&flags.mse_inputs, &file.mse_inputs).unwrap_or_else(|| vec![1.0]),
            pick(&flags.mse_slope, &file.mse_slope).unwrap_or(2.0),
        )
        .map_err(|e| format!("mse: {e}")),
    });
    let objective = objective.map_err(|e| errors.push(e)).ok();
    let theta0 = match (&objective, theta0) {
        (Some(obj), None) => Some(ParamVector::zeros(obj.dim())),
        (_, Some(v)) => ParamVector::new(v)
            .map_err(|e| errors.push(format!("theta0: {e}")))
            .ok(),
        (None, None) => None,
    };
    let solver = solver_config(&flags.solver, &file).map_err(|e| errors.push(e)).ok();

    let (Some(optimizer), Some(alpha), Some(steps), Some(objective), Some(theta0), Some(solver)) =
        (optimizer, alpha, steps, objective, theta0, solver)
    else {
        return Err(errors.join("; "));
    };

    let mut cfg = OptimizerConfig::new(alpha, steps);
    if let Some(e) = pick(&flags.epsilon, &file.epsilon) {
        cfg.epsilon = e;
    }
    if let Some(b) = beta {
        cfg.beta = b;
    }
    if let Some(b) = beta1 {
        cfg.beta1 = b;
    }
    if let Some(b) = beta2 {
        cfg.beta2 = b;
    }
    if let Some(w) = pick(&flags.weight_decay, &file.weight_decay) {
        cfg.weight_decay = w;
    }
    if let Some(l) = pick(&flags.l2_lambda, &file.l2_lambda) {
        cfg.l2_lambda = l;
    }
    if let Some(s) = pick(&flags.stride, &file.stride) {
        cfg.record_stride = s;
    }
    if cfg.weight_decay > 0.0 && optimizer != OptimizerKind::Adam(AdamVariant::W) {
        errors.push(format!("weight_decay: only used by adamw, not {optimizer}"));
    }
    if cfg.l2_lambda > 0.0 && optimizer != OptimizerKind::Adam(AdamVariant::L2) {
        errors.push(format!("l2_lambda: only used by adaml2, not {optimizer}"));
    }

    let mut spec = ExperimentSpec::new(objective, optimizer, cfg, mode);
    spec.theta0 = theta0;
    spec.solver = solver;
    spec.out_dir = pick(&flags.out, &file.out);
    spec.svg = flags.svg || file.svg.unwrap_or(false);
    errors.extend(spec.violations());
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(errors.join("; "))
    }
}
