use nonlocal_optim::discrete::{run_gd, OptimizerConfig};
use nonlocal_optim::ide::{solve, IdeProblem, SolverConfig};
use nonlocal_optim::objectives::{fd_check, Objective, ParamVector};
use nonlocal_optim::quadrature::{gauss_legendre_rule, integrate};

type Check = fn() -> Result<String, String>;

pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn gradient_fd() -> Result<String, String> {
    let objectives = [
        Objective::shifted_quadratic(4.0, 3).unwrap(),
        Objective::linear_regression_mse(vec![1.0, -2.0, 0.5], 2.0).unwrap(),
    ];
    let mut worst = 0.0f64;
    for obj in &objectives {
        for s in [-3.0, 0.0, 1.7, 10.0] {
            let theta = ParamVector::splat(obj.dim(), s).map_err(|e| e.to_string())?;
            worst = worst.max(fd_check(obj, &theta, 1e-5).map_err(|e| e.to_string())?);
        }
    }
    let detail = format!("max |analytic - central difference| = {worst:.2e}");
    if worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn quadrature_exact() -> Result<String, String> {
    let mut worst = 0.0f64;
    for n in [2usize, 5, 10] {
        let rule = gauss_legendre_rule::<f64>(n).map_err(|e| e.to_string())?;
        for d in 0..2 * n {
            let v = integrate(&rule, |x: f64| x.powi(d as i32), 0.0, 1.0).map_err(|e| e.to_string())?;
            worst = worst.max((v - 1.0 / (d as f64 + 1.0)).abs());
        }
    }
    let detail = format!("max monomial error {worst:.2e}");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn euler_is_gd() -> Result<String, String> {
    let obj = Objective::shifted_quadratic(4.0, 1).unwrap();
    let theta0 = ParamVector::new(vec![0.0]).unwrap();
    let p = IdeProblem::<f64>::gradient_flow(obj.clone(), theta0.clone(), 0.1, 500).map_err(|e| e.to_string())?;
    let r = solve(&p, &SolverConfig::default()).map_err(|e| e.to_string())?;
    let gd = run_gd(&obj, &theta0, &OptimizerConfig::new(0.1, 500)).map_err(|e| e.to_string())?;
    let worst = gd
        .entries
        .iter()
        .zip(r.trajectory.values())
        .map(|(e, c)| (e.theta[0] - c[0]).abs())
        .fold(0.0, f64::max);
    let detail = format!("{} outer iteration(s), max difference {worst:.2e}", r.outer_iterations);
    if r.converged && r.outer_iterations == 1 && worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn run_checks() -> Vec<CheckResult> {
    let checks: [(&'static str, Check); 3] = [
        ("gradient finite-difference check", gradient_fd),
        ("Gauss-Legendre exactness", quadrature_exact),
        ("zero-kernel solve equals gradient descent", euler_is_gd),
    ];
    checks
        .into_iter()
        .map(|(name, f)| {
            let (passed, detail) = match f() {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult { name, passed, detail }
        })
        .collect()
}
