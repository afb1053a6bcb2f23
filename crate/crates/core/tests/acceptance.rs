//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the binary exits non-zero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nonlocal_optim::discrete::{
    run_adagrad, run_adam, run_gd, run_rmsprop, AdamVariant, OptimizerConfig, OptimizerKind,
};
use nonlocal_optim::experiments::{read_csv, run_experiment, write_csv, ExperimentSpec, Mode};
use nonlocal_optim::ide::{blend, global_error, refine_pass, solve, IdeProblem, SolverConfig};
use nonlocal_optim::kernels::{memory_incremental_scalar, memory_scalar, KernelSpec, SampledPath};
use nonlocal_optim::models::{build_adagrad, build_adam, build_rmsprop};
use nonlocal_optim::objectives::{Objective, ParamVector};
use nonlocal_optim::quadrature::{gauss_legendre_rule, integrate};
use nonlocal_optim::Trajectory64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn quad() -> Objective<f64> {
    Objective::shifted_quadratic(4.0, 1).unwrap()
}

fn pv(x: &[f64]) -> ParamVector<f64> {
    ParamVector::new(x.to_vec()).unwrap()
}

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed < limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:?}, limit {limit:?}"))
    }
}

fn discrete_adagrad_fast_rate() -> Outcome {
    let start = Instant::now();
    let t = run_adagrad(&quad(), &pv(&[0.0]), &OptimizerConfig::new(0.1, 1999)).unwrap();
    within(start.elapsed(), Duration::from_secs(1))?;
    let err: Vec<f64> = t.theta_series(0).iter().map(|x| (x - 4.0).abs()).collect();
    let hit = err.iter().position(|&e| e <= 0.01);
    let best = err.iter().cloned().fold(f64::MAX, f64::min);
    ensure(
        hit.is_some(),
        format!("first k with |θ-4| <= 0.01: {hit:?}; smallest |θ-4| for k < 2000 is {best:.4}"),
    )
}

fn discrete_adagrad_slow_rate() -> Outcome {
    let start = Instant::now();
    let t = run_adagrad(&quad(), &pv(&[0.0]), &OptimizerConfig::new(0.01, 160_000)).unwrap();
    within(start.elapsed(), Duration::from_secs(10))?;
    let at = |k: usize| (t.at(k).unwrap().theta[0] - 4.0).abs();
    ensure(
        at(20_000) > 0.5 && at(160_000) <= 0.05,
        format!("|θ-4| = {:.4} at k=20000, {:.4} at k=160000", at(20_000), at(160_000)),
    )
}

fn rmsprop_sign_descent_oscillation() -> Outcome {
    let alpha = 0.1;
    let t = run_rmsprop(&quad(), &pv(&[0.0]), &OptimizerConfig::new(alpha, 2000).with_beta(0.0)).unwrap();
    let e: Vec<f64> = t.theta_series(0)[1000..=2000].iter().map(|x| x - 4.0).collect();
    let flips = e.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
    let worst = e.iter().map(|x| x.abs()).fold(0.0, f64::max);
    ensure(
        flips >= 100 && worst <= 2.0 * alpha,
        format!("{flips} sign changes, max |θ-4| = {worst:.4}"),
    )
}

fn adam_first_step_identity() -> Outcome {
    let mut worst = (f64::MAX, f64::MIN);
    for dim in 1..=4 {
        let obj = Objective::shifted_quadratic(4.0, dim).unwrap();
        for s in [-1e3, -20.0, -3.0, 0.0, 3.4999, 7.5, 50.0, 1e4] {
            let theta0: Vec<f64> = (0..dim).map(|i| s + 0.37 * i as f64).collect();
            let g = obj.grad(&pv(&theta0)).unwrap();
            if g.norm() < 1.0 {
                continue;
            }
            for alpha in [1e-3, 0.01, 0.1, 0.5, 1.0] {
                for (b1, b2) in [(0.9, 0.999), (0.0, 0.99), (0.99, 0.9)] {
                    let cfg = OptimizerConfig::new(alpha, 1).with_betas(b1, b2);
                    let t = run_adam(&obj, &pv(&theta0), &cfg, AdamVariant::Plain).unwrap();
                    let r = t.entries[1].theta.distance(&t.entries[0].theta) / alpha;
                    // θ1 and θ0 are only representable to one ulp at their magnitude.
                    let scale = t.entries[0]
                        .theta
                        .iter()
                        .chain(t.entries[1].theta.iter())
                        .fold(0.0f64, |a, x| a.max(x.abs()));
                    let slack = 2.0 * f64::EPSILON * scale * (dim as f64).sqrt() / alpha;
                    worst = (worst.0.min(r + slack), worst.1.max(r - slack));
                }
            }
        }
    }
    ensure(
        worst.0 >= 0.999999 && worst.1 <= 1.0,
        format!("|θ1-θ0|/α in [{:.9}, {:.9}]", worst.0, worst.1),
    )
}

fn euler_matches_gd() -> Outcome {
    let mut worst = 0.0f64;
    for alpha in [0.1, 0.01] {
        let n = 1000;
        let p = IdeProblem::gradient_flow(quad(), pv(&[0.0]), alpha, n).unwrap();
        let r = solve(&p, &SolverConfig::default()).unwrap();
        if !r.converged || r.outer_iterations != 1 {
            return Err(format!(
                "alpha {alpha}: converged {} in {} iterations",
                r.converged, r.outer_iterations
            ));
        }
        let gd = run_gd(&quad(), &pv(&[0.0]), &OptimizerConfig::new(alpha, n)).unwrap();
        for (e, c) in gd.entries.iter().zip(r.trajectory.values()) {
            worst = worst.max((e.theta[0] - c[0]).abs());
        }
    }
    ensure(
        worst <= 1e-12,
        format!("one outer iteration, max |Euler - GD| = {worst:e}"),
    )
}

fn quadrature_exactness() -> Outcome {
    let mut worst = 0.0f64;
    for n in [2usize, 5, 10] {
        let rule = gauss_legendre_rule::<f64>(n).unwrap();
        for d in 0..2 * n {
            let v = integrate(&rule, |x: f64| x.powi(d as i32), 0.0, 1.0).unwrap();
            worst = worst.max((v - 1.0 / (d as f64 + 1.0)).abs());
        }
    }
    let rule = gauss_legendre_rule::<f64>(1000).unwrap();
    let mut mass_err = 0.0f64;
    for (alpha, beta) in [(0.1, 0.0), (0.1, 0.9), (0.01, 0.99), (0.1, 0.999)] {
        let k = KernelSpec::moving_average(alpha, beta).unwrap();
        let lambda = (1.0 - beta) / alpha;
        for t_end in [0.05, 1.0, 7.5, 40.0] {
            let m = integrate(&rule, |t| k.eval(t).unwrap(), 0.0, t_end).unwrap();
            mass_err = mass_err.max((m - (1.0 - (-lambda * t_end).exp())).abs());
        }
    }
    ensure(
        worst <= 1e-12 && mass_err <= 1e-8,
        format!("monomial error {worst:e}, kernel mass error {mass_err:e}"),
    )
}

fn continuous_adagrad_agreement() -> Outcome {
    let start = Instant::now();
    let spec = ExperimentSpec::new(
        quad(),
        OptimizerKind::AdaGrad,
        OptimizerConfig::new(0.1, 2000),
        Mode::Both,
    );
    let out = run_experiment(&spec).unwrap();
    within(start.elapsed(), Duration::from_secs(120))?;
    let solve = &out.continuous.as_ref().unwrap().solve;
    let diff = out.comparison.unwrap().get("theta_0").unwrap().max_abs_diff;
    ensure(
        solve.converged && solve.final_error <= 1e-4 && diff <= 0.05,
        format!(
            "converged {} after {} iterations, final error {:.2e}, max θ diff {diff:.4}",
            solve.converged, solve.outer_iterations, solve.final_error
        ),
    )
}

fn agreement_improves_with_smaller_alpha() -> Outcome {
    let sup = |alpha: f64| {
        let n = (20.0 / alpha).round() as usize;
        let cfg = OptimizerConfig::new(alpha, n).with_beta(0.9);
        let out = run_experiment(&ExperimentSpec::new(quad(), OptimizerKind::RmsProp, cfg, Mode::Both)).unwrap();
        assert!(
            out.continuous.unwrap().solve.converged,
            "alpha {alpha} did not converge"
        );
        out.comparison.unwrap().get("theta_0").unwrap().max_abs_diff
    };
    let (coarse, fine) = (sup(0.1), sup(0.01));
    ensure(
        fine < coarse,
        format!("sup θ discrepancy on [0, 20]: {coarse:.4} at α=0.1, {fine:.4} at α=0.01"),
    )
}

fn continuous_adam_overshoot() -> Outcome {
    let cfg = OptimizerConfig::new(0.1, 1000).with_betas(0.9, 0.99);
    let spec = ExperimentSpec::new(quad(), OptimizerKind::Adam(AdamVariant::Plain), cfg, Mode::Both);
    let out = run_experiment(&spec).unwrap();
    let c = out.continuous.as_ref().unwrap();
    let th = c.trajectory.theta_series(0);
    let peak = th.iter().cloned().fold(f64::MIN, f64::max);
    let settled = th[900..].iter().all(|x| (x - 4.0).abs() <= 0.05);
    let diff = out.comparison.unwrap().get("theta_0").unwrap().max_abs_diff;
    ensure(
        c.solve.converged && peak > 4.0 && settled && diff <= 0.1,
        format!(
            "converged {}, peak θ {peak:.4}, settled {settled}, max θ diff {diff:.4}",
            c.solve.converged
        ),
    )
}

fn mse_appendix() -> Outcome {
    let obj = Objective::linear_regression_mse(vec![1.0], 2.0).unwrap();
    let first_below = |t: &Trajectory64| t.entries.iter().position(|e| e.loss <= 1e-3);
    let cfg = OptimizerConfig::new(0.1, 60).with_beta(0.9);
    let out = run_experiment(&ExperimentSpec::new(
        obj.clone(),
        OptimizerKind::RmsProp,
        cfg,
        Mode::Both,
    ))
    .unwrap();
    let d = first_below(out.discrete.as_ref().unwrap());
    let c = out.continuous.as_ref().unwrap();
    let ck = first_below(&c.trajectory);
    let ada = run_adagrad(&obj, &pv(&[0.0]), &OptimizerConfig::new(0.1, 60)).unwrap();
    let ada_loss = ada.last().unwrap().loss;
    let rms_loss = out.discrete.as_ref().unwrap().last().unwrap().loss;
    ensure(
        c.solve.converged && d.is_some() && ck.is_some() && ada_loss > rms_loss,
        format!(
            "loss <= 1e-3 at k = {d:?} (discrete), {ck:?} (continuous); loss at k=60: AdaGrad {ada_loss:.4}, RMSProp {rms_loss:.2e}"
        ),
    )
}

fn smooth_path(alpha: f64, n: usize, c: &[f64]) -> SampledPath<f64> {
    let rows = (0..=n)
        .map(|j| {
            let t = alpha * j as f64;
            vec![4.0 + c[0] * (-t).exp() + c[1] * (2.0 * t).sin() + c[2] * t]
        })
        .collect();
    SampledPath::from_rows(alpha, rows).unwrap()
}

fn property_suites() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 48,
        failure_persistence: None,
        ..Config::default()
    });
    let mut passed = Vec::new();
    let mut check = |name: &'static str, r: Result<(), String>| match r {
        Ok(()) => {
            passed.push(name);
            Ok(())
        }
        Err(e) => Err(format!("{name}: {e}")),
    };

    check(
        "monotone G",
        runner
            .run(&prop::collection::vec(-5.0f64..10.0, 2..60), |xs| {
                let rows = xs.iter().map(|&x| vec![x]).collect();
                let p = SampledPath::from_rows(0.1, rows).unwrap();
                let g = memory_incremental_scalar(&KernelSpec::accumulating(0.1).unwrap(), &p, &quad()).unwrap();
                prop_assert!(g.windows(2).all(|w| w[1] >= w[0]));
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;

    check(
        "convex-combination bound on v",
        runner
            .run(
                &(-20.0f64..20.0, 0.0f64..0.999, 0.001f64..1.0),
                |(theta0, beta, alpha)| {
                    let t = run_rmsprop(
                        &quad(),
                        &pv(&[theta0]),
                        &OptimizerConfig::new(alpha, 200).with_beta(beta),
                    )
                    .unwrap();
                    for w in t.entries.windows(2) {
                        let g2 = quad().grad(&w[0].theta).unwrap().norm_sq();
                        let (prev, next) = (w[0].aux[0][0], w[1].aux[0][0]);
                        let (lo, hi) = (prev.min(g2), prev.max(g2));
                        prop_assert!(next >= lo * (1.0 - 1e-12) && next <= hi * (1.0 + 1e-12));
                    }
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
    )?;

    let still = SampledPath::constant(0.1, pv(&[4.0]), 100).unwrap();
    let models = [
        build_adagrad(quad(), pv(&[4.0]), 0.1, 1e-8, 100).unwrap(),
        build_rmsprop(quad(), pv(&[4.0]), 0.1, 0.9, 1e-8, 100).unwrap(),
        build_adam(quad(), pv(&[4.0]), 0.1, 0.9, 0.99, 1e-8, 100).unwrap(),
    ];
    let worst = models
        .iter()
        .map(|p| global_error(&refine_pass(p, &still, &SolverConfig::default()).unwrap(), &still).unwrap())
        .fold(0.0, f64::max);
    check(
        "fixed point at the minimizer",
        if worst <= 1e-24 {
            Ok(())
        } else {
            Err(format!("drift {worst:e}"))
        },
    )?;

    let rule = gauss_legendre_rule::<f64>(4000).unwrap();
    check(
        "incremental vs quadrature memory",
        runner
            .run(
                &(prop::collection::vec(-3.0f64..3.0, 3), 0.0f64..0.99, any::<bool>()),
                |(c, beta, accumulate)| {
                    let alpha = 0.01;
                    let p = smooth_path(alpha, 100, &c);
                    let k = if accumulate {
                        KernelSpec::accumulating(alpha).unwrap()
                    } else {
                        KernelSpec::moving_average(alpha, beta).unwrap()
                    };
                    let fast = memory_incremental_scalar(&k, &p, &quad()).unwrap();
                    for (j, &f) in fast.iter().enumerate().skip(1) {
                        let slow = memory_scalar(&k, &p, &quad(), p.time(j), &rule).unwrap();
                        prop_assert!((f - slow).abs() <= 1e-6 * slow.abs(), "j {}: {} vs {}", j, f, slow);
                    }
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
    )?;

    check(
        "blend and global_error algebra",
        runner
            .run(
                &(prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..30), 0.0f64..=1.0),
                |(pairs, w)| {
                    let a = SampledPath::from_rows(0.1, pairs.iter().map(|p| vec![p.0]).collect()).unwrap();
                    let b = SampledPath::from_rows(0.1, pairs.iter().map(|p| vec![p.1]).collect()).unwrap();
                    let e = global_error(&a, &b).unwrap();
                    prop_assert!(e >= 0.0 && e == global_error(&b, &a).unwrap());
                    prop_assert_eq!(global_error(&blend(&a, &b, 1.0).unwrap(), &a).unwrap(), 0.0);
                    prop_assert_eq!(global_error(&blend(&a, &b, 0.0).unwrap(), &b).unwrap(), 0.0);
                    let mid = global_error(&blend(&a, &b, w).unwrap(), &b).unwrap();
                    prop_assert!((mid - w * w * e).abs() <= 1e-9 * e.max(1.0));
                    Ok(())
                },
            )
            .map_err(|e| e.to_string()),
    )?;

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rt.csv");
    check(
        "CSV round trip",
        runner
            .run(&(0.001f64..1.0, 1usize..50, -1e3f64..1e3), |(alpha, steps, theta0)| {
                let cfg = OptimizerConfig::new(alpha, steps).with_betas(0.9, 0.99);
                let t = run_adam(&quad(), &pv(&[theta0]), &cfg, AdamVariant::Plain).unwrap();
                write_csv(&t, &path).unwrap();
                let back: Trajectory64 = read_csv(&path).unwrap();
                prop_assert_eq!(back.entries.len(), t.entries.len());
                for (a, b) in t.entries.iter().zip(&back.entries) {
                    let xs = a.theta.iter().chain(a.aux.iter().flatten()).chain([&a.loss, &a.t]);
                    let ys = b.theta.iter().chain(b.aux.iter().flatten()).chain([&b.loss, &b.t]);
                    for (x, y) in xs.zip(ys) {
                        prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
                    }
                }
                Ok(())
            })
            .map_err(|e| e.to_string()),
    )?;

    Ok(passed.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (
            "discrete AdaGrad alpha=0.1 reaches |θ-4| <= 0.01 before k=2000",
            discrete_adagrad_fast_rate,
        ),
        (
            "discrete AdaGrad alpha=0.01 is slow but arrives by k=160000",
            discrete_adagrad_slow_rate,
        ),
        (
            "discrete RMSProp beta=0 oscillates with amplitude <= 2α",
            rmsprop_sign_descent_oscillation,
        ),
        ("discrete Adam first step has length α", adam_first_step_identity),
        ("zero-kernel IDE solve equals gradient descent", euler_matches_gd),
        ("Gauss-Legendre exactness and kernel mass", quadrature_exactness),
        (
            "continuous AdaGrad matches discrete within 0.05",
            continuous_adagrad_agreement,
        ),
        (
            "RMSProp agreement improves as α shrinks",
            agreement_improves_with_smaller_alpha,
        ),
        (
            "continuous Adam overshoots and matches within 0.1",
            continuous_adam_overshoot,
        ),
        ("MSE: RMSProp reaches 1e-3 within 60 steps, AdaGrad lags", mse_appendix),
        ("property suites", property_suites),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name} ({detail}) [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name} ({detail}) [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
