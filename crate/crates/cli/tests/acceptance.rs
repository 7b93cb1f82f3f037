//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure.

use std::f64::consts::{E, FRAC_PI_2};
use std::panic;
use std::time::Instant;

use bsvie_cli::{run_solve, ExperimentConfig, Format, RunOptions};
use bsvie_core::oracle::{
    classify_dirac, classify_uniform, dirac_solution_mean, ode_residual, uniform_solution_mean,
    uniform_z0_square_integrable, Verdict,
};
use bsvie_core::regularity::{holder_fit, increment_moments};
use bsvie_core::solver::convergence_ratios;
use bsvie_core::{
    contraction_constant, small_delay_bound, solve, DelayMeasure, DenseZSurface, GeneratorSpec, RegularityConfig,
    SolverConfig, TerminalFamily, TimeGrid, YPath, ZSurface,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = fn() -> Check;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn deterministic_config(n_steps: usize) -> SolverConfig {
    let mut config = SolverConfig::new(n_steps, 100, 1);
    config.tolerance = Some(1e-24);
    config.max_iterations = 200;
    config
}

fn contraction_arithmetic() -> Check {
    let a = contraction_constant(0.1, 0.5);
    ensure((a.constant - 0.2 * E).abs() <= 1e-12 && a.contracts, format!("(0.1, 0.5): {a:?}"))?;
    let b = contraction_constant(1.0, 1.0);
    ensure((b.constant - 4.0 * E).abs() <= 1e-12 && !b.contracts, format!("(1, 1): {b:?}"))?;
    let c = small_delay_bound(10.0, 0.01);
    ensure((c.constant - 0.1 * E).abs() <= 1e-12 && c.contracts, format!("small delay: {c:?}"))?;
    Ok(format!("{:.12} {:.12} {:.12}", a.constant, b.constant, c.constant))
}

fn dirac_oracle() -> Check {
    let (horizon, k) = (0.5, 1.0);
    let (solution, diag) = solve(
        horizon,
        &deterministic_config(128),
        &GeneratorSpec::dirac_linear_y(k),
        &TerminalFamily::Constant(1.0),
        &DelayMeasure::Dirac(-horizon),
        true,
    )
    .map_err(|e| e.to_string())?;
    ensure(diag.converged, "solver did not converge")?;
    let means = solution.y_means();
    ensure((means[0] - 2.0).abs() <= 0.02 * 2.0, format!("Y(0) = {}", means[0]))?;
    let mut worst = 0.0_f64;
    for (i, mean) in means.iter().enumerate() {
        let oracle = dirac_solution_mean(solution.grid().time(i as isize), horizon, k, 1.0, 1.0).unwrap();
        worst = worst.max((mean - oracle).abs() / oracle);
    }
    ensure(worst <= 0.02, format!("worst relative error {worst:.4}"))?;
    Ok(format!("Y(0) = {:.6}, worst node rel. error {worst:.2e}", means[0]))
}

fn uniform_oracle() -> Check {
    let (horizon, k) = (1.0_f64, -1.0);
    let (solution, diag) = solve(
        horizon,
        &deterministic_config(128),
        &GeneratorSpec::uniform_linear_y(k),
        &TerminalFamily::ExpDecay(vec![(-horizon).exp()]),
        &DelayMeasure::Uniform(-horizon, 0.0),
        true,
    )
    .map_err(|e| e.to_string())?;
    ensure(diag.converged, "solver did not converge")?;
    let means = solution.y_means();
    let mut sup = 0.0_f64;
    for (i, m) in means.iter().enumerate() {
        let oracle = uniform_solution_mean(solution.grid().time(i as isize), horizon, k, 1.0).unwrap();
        sup = sup.max((m - oracle).abs());
    }
    let scale = means.iter().fold(0.0_f64, |a, m| a.max(m.abs()));
    ensure(sup <= 0.03 * scale, format!("sup error {sup:.4e} vs scale {scale:.4}"))?;
    let residual = |n: usize| {
        let values: Vec<f64> = (0..=n)
            .map(|i| uniform_solution_mean(i as f64 / n as f64, horizon, k, 1.0).unwrap())
            .collect();
        ode_residual(&values, horizon, k, 1.0).unwrap()
    };
    let (r32, r64, r128) = (residual(32), residual(64), residual(128));
    let (q1, q2) = (r32 / r64, r64 / r128);
    ensure(
        (q1 - 4.0).abs() < 0.3 && (q2 - 4.0).abs() < 0.3,
        format!("residual ratios {q1:.3}, {q2:.3}"),
    )?;
    Ok(format!("relative sup error {:.2e}, residual ratios {q1:.2}/{q2:.2}", sup / scale))
}

fn classification_table() -> Check {
    let multiple = uniform_z0_square_integrable(FRAC_PI_2, FRAC_PI_2, |s| 1.0 / (FRAC_PI_2 - s).cos());
    let none = uniform_z0_square_integrable(FRAC_PI_2, FRAC_PI_2, |s| 1.0 / (FRAC_PI_2 - s).cos().powi(2));
    let rows = [
        ("dirac T=0.5 K=1", classify_dirac(0.5, 1.0, 3.0), Verdict::Unique, "a"),
        ("dirac T=1 K=1 mean=1", classify_dirac(1.0, 1.0, 1.0), Verdict::NoSolution, "b"),
        ("dirac T=1 K=1 mean=0", classify_dirac(1.0, 1.0, 0.0), Verdict::MultipleSolutions, "c"),
        ("uniform K=-1 T=1", classify_uniform(1.0, -1.0, 1.0, false), Verdict::Unique, "1"),
        (
            "uniform 1/cos",
            classify_uniform(FRAC_PI_2, FRAC_PI_2, 0.0, multiple),
            Verdict::MultipleSolutions,
            "2c-ii",
        ),
        (
            "uniform 1/cos^2",
            classify_uniform(FRAC_PI_2, FRAC_PI_2, 0.0, none),
            Verdict::NoSolution,
            "2c-i",
        ),
    ];
    for (name, got, verdict, case) in rows {
        let got = got.map_err(|e| format!("{name}: {e}"))?;
        ensure(
            got.verdict == verdict && got.case == case,
            format!("{name}: got {:?}/{}", got.verdict, got.case),
        )?;
    }
    Ok("6 rows match".into())
}

fn martingale_pipeline() -> Check {
    let mut config = SolverConfig::new(64, 10_000, 2024);
    config.basis_degree = 3;
    let (solution, _) = solve(
        1.0,
        &config,
        &GeneratorSpec::zero(),
        &TerminalFamily::FunctionalOfWT(vec![0.0, 1.0]),
        &DelayMeasure::Dirac(-1.0),
        false,
    )
    .map_err(|e| e.to_string())?;
    let ensemble = solution.ensemble();
    let mut sq = 0.0;
    for p in 0..ensemble.n_paths() {
        let w = ensemble.path(p);
        sq += (0..=64).map(|i| (solution.y.path(p)[i] - w[i]).powi(2)).sum::<f64>();
    }
    let rmse = (sq / (ensemble.n_paths() * 65) as f64).sqrt();
    ensure(rmse <= 0.05, format!("rmse {rmse}"))?;
    let mut worst = 0.0_f64;
    for i in 0..64 {
        let row = (i..64).map(|j| solution.z.node_mean(i, j)).sum::<f64>() / (64 - i) as f64;
        worst = worst.max((row - 1.0).abs());
    }
    ensure(worst <= 0.05, format!("worst row mean Z deviation {worst}"))?;
    Ok(format!("rmse {rmse:.2e}, worst row |mean Z - 1| {worst:.2e}"))
}

fn geometric_decay() -> Check {
    let mut config = SolverConfig::new(32, 64, 3);
    config.tolerance = Some(1e-24);
    config.max_iterations = 40;
    let (_, diag) = solve(
        0.05,
        &config,
        &GeneratorSpec::dirac_linear_y(1.0),
        &TerminalFamily::Constant(1.0),
        &DelayMeasure::Dirac(-0.05),
        false,
    )
    .map_err(|e| e.to_string())?;
    ensure(diag.distances.len() >= 5, format!("only {} iterations", diag.distances.len()))?;
    let summary = convergence_ratios(&diag).map_err(|e| e.to_string())?;
    let (max_ratio, rate) = (summary.max_ratio.unwrap_or(f64::NAN), summary.rate.unwrap_or(f64::NAN));
    ensure(max_ratio <= 0.65, format!("max ratio {max_ratio}"))?;
    ensure(rate <= 0.60, format!("rate {rate}"))?;
    Ok(format!("{} iterations, max ratio {max_ratio:.4}, rate {rate:.4}", diag.distances.len()))
}

fn extension_conventions() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let grid = TimeGrid::new(1.0, 32).unwrap();
    let y = YPath::from_fn(grid, |t| 2.0 + t.sin());
    let z = DenseZSurface::from_fn(grid, |t, s| 1.0 + t + s * s);
    let generators = [
        GeneratorSpec::zero(),
        GeneratorSpec::dirac_linear_y(1.5),
        GeneratorSpec::uniform_linear_y(-0.7),
        GeneratorSpec::linear_delayed_z(2.0),
    ];
    let measure = DelayMeasure::Uniform(-0.5, 0.0).snap(&grid).unwrap();
    for n in 0..1000 {
        let neg = -rng.random_range(1e-9..1.0);
        let any = rng.random_range(-1.0..=1.0);
        ensure(y.extend(neg).unwrap() == y.anchor(), format!("probe {n}: Y extension"))?;
        ensure(
            z.extend(neg, any).unwrap() == 0.0 && z.extend(any, neg).unwrap() == 0.0,
            format!("probe {n}: Z extension"),
        )?;
        for f in &generators {
            let a = f.evaluate(&measure, neg, any.abs(), &y, &z).unwrap();
            let b = f.evaluate(&measure, any.abs(), neg, &y, &z).unwrap();
            ensure(a == 0.0 && b == 0.0, format!("probe {n}: {:?} nonzero", f.builtin()))?;
        }
    }
    Ok("1000 probes".into())
}

fn random_measure(rng: &mut ChaCha8Rng, horizon: f64, variant: usize) -> DelayMeasure {
    match variant {
        0 => DelayMeasure::dirac(-rng.random_range(0.0..=horizon)).unwrap(),
        1 => {
            let a = -rng.random_range(0.01..=horizon);
            let b = rng.random_range(a..0.0);
            DelayMeasure::uniform(a, b).unwrap()
        }
        _ => {
            let n = rng.random_range(1..6);
            let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = raw.iter().sum();
            DelayMeasure::atoms(raw.iter().map(|w| (-rng.random_range(0.0..=horizon), w / total)).collect()).unwrap()
        }
    }
}

fn simpson_exp_moment(measure: &DelayMeasure, beta: f64) -> f64 {
    match measure {
        DelayMeasure::Dirac(u) => (-beta * u).exp(),
        DelayMeasure::Uniform(a, b) => {
            let panels = 2000;
            let h = (b - a) / (2 * panels) as f64;
            let f = |u: f64| (-beta * u).exp();
            let mut acc = f(*a) + f(*b);
            for k in 1..2 * panels {
                acc += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
            }
            acc * h / 3.0 / (b - a)
        }
        DelayMeasure::Atoms(atoms) => atoms.iter().map(|(u, w)| w * (-beta * u).exp()).sum(),
    }
}

fn measure_axioms() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let grid = TimeGrid::new(1.0, 200).unwrap();
    let mut worst = 0.0_f64;
    for variant in 0..3 {
        for _ in 0..20 {
            let measure = random_measure(&mut rng, 1.0, variant);
            let snapped = measure.snap(&grid).unwrap();
            ensure((snapped.total_mass() - 1.0).abs() < 1e-12, format!("{measure:?}: mass"))?;
            let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let f = |k: isize| (k as f64 * 0.1).cos();
            let g = |k: isize| k as f64 * k as f64;
            let lhs = snapped.expect(|k| a * f(k) + b * g(k));
            let rhs = a * snapped.expect(f) + b * snapped.expect(g);
            ensure((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), format!("{measure:?}: linearity"))?;
            for beta in [0.0, 0.5, 1.0, 3.0] {
                let err = (measure.exp_moment(beta) - simpson_exp_moment(&measure, beta)).abs();
                worst = worst.max(err);
                ensure(err <= 1e-6, format!("{measure:?} beta={beta}: error {err}"))?;
            }
        }
    }
    Ok(format!("60 measures, worst exp-moment error {worst:.2e}"))
}

fn regularity() -> Check {
    let cfg = RegularityConfig {
        order: 2.0,
        lags: vec![1, 2, 4, 8, 16, 32, 64],
        gamma: 0.5,
    };
    let (brownian, _) = solve(
        1.0,
        &SolverConfig::new(256, 10_000, 99),
        &GeneratorSpec::zero(),
        &TerminalFamily::FunctionalOfWT(vec![0.0, 1.0]),
        &DelayMeasure::Dirac(-1.0),
        false,
    )
    .map_err(|e| e.to_string())?;
    let rough = holder_fit(&increment_moments(&brownian.y, &cfg).unwrap()).map_err(|e| e.to_string())?;
    ensure((0.40..=0.60).contains(&rough.exponent), format!("brownian exponent {}", rough.exponent))?;
    let (dirac, _) = solve(
        0.5,
        &SolverConfig::new(256, 100, 1),
        &GeneratorSpec::dirac_linear_y(1.0),
        &TerminalFamily::Constant(1.0),
        &DelayMeasure::Dirac(-0.5),
        true,
    )
    .map_err(|e| e.to_string())?;
    let smooth = holder_fit(&increment_moments(&dirac.y, &cfg).unwrap()).map_err(|e| e.to_string())?;
    ensure(smooth.exponent >= 0.9, format!("dirac exponent {}", smooth.exponent))?;
    Ok(format!("brownian {:.4}, dirac {:.4}", rough.exponent, smooth.exponent))
}

fn determinism() -> Check {
    let config = ExperimentConfig::from_json(
        r#"{"problem": {"horizon": 0.2, "generator": {"dirac_linear_y": 0.3},
            "measure": {"uniform": [-0.1, 0.0]}, "terminal": {"functional_of_wt": [0.5, 1.0, 0.25]}},
            "solver": {"n_steps": 32, "n_paths": 2000, "seed": 11}}"#,
    )
    .map_err(|e| e.to_string())?;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let opts = RunOptions {
            out: Some(dir.path().to_owned()),
            format: Some(Format::Csv),
            override_contraction: false,
        };
        let outcome = run_solve(&config, &opts).map_err(|e| e.to_string())?;
        ensure(outcome.code == 0, format!("exit code {}", outcome.code))?;
    }
    let mut compared = 0;
    for name in ["solution.csv", "iterations.csv"] {
        let a = std::fs::read(dirs[0].path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(name)).map_err(|e| e.to_string())?;
        ensure(a == b, format!("{name} differs"))?;
        compared += a.len();
    }
    Ok(format!("{compared} CSV bytes identical"))
}

fn main() {
    let criteria: [(&str, Criterion); 10] = [
        ("contraction arithmetic", contraction_arithmetic),
        ("dirac oracle equivalence", dirac_oracle),
        ("uniform oracle equivalence", uniform_oracle),
        ("classification truth table", classification_table),
        ("martingale representation", martingale_pipeline),
        ("geometric picard decay", geometric_decay),
        ("extension conventions", extension_conventions),
        ("measure axioms", measure_axioms),
        ("regularity exponents", regularity),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} ({secs:.1}s)", n + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail} ({secs:.1}s)", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
