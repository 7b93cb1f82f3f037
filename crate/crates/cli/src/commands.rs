use std::path::PathBuf;

use bsvie_core::oracle::{
    classify_dirac, classify_uniform, dirac_solution_mean, uniform_solution_mean, Verdict, WellPosednessVerdict,
};
use bsvie_core::regularity::{holder_fit, increment_moments};
use bsvie_core::solver::convergence_ratios;
use bsvie_core::{
    contraction_constant, small_delay_bound, solve, BuiltinGenerator, ContractionReport, DelayMeasure, Error,
    GeneratorSpec, IterationDiagnostics, RegularityConfig, SolutionEstimate, TerminalFamily,
};
use serde_json::json;

use crate::config::{ExperimentConfig, OracleConfig};
use crate::output::{ArtifactWriter, Cell, Table};
use crate::{exit, CliError, Outcome, RunOptions};

const DEFAULT_OUT: &str = "bsvie-out";

fn writer(command: &str, config: &ExperimentConfig, opts: &RunOptions) -> Result<ArtifactWriter, CliError> {
    let directory = opts
        .out
        .clone()
        .or_else(|| config.output.directory.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let formats = opts.format.map_or_else(|| config.output.formats.clone(), |f| vec![f]);
    let mut w = ArtifactWriter::create(&directory, &formats)?;
    w.manifest(command, config)?;
    Ok(w)
}

fn finish(code: i32, summary: serde_json::Value, mut w: ArtifactWriter) -> Result<Outcome, CliError> {
    w.record("summary", &summary)?;
    Ok(Outcome {
        code,
        summary,
        artifacts: w.written().to_vec(),
    })
}

type Solved = (SolutionEstimate, IterationDiagnostics);

/// Runs the solver; a refusal is returned as `Err(report)` so callers can
/// still write artifacts.
fn run_solver(config: &ExperimentConfig, override_contraction: bool) -> Result<Result<Solved, ContractionReport>, CliError> {
    let p = &config.problem;
    match solve(
        p.horizon,
        &config.solver,
        &GeneratorSpec::from(p.generator),
        &p.terminal,
        &p.measure,
        override_contraction,
    ) {
        Ok(solved) => Ok(Ok(solved)),
        Err(Error::Refused(report)) => Ok(Err(report)),
        Err(e) => Err(e.into()),
    }
}

fn assess(config: &ExperimentConfig) -> ContractionReport {
    let p = &config.problem;
    ContractionReport::assess(p.horizon, &GeneratorSpec::from(p.generator), &p.measure)
}

fn refusal(report: &ContractionReport, w: ArtifactWriter) -> Result<Outcome, CliError> {
    log::warn!("contraction constant {:.6} >= 1; pass --override-contraction to iterate anyway", report.constant);
    finish(exit::REFUSED, json!({"status": "refused", "contraction": report}), w)
}

fn iteration_table(diag: &IterationDiagnostics) -> Table {
    let mut t = Table::new(vec!["iteration", "distance", "ratio"]);
    for (n, d) in diag.distances.iter().enumerate() {
        let ratio = (n > 0 && diag.distances[n - 1] > 0.0 && *d > 0.0).then(|| d / diag.distances[n - 1]);
        t.push(vec![Cell::Int(n as u64), Cell::Float(*d), ratio.into()]);
    }
    t
}

fn status_code(diag: &IterationDiagnostics) -> i32 {
    if diag.converged {
        exit::SUCCESS
    } else {
        exit::NOT_CONVERGED
    }
}

/// Solves the configured problem and writes per-node summaries.
///
/// Artifacts: `solution` (t, y_mean, y_stderr, z_row_norm), `iterations`
/// (iteration, distance, ratio), `contraction.json`, `diagnostics.json`.
pub fn run_solve(config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let mut w = writer("solve", config, opts)?;
    let report = assess(config);
    w.record("contraction", &report)?;
    let (solution, diag) = match run_solver(config, opts.override_contraction)? {
        Ok(solved) => solved,
        Err(report) => return refusal(&report, w),
    };
    let grid = *solution.grid();
    let (means, errors) = (solution.y_means(), solution.y_standard_errors());
    let mut table = Table::new(vec!["t", "y_mean", "y_stderr", "z_row_norm"]);
    for i in 0..grid.n_nodes() {
        table.push(vec![
            Cell::Float(grid.time(i as isize)),
            Cell::Float(means[i]),
            Cell::Float(errors[i]),
            Cell::Float(solution.z.row_norm(i)),
        ]);
    }
    w.table("solution", &table)?;
    w.table("iterations", &iteration_table(&diag))?;
    w.record("diagnostics", &diag)?;
    let summary = json!({
        "status": if diag.converged { "converged" } else { "not_converged" },
        "iterations": diag.iterations,
        "y0_mean": means[0],
        "y0_stderr": errors[0],
        "contraction": report,
    });
    finish(status_code(&diag), summary, w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Example {
    Dirac,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyArgs {
    pub example: Example,
    pub horizon: f64,
    pub k: f64,
    /// `E ψ(0)` for the Dirac example, `E φ(0)` for the uniform example.
    pub mean: f64,
    pub z0_square_integrable: bool,
}

impl ClassifyArgs {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self, CliError> {
        let p = &config.problem;
        let (example, k) = match p.generator {
            BuiltinGenerator::Zero => (Example::Dirac, 0.0),
            BuiltinGenerator::DiracLinearY(k) => (Example::Dirac, k),
            BuiltinGenerator::UniformLinearY(k) => (Example::Uniform, k),
            BuiltinGenerator::LinearDelayedZ(_) => {
                return Err(CliError::Config("no closed-form classification for linear_delayed_z".into()))
            }
        };
        match (example, &p.measure) {
            (_, _) if k == 0.0 => {}
            (Example::Dirac, DelayMeasure::Dirac(u)) if (u + p.horizon).abs() <= 1e-12 => {}
            (Example::Uniform, DelayMeasure::Uniform(a, b)) if (a + p.horizon).abs() <= 1e-12 && *b == 0.0 => {}
            _ => {
                return Err(CliError::Config(format!(
                    "closed forms need the delay measure spanning [-T, 0] for {example:?}, got {:?}",
                    p.measure
                )))
            }
        }
        if example == Example::Uniform && !matches!(p.terminal, TerminalFamily::ExpDecay(_)) {
            return Err(CliError::Config("the uniform example needs an exp_decay terminal".into()));
        }
        Ok(ClassifyArgs {
            example,
            horizon: p.horizon,
            k,
            mean: p.terminal.mean(0.0, p.horizon),
            z0_square_integrable: config.oracle.as_ref().is_some_and(|o| o.z0_square_integrable),
        })
    }

    fn verdict(&self) -> bsvie_core::Result<WellPosednessVerdict> {
        match self.example {
            Example::Dirac => classify_dirac(self.horizon, self.k, self.mean),
            Example::Uniform => classify_uniform(self.horizon, self.k, self.mean, self.z0_square_integrable),
        }
    }
}

/// Prints the well-posedness verdict. Configurations outside the
/// classification exit with [`exit::REFUSED`].
pub fn run_classify(args: &ClassifyArgs) -> Result<Outcome, CliError> {
    let summary_base = json!({
        "example": format!("{:?}", args.example).to_lowercase(),
        "horizon": args.horizon,
        "k": args.k,
        "mean": args.mean,
    });
    let (code, summary) = match args.verdict() {
        Ok(v) => (exit::SUCCESS, json!({"input": summary_base, "verdict": v.verdict, "case": v.case})),
        Err(Error::Unclassified(msg)) => (exit::REFUSED, json!({"input": summary_base, "verdict": null, "unclassified": msg})),
        Err(e) => return Err(e.into()),
    };
    Ok(Outcome {
        code,
        summary,
        artifacts: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionArgs {
    pub horizon: f64,
    pub k: f64,
    /// Delay radius for the small-delay bound of `y`-independent generators.
    pub gamma: Option<f64>,
}

pub fn run_contraction(args: &ContractionArgs) -> Result<Outcome, CliError> {
    if !(args.horizon > 0.0 && args.k >= 0.0) {
        return Err(CliError::Usage("contraction needs T > 0 and K >= 0".into()));
    }
    let mut report = contraction_constant(args.horizon, args.k);
    report.small_delay = args.gamma.map(|g| small_delay_bound(args.k, g));
    Ok(Outcome {
        code: exit::SUCCESS,
        summary: serde_json::to_value(report).expect("report serializes"),
        artifacts: Vec::new(),
    })
}

/// Solver means against the closed-form oracle; artifact `oracle`
/// (t, solver_mean, oracle_mean, abs_error).
pub fn run_oracle_compare(config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let args = ClassifyArgs::from_config(config)?;
    let oracle_cfg = config.oracle.clone().unwrap_or_default();
    let mut w = writer("oracle-compare", config, opts)?;
    let verdict = match args.verdict() {
        Ok(v) => v,
        Err(Error::Unclassified(msg)) => {
            return finish(exit::REFUSED, json!({"status": "unclassified", "reason": msg}), w)
        }
        Err(e) => return Err(e.into()),
    };
    if verdict.verdict != Verdict::Unique {
        return finish(exit::REFUSED, json!({"status": "refused", "classification": verdict}), w);
    }
    let (solution, diag) = match run_solver(config, true)? {
        Ok(solved) => solved,
        Err(report) => return refusal(&report, w),
    };
    let p = &config.problem;
    let grid = *solution.grid();
    let means = solution.y_means();
    let mut table = Table::new(vec!["t", "solver_mean", "oracle_mean", "abs_error"]);
    let mut max_error = 0.0_f64;
    for (i, mean) in means.iter().enumerate() {
        let t = grid.time(i as isize);
        let oracle = match args.example {
            Example::Dirac => dirac_solution_mean(
                t,
                p.horizon,
                args.k,
                p.terminal.mean(t, p.horizon),
                p.terminal.mean(0.0, p.horizon),
            )?,
            Example::Uniform => uniform_solution_mean(t, p.horizon, args.k, args.mean)?,
        };
        let err = (mean - oracle).abs();
        max_error = max_error.max(err);
        table.push(vec![Cell::Float(t), Cell::Float(*mean), Cell::Float(oracle), Cell::Float(err)]);
    }
    w.table("oracle", &table)?;
    let OracleConfig { max_abs_error, .. } = oracle_cfg;
    let code = if !diag.converged {
        exit::NOT_CONVERGED
    } else if max_error > max_abs_error {
        exit::ORACLE_MISMATCH
    } else {
        exit::SUCCESS
    };
    let summary = json!({
        "status": match code { exit::SUCCESS => "match", exit::NOT_CONVERGED => "not_converged", _ => "mismatch" },
        "classification": verdict,
        "max_abs_error": max_error,
        "threshold": max_abs_error,
        "iterations": diag.iterations,
    });
    finish(code, summary, w)
}

/// Picard distances and their decay; artifact `convergence`
/// (iteration, distance, ratio).
pub fn run_convergence(config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let mut w = writer("convergence", config, opts)?;
    let report = assess(config);
    let (_, diag) = match run_solver(config, opts.override_contraction)? {
        Ok(solved) => solved,
        Err(report) => return refusal(&report, w),
    };
    w.table("convergence", &iteration_table(&diag))?;
    let (max_ratio, rate) = match convergence_ratios(&diag) {
        Ok(s) => (s.max_ratio, s.rate),
        Err(Error::InsufficientData(_)) => (None, None),
        Err(e) => return Err(e.into()),
    };
    let summary = json!({
        "status": if diag.converged { "converged" } else { "not_converged" },
        "iterations": diag.iterations,
        "max_ratio": max_ratio,
        "rate": rate,
        "contraction": report,
    });
    finish(status_code(&diag), summary, w)
}

fn default_regularity(config: &ExperimentConfig) -> RegularityConfig {
    let quarter = config.solver.n_steps / 4;
    let lags = std::iter::successors(Some(1usize), |l| Some(l * 2))
        .take_while(|l| *l <= quarter)
        .collect();
    RegularityConfig {
        order: 2.0,
        lags,
        gamma: GeneratorSpec::from(config.problem.generator).holder_exponent(),
    }
}

/// Increment-moment scaling of the solved `Y`; artifact `scaling`
/// (lag, moment, log_lag, log_moment).
pub fn run_regularity(config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    let reg = config.regularity.clone().unwrap_or_else(|| default_regularity(config));
    reg.validate()?;
    let mut w = writer("regularity", config, opts)?;
    let (solution, diag) = match run_solver(config, opts.override_contraction)? {
        Ok(solved) => solved,
        Err(report) => return refusal(&report, w),
    };
    let report = increment_moments(&solution.y, &reg)?;
    let mut table = Table::new(vec!["lag", "moment", "log_lag", "log_moment"]);
    for row in &report.rows {
        let log_moment = (row.moment > 0.0).then(|| row.moment.ln());
        table.push(vec![
            Cell::Int(row.lag as u64),
            Cell::Float(row.moment),
            Cell::Float(row.lag_time.ln()),
            log_moment.into(),
        ]);
    }
    w.table("scaling", &table)?;
    let fit = match holder_fit(&report) {
        Ok(fit) => Some(fit),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let summary = json!({
        "status": if diag.converged { "converged" } else { "not_converged" },
        "order": reg.order,
        "gamma": reg.gamma,
        "kolmogorov": reg.kolmogorov(),
        "slope": fit.map(|f| f.slope),
        "exponent": fit.map(|f| f.exponent),
    });
    finish(status_code(&diag), summary, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_printout() {
        let out = run_contraction(&ContractionArgs {
            horizon: 0.1,
            k: 0.5,
            gamma: None,
        })
        .unwrap();
        assert_eq!(out.summary["contracts"], true);
        let c = out.summary["constant"].as_f64().unwrap();
        assert!((c - 0.2 * std::f64::consts::E).abs() < 1e-12);
        assert!(run_contraction(&ContractionArgs {
            horizon: 0.0,
            k: 1.0,
            gamma: None
        })
        .is_err());
    }

    #[test]
    fn classify_wrappers() {
        let args = |example, horizon, k, mean| ClassifyArgs {
            example,
            horizon,
            k,
            mean,
            z0_square_integrable: false,
        };
        let out = run_classify(&args(Example::Dirac, 1.0, 1.0, 0.0)).unwrap();
        assert_eq!(out.summary["verdict"], "MultipleSolutions");
        assert_eq!(out.summary["case"], "c");
        let out = run_classify(&args(Example::Uniform, 1.0, -1.0, 1.0)).unwrap();
        assert_eq!(out.summary["case"], "1");
        assert_eq!(run_classify(&args(Example::Dirac, 3.0, 1.0, 0.0)).unwrap().code, exit::REFUSED);
    }

    #[test]
    fn default_lags_fit_grid() {
        let text = r#"{"problem": {"horizon": 1.0, "generator": "zero", "measure": {"dirac": -1.0},
            "terminal": {"functional_of_wt": [0.0, 1.0]}}, "solver": {"n_steps": 64, "n_paths": 100, "seed": 1}}"#;
        let config = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(default_regularity(&config).lags, vec![1, 2, 4, 8, 16]);
    }
}
