use std::io::Write;
use std::path::PathBuf;
use std::process;

use bsvie_cli::{
    exit, run_classify, run_contraction, run_convergence, run_oracle_compare, run_regularity, run_solve, ClassifyArgs,
    CliError, ContractionArgs, Example, ExperimentConfig, Format, Outcome, RunOptions,
};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bsvie", version, about = "Picard/regression solver for BSVIEs with delayed generators")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Iterate even when the contraction condition fails.
    #[arg(long, global = true)]
    override_contraction: bool,

    /// Output directory (default: output.directory or ./bsvie-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Write tables in a single format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem.
    Solve,
    /// Well-posedness verdict for the closed-form examples.
    Classify(ClassifyFlags),
    /// Compare solver means with the closed-form oracle.
    OracleCompare,
    /// Picard distance decay.
    Convergence,
    /// Increment-moment scaling of the solved Y.
    Regularity,
    /// Evaluate the contraction constant.
    Contraction(ContractionFlags),
}

#[derive(Args)]
struct ClassifyFlags {
    #[arg(long, value_enum)]
    example: Option<Example>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    k: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mean: Option<f64>,
    #[arg(long)]
    z0_square_integrable: bool,
}

#[derive(Args)]
struct ContractionFlags {
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Usage("--config is required for this subcommand".into()))?;
    ExperimentConfig::load(path)
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let opts = RunOptions {
        out: cli.out.clone(),
        format: cli.format,
        override_contraction: cli.override_contraction,
    };
    match &cli.command {
        Command::Solve => run_solve(&load(cli)?, &opts),
        Command::OracleCompare => run_oracle_compare(&load(cli)?, &opts),
        Command::Convergence => run_convergence(&load(cli)?, &opts),
        Command::Regularity => run_regularity(&load(cli)?, &opts),
        Command::Classify(f) => {
            let args = match (f.example, f.horizon, f.k, f.mean) {
                (Some(example), Some(horizon), Some(k), Some(mean)) => ClassifyArgs {
                    example,
                    horizon,
                    k,
                    mean,
                    z0_square_integrable: f.z0_square_integrable,
                },
                (None, None, None, None) => ClassifyArgs::from_config(&load(cli)?)?,
                _ => {
                    return Err(CliError::Usage(
                        "classify needs all of --example, --horizon, --k, --mean, or --config".into(),
                    ))
                }
            };
            run_classify(&args)
        }
        Command::Contraction(f) => {
            let args = match (f.horizon, f.k) {
                (Some(horizon), Some(k)) => ContractionArgs {
                    horizon,
                    k,
                    gamma: f.gamma,
                },
                (None, None) => {
                    let config = load(cli)?;
                    let spec = bsvie_core::GeneratorSpec::from(config.problem.generator);
                    ContractionArgs {
                        horizon: config.problem.horizon,
                        k: spec.lipschitz(),
                        gamma: (!spec.depends_on_y()).then(|| config.problem.measure.support_radius()),
                    }
                }
                _ => return Err(CliError::Usage("contraction needs --horizon and --k, or --config".into())),
            };
            run_contraction(&args)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(outcome) => {
            let text = serde_json::to_string_pretty(&outcome.summary).expect("summary serializes");
            let _ = writeln!(std::io::stdout(), "{text}");
            outcome.code
        }
        Err(e) => {
            eprintln!("bsvie: {e}");
            e.exit_code()
        }
    };
    if code != exit::SUCCESS {
        log::info!("exiting with status {code}");
    }
    process::exit(code);
}
