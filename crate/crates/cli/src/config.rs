//! Experiment configuration files.
//!
//! A configuration is a single JSON document:
//!
//! ```json
//! {
//!   "problem": {
//!     "horizon": 0.5,
//!     "generator": {"dirac_linear_y": 1.0},
//!     "measure": {"dirac": -0.5},
//!     "terminal": {"constant": 1.0}
//!   },
//!   "solver": {"n_steps": 128, "n_paths": 200, "seed": 7},
//!   "output": {"directory": "out", "formats": ["csv", "json"]}
//! }
//! ```

use std::path::{Path, PathBuf};

use bsvie_core::{BuiltinGenerator, DelayMeasure, RegularityConfig, SolverConfig, TerminalFamily};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub horizon: f64,
    pub generator: BuiltinGenerator,
    pub measure: DelayMeasure,
    pub terminal: TerminalFamily,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: None,
            formats: default_formats(),
        }
    }
}

fn default_max_abs_error() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Largest tolerated `|solver mean - oracle mean|` over the grid.
    #[serde(default = "default_max_abs_error")]
    pub max_abs_error: f64,
    /// Declared square-integrability of `cos(β(T-s)) Z(0,s)` for the boundary
    /// case of the uniform example.
    #[serde(default)]
    pub z0_square_integrable: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            max_abs_error: default_max_abs_error(),
            z0_square_integrable: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub regularity: Option<RegularityConfig>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let config: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let problem = &self.problem;
        bsvie_core::TimeGrid::new(problem.horizon, self.solver.n_steps)?;
        problem.measure.validate(problem.horizon)?;
        problem.terminal.validate()?;
        self.solver.validate()?;
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats must name at least one format".into()));
        }
        if let Some(r) = &self.regularity {
            r.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
