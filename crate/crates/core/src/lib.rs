//! Monte Carlo Picard solver for type-I backward stochastic Volterra integral
//! equations whose generators read delayed segments of the solution.

pub mod error;
pub mod generator;
pub mod grid;
pub mod measure;
pub mod numeric;
pub mod oracle;
pub mod regression;
pub mod regularity;
pub mod solver;
pub mod terminal;

pub use error::{Error, Result};
pub use generator::{BuiltinGenerator, GeneratorInput, GeneratorKind, GeneratorSpec, HolderEstimate};
pub use grid::{BrownianEnsemble, DenseZSurface, TimeGrid, WeightedNorms, YEnsemble, YPath, ZEnsemble, ZSurface};
pub use measure::{DelayMeasure, SnappedMeasure};
pub use oracle::{Verdict, WellPosednessVerdict};
pub use regularity::{HolderFit, RegularityConfig, ScalingReport};
pub use solver::{
    contraction_constant, small_delay_bound, solve, ContractionReport, IterationDiagnostics, SolutionEstimate,
    SolverConfig,
};
pub use terminal::TerminalFamily;
