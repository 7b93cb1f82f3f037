use thiserror::Error;

use crate::solver::ContractionReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("generator evaluation failed: {0}")]
    Evaluation(String),

    /// The configuration is outside the classification the closed-form examples cover.
    #[error("unclassified configuration: {0}")]
    Unclassified(String),

    #[error(
        "refusing to iterate: contraction constant {:.6} >= 1 and no small-delay bound applies",
        .0.constant
    )]
    Refused(ContractionReport),
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
