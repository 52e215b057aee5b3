use std::process::ExitCode;

use novelsum_core::analysis::AnalysisError;
use novelsum_core::geometry::GeometryError;
use novelsum_core::novelsum::NovelSumError;
use novelsum_core::selection::SelectionError;
use novelsum_core::simulation::SimulationError;
use novelsum_core::{DatasetError, MetricError};
use thiserror::Error;

/// CLI failure, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable or invalid input files. Exit 2.
    #[error("{0}")]
    Input(String),
    /// The computation itself failed on valid input. Exit 3.
    #[error("{0}")]
    Numeric(String),
    /// A threshold-based selection ran out of candidates; the partial result was written. Exit 4.
    #[error("{0}")]
    Exhausted(String),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Exhausted(_) => 4,
        })
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::EigenFailure(_) | MetricError::NegativeEigenvalue(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<NovelSumError> for CliError {
    fn from(e: NovelSumError) -> Self {
        match e {
            NovelSumError::ProfileMismatch(_) | NovelSumError::NonSquare { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SelectionError> for CliError {
    fn from(e: SelectionError) -> Self {
        match e {
            SelectionError::ThresholdExhausted { .. } => CliError::Exhausted(e.to_string()),
            SelectionError::Metric(m) => m.into(),
            SelectionError::NovelSum(n) => n.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<SimulationError> for CliError {
    fn from(e: SimulationError) -> Self {
        match e {
            SimulationError::Metric(m) => m.into(),
            SimulationError::NovelSum(n) => n.into(),
            SimulationError::Selection(s) => s.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::DegenerateVariance | AnalysisError::NonFiniteInput => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}
