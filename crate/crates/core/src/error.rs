use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

use crate::monitor::ViolationReport;

/// A single constraint broken by a [`ModelParams`](crate::ModelParams) value.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamViolation {
    NonFinite(&'static str),
    NegativeRate(&'static str),
    ZeroCarryingCapacity,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonFinite(name) => write!(f, "{name} is not finite"),
            Self::NegativeRate(name) => write!(f, "{name} is negative"),
            Self::ZeroCarryingCapacity => write!(f, "k_A must be strictly positive"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    InvalidParams(Vec<ParamViolation>),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid initial-condition recipe: {0}")]
    InvalidRecipe(String),

    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),

    #[error("field dimensions {found}x{found} do not match grid {expected}x{expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite value in state at t = {t}")]
    NonFiniteState { t: f64 },

    #[error("invariant tolerance exceeded at t = {t} ({} violations)", .report.violation_count)]
    ToleranceExceeded { t: f64, report: Box<ViolationReport> },

    #[error("time {t} is outside the recorded trajectory (last sample at {last})")]
    OutOfRange { t: f64, last: f64 },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("ratio helper needs positive samples, got {value} at index {index}")]
    NonPositiveF { index: usize, value: f64 },

    #[error("ratio helper needs nondecreasing samples, decrease at index {index}")]
    DecreasingF { index: usize },

    #[error("run has no recorded trajectories")]
    MissingTrajectories,

    #[error("midline x1 = L/2 is not a grid line for n = {n} (n must be odd)")]
    MidlineOffGrid { n: usize },

    #[error("{}: {message}", match .line { Some(l) => format!("line {l}"), None => "parse error".to_string() })]
    Parse { line: Option<usize>, message: String },

    #[error("I/O failure on {}: {message}", .path.display())]
    Io { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, err: impl fmt::Display) -> Self {
        Error::Io {
            path: path.into(),
            message: err.to_string(),
        }
    }

    pub(crate) fn parse(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}

fn join(v: &[ParamViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
