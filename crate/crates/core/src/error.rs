use std::fmt;

use thiserror::Error;

/// A single broken model invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelViolation {
    /// `sigma[state]` is not strictly positive (or not finite).
    NonPositiveSigma { state: usize, value: f64 },
    /// Generator row does not sum to zero.
    BadGeneratorRow { row: usize, residual: f64 },
    /// Off-diagonal generator entry is negative.
    NegativeOffDiagonal { row: usize, col: usize, value: f64 },
    /// Diagonal generator entry is positive.
    PositiveDiagonal { row: usize, value: f64 },
    /// Vector or matrix dimensions disagree with the number of states.
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    /// Horizon is not strictly positive.
    NonPositiveHorizon { value: f64 },
    /// A drift entry is NaN or infinite.
    NonFiniteDrift { state: usize },
}

impl fmt::Display for ModelViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelViolation::NonPositiveSigma { state, value } => {
                write!(f, "NonPositiveSigma: sigma[{state}] = {value}")
            }
            ModelViolation::BadGeneratorRow { row, residual } => {
                write!(f, "BadGeneratorRow: row {row} sums to {residual:e}")
            }
            ModelViolation::NegativeOffDiagonal { row, col, value } => {
                write!(f, "NegativeOffDiagonal: q[{row}][{col}] = {value}")
            }
            ModelViolation::PositiveDiagonal { row, value } => {
                write!(f, "PositiveDiagonal: q[{row}][{row}] = {value}")
            }
            ModelViolation::DimensionMismatch { what, expected, found } => {
                write!(f, "DimensionMismatch: {what} has {found} entries, expected {expected}")
            }
            ModelViolation::NonPositiveHorizon { value } => {
                write!(f, "NonPositiveHorizon: T = {value}")
            }
            ModelViolation::NonFiniteDrift { state } => write!(f, "NonFiniteDrift: mu[{state}]"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {}", join(.0))]
    InvalidModel(Vec<ModelViolation>),

    #[error("non-positive time r = {0}")]
    NonPositiveTime(f64),

    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("interpolation out of range: log-ratio {0} < 0")]
    InterpolationOutOfRange(f64),

    #[error("value {v} exceeds G {g} beyond tolerance at t = {t}, a = {a}, state {state}")]
    DominanceViolation { t: f64, a: f64, state: usize, v: f64, g: f64 },

    #[error("empty stopping set at t = {t}, state {state}: a_max is too small, raise grid.a_max")]
    EmptyStopSet { t: f64, state: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn join(v: &[ModelViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
