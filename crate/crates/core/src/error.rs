use thiserror::Error;

/// Errors raised by the simulation, filtering and estimation routines.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("time {t} is outside the admissible range [0, {horizon})")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("non-finite drift at t = {t} for state {state:?}")]
    NonFiniteDrift { t: f64, state: Vec<f64> },

    #[error("step at t = {t} too coarse for the bridge drift (f dt = {ratio}); refine the grid or enlarge epsilon")]
    UnstableStep { t: f64, ratio: f64 },

    #[error("label {label} of attribute `{attribute}` has empty support")]
    EmptySupport { attribute: String, label: u32 },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("all hypotheses have zero posterior mass at step {step}")]
    DegeneratePosterior { step: usize },

    #[error("kushner update left no positive mass")]
    SimplexCollapse,

    #[error("particle weights collapsed (ESS < 2) at t = {t}")]
    WeightCollapse { t: f64 },

    #[error("quantization too coarse: {occupied} occupied cells for {samples} samples")]
    QuantizationOccupancy { occupied: usize, samples: usize },

    #[error("non-finite value in column `{column}` of {table}")]
    NonFiniteOutput { table: String, column: String },

    #[error("empty histogram")]
    EmptyHistogram,
}

pub type Result<T> = std::result::Result<T, Error>;
