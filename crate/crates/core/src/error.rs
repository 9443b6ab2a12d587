use thiserror::Error;

#[derive(Debug, Error)]
pub enum LrnError {
    #[error("invalid pixel ({u}, {v})")]
    InvalidPixel { u: f64, v: f64 },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("bin layout mismatch: {0} vs {1} bins")]
    LayoutMismatch(usize, usize),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("pose ({x:.2}, {y:.2}) is outside the world")]
    PoseOutOfWorld { x: f64, y: f64 },

    #[error("planning failed: {0}")]
    PlanningFailure(String),

    #[error("no path between the requested cells")]
    NoPath,

    #[error("unsatisfiable world parameters: {0}")]
    Unsatisfiable(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("degenerate regression: {0}")]
    Degenerate(&'static str),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LrnError>;
