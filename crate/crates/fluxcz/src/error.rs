use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("basis underflow: level {level} moved by {shift_khz:.3} kHz when basis grew to {dim}")]
    BasisUnderflow { level: usize, shift_khz: f64, dim: usize },

    #[error("level index {index} outside converged range 0..{available}")]
    IndexOutOfRange { index: usize, available: usize },

    #[error("label assignment failed:\n{0}")]
    LabelCollision(String),

    #[error("no dressed state labeled |{}, {}, {}>", .0[0], .0[1], .0[2])]
    MissingLabel([usize; 3]),

    #[error("near-resonant denominator {what} = {value:.4e} GHz")]
    Resonance { what: String, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("truncation d = {d} cannot hold the {required} states needed")]
    TruncationTooSmall { d: usize, required: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("integrator failure: {0}")]
    Integrator(String),

    #[error("optimum on grid boundary ({axis}); widen the window and retry")]
    OptimumOnBoundary { axis: String },

    #[error("unreachable target: {0}")]
    Unreachable(String),

    #[error("phase undefined: {0}")]
    PhaseUndefined(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { field: field.to_string(), reason: reason.into() }
    }

    /// True for errors caused by user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::InvalidParameter { .. } | Error::Config(_) | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
