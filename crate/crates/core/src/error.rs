//! Crate-wide error type with machine-readable categories.
//!
//! The CLI maps categories onto exit codes: input/format problems exit 2,
//! degenerate frames exit 3, non-convergence under `--strict` exits 4.

/// Result alias used throughout the crate.
pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter is outside its documented domain (e.g. `lo >= hi`).
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A file does not follow its documented format.
    #[error("{path}: {detail}")]
    Format { path: String, detail: String },

    /// Inputs that must agree (shapes, rects, calibration) do not.
    #[error("input mismatch: {0}")]
    InputMismatch(String),

    /// Too little or degenerate data for the operation (e.g. collinear
    /// interpolation samples).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// No usable radar sample overlaps the monocular depth map.
    #[error("alignment unavailable: {0}")]
    AlignmentUnavailable(String),

    /// An objective's evaluation domain is empty (no radar/mono overlap).
    #[error("empty overlap: {0}")]
    EmptyOverlap(String),

    /// The dense scale solver has no observed pixel to anchor on.
    #[error("solver unavailable: {0}")]
    SolverUnavailable(String),

    /// A numeric routine hit a non-finite value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// Score/metric/loss has an empty evaluation domain.
    #[error("undefined score: {0}")]
    UndefinedScore(String),
    #[error("undefined metrics: {0}")]
    UndefinedMetrics(String),
    #[error("undefined loss: {0}")]
    UndefinedLoss(String),

    /// Scene description cannot produce a full frame.
    #[error("degenerate scene: {0}")]
    DegenerateScene(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn format(path: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable category slug, emitted on the CLI error stream.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Format { .. } => "format",
            Error::InputMismatch(_) => "input-mismatch",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::AlignmentUnavailable(_) => "alignment-unavailable",
            Error::EmptyOverlap(_) => "empty-overlap",
            Error::SolverUnavailable(_) => "solver-unavailable",
            Error::Numeric(_) => "numeric",
            Error::UndefinedScore(_) => "undefined-score",
            Error::UndefinedMetrics(_) => "undefined-metrics",
            Error::UndefinedLoss(_) => "undefined-loss",
            Error::DegenerateScene(_) => "degenerate-scene",
            Error::Io { .. } => "io",
        }
    }

    /// Process exit code the CLI uses for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_)
            | Error::Format { .. }
            | Error::InputMismatch(_)
            | Error::Numeric(_)
            | Error::Io { .. } => 2,
            Error::DegenerateInput(_)
            | Error::AlignmentUnavailable(_)
            | Error::EmptyOverlap(_)
            | Error::SolverUnavailable(_)
            | Error::UndefinedScore(_)
            | Error::UndefinedMetrics(_)
            | Error::UndefinedLoss(_)
            | Error::DegenerateScene(_) => 3,
        }
    }
}
