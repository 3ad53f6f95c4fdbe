use thiserror::Error;

/// Errors produced by the library and the command-line front end.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite matrix")]
    NonFiniteMatrix,

    #[error("matrix is not symmetric (|a[{i},{j}] - a[{j},{i}]| = {gap:e})")]
    NotSymmetric { i: usize, j: usize, gap: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate response")]
    DegenerateResponse,

    #[error("profile not admissible at y = {y}")]
    ProfileNotAdmissible { y: f64 },

    #[error("Γ unidentified: ν vanishes on sample")]
    Unidentified,

    #[error("degenerate scale")]
    DegenerateScale,

    #[error("frame is not semiorthogonal (max |ΓᵀΓ - I| = {0:e})")]
    NotSemiorthogonal(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("plot supports d=1 only")]
    PlotDimension,

    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    /// Process exit code: 2 for I/O and malformed input files, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse { .. } => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
