use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("matrix is not positive definite (pivot {pivot})")]
    Decomposition { pivot: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("inference failed: {0}")]
    Inference(String),

    #[error("simulation failed at step {step}: {reason}")]
    Simulation { step: usize, reason: String },

    #[error("ingestion failed at index {index}: {reason}")]
    Ingestion { index: usize, reason: String },

    #[error("preprocessing failed at index {index}: {reason}")]
    Preprocessing { index: usize, reason: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("unsupported format version {found} (this build reads version {supported})")]
    Version { found: i64, supported: i64 },

    #[error("fit failed on every restart: {}", .0.join("; "))]
    Fit(Vec<String>),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable code, printed as the prefix of CLI error lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Config(_) => "E_CONFIG",
            Error::Decomposition { .. } => "E_DECOMPOSITION",
            Error::Numerical(_) => "E_NUMERICAL",
            Error::Inference(_) => "E_INFERENCE",
            Error::Simulation { .. } => "E_SIMULATION",
            Error::Ingestion { .. } => "E_INGESTION",
            Error::Preprocessing { .. } => "E_PREPROCESS",
            Error::Usage(_) => "E_USAGE",
            Error::Parse(_) => "E_PARSE",
            Error::Version { .. } => "E_VERSION",
            Error::Fit(_) => "E_FIT",
            Error::Io(_) => "E_IO",
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
