use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The operation does not apply to this potential family.
    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("divergent integral: {0}")]
    Divergent(String),

    /// Invalid or inconsistent configuration.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unsupported parameter: {0}")]
    Unsupported(String),

    /// Particle positions became non-finite.
    #[error("simulation blew up at step {step}: {detail}")]
    BlowUp { step: u64, detail: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The explicit PDE scheme produced a negative density.
    #[error("PDE instability at step {step}: {detail}")]
    Instability { step: u64, detail: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the experiment runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) => 2,
            Error::Config(_) => 3,
            Error::Domain(_) | Error::NotApplicable(_) | Error::Unsupported(_) => 4,
            Error::Divergent(_) => 5,
            Error::BlowUp { .. } => 6,
            Error::Instability { .. } => 7,
            Error::InsufficientData(_) => 8,
            Error::Io(_) => 9,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if !e.is_io_error() {
            return Error::Parse(e.to_string());
        }
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Parse(format!("{other:?}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
