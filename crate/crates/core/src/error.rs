use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain of the model or function.
    #[error("domain: {0}")]
    Domain(String),

    /// A series or iteration stopped before reaching its tolerance.
    #[error("not converged: {what} (partial {partial:e}, error estimate {abs_error:e}, {terms} terms)")]
    NotConverged {
        what: String,
        partial: f64,
        abs_error: f64,
        terms: usize,
    },

    /// A derivative-order or truncation cap was exceeded.
    #[error("cap exceeded: {what} needs order {needed} but the cap is {cap}")]
    CapExceeded {
        what: String,
        needed: usize,
        cap: usize,
    },

    /// The requested operation has no meaning for this configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse: {0}")]
    Parse(String),

    /// Malformed command-line flags or specs.
    #[error("usage: {0}")]
    Usage(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used by the command-line error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Domain(_) => "domain",
            Error::NotConverged { .. } => "not-converged",
            Error::CapExceeded { .. } => "cap-exceeded",
            Error::Unsupported(_) => "unsupported",
            Error::Parse(_) => "parse",
            Error::Usage(_) => "usage",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
