use thiserror::Error;

/// Failure categories shared by every module.
///
/// The CLI maps each category onto a stable process exit code
/// (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at {locus}: {message}")]
    Parse { locus: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("saturation error: {0}")]
    Saturation(String),

    #[error("enumeration cap exceeded: an estimated {estimate:.3e} configurations exceeds the cap of {cap}")]
    EnumerationCap { estimate: f64, cap: u64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::Usage(_) => 2,
            Error::Domain(_) | Error::Solver(_) => 3,
            Error::Saturation(_) => 4,
            Error::EnumerationCap { .. } => 5,
            Error::Io(_) => 1,
        }
    }

    /// Short machine-readable tag, printed by the CLI alongside the message.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Usage(_) => "usage",
            Error::Domain(_) => "domain",
            Error::Solver(_) => "solver",
            Error::Saturation(_) => "saturation",
            Error::EnumerationCap { .. } => "enumeration_cap",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
