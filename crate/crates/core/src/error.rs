use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph spec: {0}")]
    InvalidSpec(String),
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("invalid bracket: {0}")]
    InvalidBracket(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("enumeration cap exceeded: {edges} edges > cap {cap}")]
    CapExceeded { edges: usize, cap: usize },
    #[error("no certificate: {0}")]
    NoCertificate(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit status: 2 for bad input, 3 for a refusal or failure at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidSpec(_)
            | Error::InvalidWindow(_)
            | Error::InvalidBracket(_)
            | Error::InvalidArgument(_)
            | Error::Json(_) => 2,
            Error::CapExceeded { .. } | Error::NoCertificate(_) | Error::Io(_) => 3,
        }
    }
}
