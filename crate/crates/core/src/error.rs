use std::io;

use thiserror::Error;

/// Errors raised anywhere in the matching engine.
#[derive(Debug, Error)]
pub enum Error {
    /// Tensor dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),
    /// A caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input data is malformed or inconsistent.
    #[error("data error: {0}")]
    Data(String),
    /// A configuration value is out of range.
    #[error("config error: {0}")]
    Config(String),
    /// A training stage failed; `index` is the position in the plan.
    #[error("stage {index} ({kind}) failed: {source}")]
    Stage {
        index: usize,
        kind: String,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

macro_rules! bail {
    ($kind:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$kind(format!($($arg)*)))
    };
}
pub(crate) use bail;
