use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("parse error{}: {message}", location(.line, .field))]
    Parse {
        line: Option<usize>,
        field: Option<String>,
        message: String,
    },

    #[error("classifier is trivial: no two points receive different labels")]
    TrivialClassifier,

    #[error("encoding unsupported: {0}")]
    EncodingUnsupported(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("solver bridge error: {0}")]
    Bridge(String),

    #[error("adversarial example equals the instance; no feature changed")]
    EmptyChange,

    #[error("enumeration too large: {0}")]
    TooLarge(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The oracle ran out of resources; the question is still open.
    #[error("undecided: {0}")]
    Undecided(String),

    #[error("witness failed verification: {0}")]
    Verification(String),

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location(line: &Option<usize>, field: &Option<String>) -> String {
    match (line, field) {
        (Some(l), Some(f)) => format!(" at line {l}, field `{f}`"),
        (Some(l), None) => format!(" at line {l}"),
        (None, Some(f)) => format!(" in field `{f}`"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line: None,
            field: Some(field.into()),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
