use thiserror::Error;

pub type Result<T> = std::result::Result<T, LsrError>;

#[derive(Debug, Error)]
pub enum LsrError {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl LsrError {
    /// Short category name used for CLI messages and FFI status mapping.
    pub fn category(&self) -> &'static str {
        match self {
            LsrError::Dimension(_) => "dimension",
            LsrError::Parameter(_) => "parameter",
            LsrError::Configuration(_) => "configuration",
            LsrError::Training(_) => "training",
            LsrError::Format(_) => "format",
            LsrError::UnknownMethod(_) => "unknown-method",
            LsrError::Io(_) | LsrError::Image(_) | LsrError::Csv(_) => "io",
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        LsrError::Dimension(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        LsrError::Parameter(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        LsrError::Format(msg.into())
    }
}
