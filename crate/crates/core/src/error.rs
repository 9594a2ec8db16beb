use thiserror::Error;

use crate::temporal::MaskConvention;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("degenerate 6D rotation: {0}")]
    Singular(&'static str),

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("mask convention mismatch: expected {expected:?}, got {actual:?}")]
    Convention {
        expected: MaskConvention,
        actual: MaskConvention,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("unknown dataset id `{0}`")]
    UnknownDataset(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}, frame {frame}: row has {width} values, expected 669")]
    RowWidth {
        line: usize,
        frame: usize,
        width: usize,
    },

    #[error("unsupported translation target `{0}`")]
    UnsupportedTarget(String),

    #[error("parameter snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn dim(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context,
            expected,
            actual,
        }
    }
}
