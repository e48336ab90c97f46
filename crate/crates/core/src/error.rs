use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("non-scalar loss: node has {0} elements")]
    NonScalarLoss(usize),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("hue {0} outside [0, 360)")]
    HueOutOfRange(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid cell: {0}")]
    InvalidCell(String),

    #[error("empty response curve")]
    EmptyCurve,

    #[error("extremal hues requested for a cell that is not spectrally opponent ({0})")]
    NotOpponent(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("truncated file {}: {detail}", .path.display())]
    Truncated { path: PathBuf, detail: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("summary key mismatch: {0}")]
    KeyMismatch(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Failures caused by bad input files or datasets rather than by usage or numerics.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::MissingFile(_)
                | Error::Truncated { .. }
                | Error::Format(_)
                | Error::Io(_)
                | Error::Csv(_)
                | Error::KeyMismatch(_)
        )
    }

    pub fn is_numeric_error(&self) -> bool {
        matches!(self, Error::NonFinite { .. } | Error::Diverged(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
