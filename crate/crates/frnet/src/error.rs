use std::fmt;
use std::path::PathBuf;

/// Library-wide error type.
#[derive(Debug)]
pub enum Error {
    /// An operation was given tensors whose shapes do not fit its contract.
    ShapeMismatch { op: &'static str, detail: String },
    /// `backward` was called on a tensor that is not a scalar.
    NonScalarLoss { numel: usize },
    /// A class label is outside `[0, classes)`.
    LabelOutOfRange { label: usize, classes: usize },
    /// A probability row is not a distribution (bad sum or negative entry).
    InvalidProbabilityRow { row: usize, detail: String },
    /// A gradient buffer was expected but absent.
    MissingGrad { param: String },
    /// Epoch index outside the configured schedule.
    EpochOutOfRange { epoch: usize, epochs: usize },
    /// A configuration failed validation.
    InvalidConfig(String),
    /// An acquisition or split request cannot be satisfied by the pool.
    InfeasiblePool(String),
    /// A dataset is empty where samples are required.
    EmptyDataset(&'static str),
    /// A file header is malformed (bad magic, version, dtype or rank).
    CorruptHeader { path: PathBuf, detail: String },
    /// A file payload ended early.
    TruncatedPayload { path: PathBuf, expected_bytes: u64, actual_bytes: u64 },
    /// Stored metadata contradicts the stored data.
    ValidationFailed { path: PathBuf, detail: String },
    /// Checkpoint contents do not match the model being loaded into.
    CheckpointMismatch(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ShapeMismatch { op, detail } => write!(f, "shape mismatch in {op}: {detail}"),
            Error::NonScalarLoss { numel } => {
                write!(f, "backward requires a scalar loss, got {numel} elements")
            }
            Error::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            Error::InvalidProbabilityRow { row, detail } => {
                write!(f, "probability row {row} is not a distribution: {detail}")
            }
            Error::MissingGrad { param } => write!(f, "parameter {param} has no gradient"),
            Error::EpochOutOfRange { epoch, epochs } => {
                write!(f, "epoch {epoch} out of range for schedule of {epochs} epochs")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Error::InfeasiblePool(msg) => write!(f, "infeasible pool operation: {msg}"),
            Error::EmptyDataset(what) => write!(f, "empty dataset: {what}"),
            Error::CorruptHeader { path, detail } => {
                write!(f, "corrupt header in {}: {detail}", path.display())
            }
            Error::TruncatedPayload { path, expected_bytes, actual_bytes } => write!(
                f,
                "truncated payload in {}: expected {expected_bytes} bytes, found {actual_bytes}",
                path.display()
            ),
            Error::ValidationFailed { path, detail } => {
                write!(f, "validation failed for {}: {detail}", path.display())
            }
            Error::CheckpointMismatch(msg) => write!(f, "checkpoint mismatch: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
