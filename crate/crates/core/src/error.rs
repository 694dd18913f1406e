use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("token id {id} is out of range for a vocabulary of {len} entries")]
    IdOutOfRange { id: u32, len: usize },

    #[error("marker extraction needs at least two attributes, got {0}")]
    TooFewAttributes(usize),

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("source and target attribute are both `{0}`")]
    SameAttribute(String),

    #[error("cannot build or query an empty index")]
    EmptyIndex,

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("model does not support this operation: {0}")]
    Unsupported(&'static str),
}

impl Error {
    /// True for failures of the numerical engine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::Divergence { .. })
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
