use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range for {len} users")]
    IndexOutOfRange { index: usize, len: usize },

    /// The per-sender channel matrix does not have full column rank.
    #[error("channel matrix of sender {sender} is rank deficient")]
    RankDeficient { sender: usize },

    /// Fewer antennas than users; zero-forcing has no solution.
    #[error("underdetermined: {antennas} antennas cannot serve {users} users")]
    Undetermined { antennas: usize, users: usize },

    #[error("no strictly feasible starting point for the QoS region")]
    InfeasibleRegion,

    #[error("invalid value for `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    /// Training cannot continue, e.g. every instance in a batch failed.
    #[error("training failed: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
