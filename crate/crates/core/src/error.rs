use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("channel matrix is rank deficient; dependent rows {rows:?}")]
    RankDeficient { rows: Vec<usize> },

    #[error("user set is empty")]
    EmptyUserSet,

    #[error("user drop in cell {cell} gave up after {attempts} rejected positions")]
    DropRejection { cell: usize, attempts: usize },

    #[error("budget too small for any CDI (B_u = {per_user}, B_t = {total})")]
    BudgetTooSmall { per_user: u32, total: u32 },

    #[error("unsupported dimension {found}: {reason}")]
    Unsupported { found: usize, reason: &'static str },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}
