use alloc::string::String;

/// Errors raised by the solvers and the data model.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("column {0} has zero sum of squares")]
    ZeroVarianceColumn(usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("majorization anchor has zero norm")]
    ZeroAnchorNorm,
    #[error("group penalties require the l2 loss")]
    GroupRequiresL2,
    #[error("fold count {k} out of range for {n} cases")]
    FoldCount { k: usize, n: usize },
    #[error("solver did not converge within {0} sweeps")]
    NotConverged(usize),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
