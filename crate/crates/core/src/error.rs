use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use crate::matrix::DenseMatrix;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("infeasible rank {rank} for a {rows}x{cols} matrix")]
    InfeasibleRank { rank: usize, rows: usize, cols: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("memory budget exceeded: {0}")]
    Budget(String),

    /// Column selection ran out of residual energy before `r` picks.
    #[error("rank deficient: residual vanished after {} of {wanted} picks", picks.len())]
    RankDeficient { picks: Vec<usize>, wanted: usize },

    /// The active-set solver hit its exchange cap on `column`; `best` is the
    /// last feasible iterate for every column.
    #[error("nnls did not converge on column {column} within {cap} exchanges")]
    NnlsConvergence {
        column: usize,
        cap: usize,
        best: DenseMatrix,
    },

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("admm diverged at iteration {iteration}")]
    Divergence { iteration: usize, trace: Vec<f64> },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("storage: {0}")]
    Storage(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}
