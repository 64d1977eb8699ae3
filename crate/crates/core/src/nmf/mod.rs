//! Classical NMF, `min_{X, Y ≥ 0} ‖A − X Y‖_F²`, with optional compression.
//!
//! Compressed variants work with `L` (`m × s`, a basis for the range of `A`)
//! and `R` (`s × n`, a basis for the range of `Aᵀ`, stored transposed as
//! `Rᵀ`). The X step then sees `Ǎ = A Rᵀ` and the Y step `Â = Lᵀ A`, so
//! after the one-off compression no iteration touches `A` again.

mod admm;
mod alternating;
mod mu;

pub use admm::{
    admm_compressed, admm_direct, kkt_residual, nmf_admm, AdmmOptions, AdmmParams, AdmmResult,
    AdmmState, KktResidual,
};
pub use alternating::{nmf_alternating, NmfOptions};
pub use mu::{mu_step, mu_update, Side, MU_EPS};

use alloc::vec::Vec;

use crate::blocks::RowBlocks;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::DenseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Semi-NMF-safe multiplicative updates.
    Mu,
    /// Alternating nonnegative least squares with the active-set solver.
    ActiveSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Compression {
    None,
    Gaussian,
    Structured,
}

/// Nonnegative factors and run metadata.
#[derive(Clone, Debug)]
pub struct FactorPair {
    /// `m × r`.
    pub x: DenseMatrix,
    /// `r × n`.
    pub y: DenseMatrix,
    pub iterations: usize,
    /// Squared Frobenius objective after each iteration, in the space the
    /// driver iterates in (compressed space for compressed drivers).
    pub objective_trace: Vec<f64>,
    /// `‖A − X Y‖_F / ‖A‖_F` against the original matrix.
    pub relative_error: f64,
}

/// `‖A − X Y‖_F / ‖A‖_F`, one blocked pass over `A`; `X Y` is only ever
/// formed one row block at a time.
pub fn relative_error<S: RowBlocks>(a: &S, x: &DenseMatrix, y: &DenseMatrix) -> Result<f64> {
    if x.rows() != a.rows() || y.cols() != a.cols() || x.cols() != y.rows() {
        return Err(Error::dims("relative_error: factor shapes do not match A"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for block in a.blocks() {
        let (start, block) = block?;
        let xy = x.row_range(start, block.rows()).mul(y);
        num += block.sub(&xy).frobenius_norm_sq();
        den += block.frobenius_norm_sq();
    }
    if den == 0.0 {
        return Err(Error::UndefinedMetric("‖A‖_F = 0".into()));
    }
    Ok(math::sqrt(num / den))
}

/// `‖T − C Y‖_F²` from `‖T‖²`, `P = Cᵀ T` and `G = Cᵀ C`, without forming the residual.
pub(crate) fn objective_from_products(
    target_norm_sq: f64,
    p: &DenseMatrix,
    gram: &DenseMatrix,
    y: &DenseMatrix,
) -> f64 {
    let f = target_norm_sq - 2.0 * p.inner(y) + gram.inner(&y.gram_rows());
    f.max(0.0)
}

pub(crate) fn check_rank(rank: usize, m: usize, n: usize) -> Result<()> {
    if rank == 0 || rank > m.min(n) {
        return Err(Error::InfeasibleRank {
            rank,
            rows: m,
            cols: n,
        });
    }
    Ok(())
}

/// Relative change test shared by the drivers.
pub(crate) fn converged(previous: f64, current: f64, tol: f64) -> bool {
    let scale = previous.abs().max(f64::MIN_POSITIVE);
    (previous - current).abs() / scale < tol
}
