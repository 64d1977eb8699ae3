//! Separable NMF: `A ≈ A_{:K} Y` with `|K| = r` and `Y ≥ 0`.
//!
//! The selection runs on a reduced matrix `R = QᵀA` whose columns have the
//! same inner products as those of `A` whenever `range(A) ⊆ range(Q)`, so
//! extreme columns, NNLS fits and residual norms carry over unchanged.

use alloc::vec;
use alloc::vec::Vec;

use crate::blocks::{collect_dense, frobenius_norm_sq_blocked, t_matmul_blocked, RowBlocks};
use crate::compress::{structured_compress, CompressionConfig};
use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::matrix::{dot, DenseMatrix};
use crate::nnls::{nnls_solve, DEFAULT_TOL};
use crate::tsqr::{tsqr_r, TsqrOptions};

/// Residual column norms at or below this fraction of the largest initial
/// column norm count as numerically zero.
pub const RANK_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selector {
    Spa,
    Xray,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reduction {
    /// `R` factor of a QR of `A` (`n × n` when tall).
    Qr,
    /// `QᵀA` for a structured compression basis `Q` (`(r + r_ov) × n`).
    Compressed,
}

#[derive(Clone, Debug)]
pub struct SnmfOptions {
    pub selector: Selector,
    pub reduction: Reduction,
    /// Rank and compression parameters (power exponent 0 by default).
    pub config: CompressionConfig,
    pub nnls_tol: f64,
    pub tsqr: TsqrOptions,
}

impl SnmfOptions {
    pub fn new(rank: usize, selector: Selector, reduction: Reduction, seed: u64) -> Self {
        SnmfOptions {
            selector,
            reduction,
            config: CompressionConfig::snmf_defaults(rank, seed),
            nnls_tol: DEFAULT_TOL,
            tsqr: TsqrOptions::default(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SnmfResult {
    /// Selected columns in selection order.
    pub k: Vec<usize>,
    /// `r × n`, nonnegative.
    pub y: DenseMatrix,
    /// `‖R − R_{:K} Y‖_F / ‖R‖_F`.
    pub rel_error_reduced: f64,
    /// `‖A − A_{:K} Y‖_F / ‖A‖_F`.
    pub rel_error_full: f64,
    /// Row count of the reduced matrix the NNLS stack was solved on.
    pub reduced_rows: usize,
}

fn columns(r: &DenseMatrix) -> Vec<Vec<f64>> {
    let t = r.transpose();
    (0..t.rows()).map(|j| t.row(j).to_vec()).collect()
}

/// Index of the largest value among unpicked entries; ties go to the lowest index.
fn argmax(values: &[f64], picked: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &v) in values.iter().enumerate() {
        if picked[j] || v.is_nan() {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(j);
        }
    }
    best
}

fn check_selection(r: &DenseMatrix, rank: usize) -> Result<()> {
    if rank == 0 || rank > r.rows().min(r.cols()) {
        return Err(Error::InfeasibleRank {
            rank,
            rows: r.rows(),
            cols: r.cols(),
        });
    }
    r.ensure_finite("reduced matrix")
}

/// Successive projection: pick the column of largest norm, project every
/// column onto the orthogonal complement of the pick, repeat `rank` times.
pub fn select_columns_spa(r: &DenseMatrix, rank: usize) -> Result<Vec<usize>> {
    check_selection(r, rank)?;
    let mut cols = columns(r);
    let mut norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    let floor = RANK_TOL * RANK_TOL * norms.iter().fold(0.0f64, |m, &v| m.max(v));
    let mut picked = vec![false; cols.len()];
    let mut k = Vec::with_capacity(rank);
    while k.len() < rank {
        let j = match argmax(&norms, &picked) {
            Some(j) if norms[j] > floor && norms[j] > 0.0 => j,
            _ => {
                return Err(Error::RankDeficient {
                    picks: k,
                    wanted: rank,
                })
            }
        };
        picked[j] = true;
        k.push(j);
        let inv = 1.0 / math::sqrt(norms[j]);
        let u: Vec<f64> = cols[j].iter().map(|v| v * inv).collect();
        for (c, norm) in cols.iter_mut().zip(norms.iter_mut()) {
            let proj = dot(&u, c);
            crate::matrix::axpy(-proj, &u, c);
            *norm = dot(c, c);
        }
    }
    Ok(k)
}

/// Greedy XRAY with the "max" rule: take the residual column `i` of largest
/// norm and add the column `j` maximizing `⟨res_i, R_j⟩ / ⟨p, R_j⟩`, where
/// `p = R 1` is positive on every nonzero column of a nonnegative matrix in
/// any orthonormal coordinates. After each pick all columns are refit by
/// NNLS on the picked columns.
pub fn select_columns_xray(r: &DenseMatrix, rank: usize) -> Result<Vec<usize>> {
    check_selection(r, rank)?;
    let n = r.cols();
    let cols = columns(r);
    let p: Vec<f64> = (0..r.rows()).map(|i| r.row(i).iter().sum()).collect();
    let p_norm = math::sqrt(dot(&p, &p));
    let norms0: Vec<f64> = cols.iter().map(|c| math::sqrt(dot(c, c))).collect();
    let floor = RANK_TOL * norms0.iter().fold(0.0f64, |m, &v| m.max(v));
    let denom: Vec<f64> = cols.iter().map(|c| dot(&p, c)).collect();
    let mut residual = cols.clone();
    let mut picked = vec![false; n];
    let mut k: Vec<usize> = Vec::with_capacity(rank);
    while k.len() < rank {
        let res_norms: Vec<f64> = residual.iter().map(|c| math::sqrt(dot(c, c))).collect();
        let none = vec![false; n];
        let i = argmax(&res_norms, &none).filter(|&i| res_norms[i] > floor);
        let Some(i) = i else {
            return Err(Error::RankDeficient {
                picks: k,
                wanted: rank,
            });
        };
        let scores: Vec<f64> = (0..n)
            .map(|j| {
                if denom[j] > RANK_TOL * p_norm * norms0[j] {
                    dot(&residual[i], &cols[j]) / denom[j]
                } else {
                    f64::NAN
                }
            })
            .collect();
        let Some(j) = argmax(&scores, &picked) else {
            return Err(Error::RankDeficient {
                picks: k,
                wanted: rank,
            });
        };
        picked[j] = true;
        k.push(j);
        let c = r.select_cols(&k);
        let h = nnls_solve(&c, r, DEFAULT_TOL)?;
        let fit = r.sub(&c.mul(&h)).transpose();
        for (jj, res) in residual.iter_mut().enumerate() {
            res.copy_from_slice(fit.row(jj));
        }
    }
    Ok(k)
}

/// `Y = argmin_{Y ≥ 0} ‖R − R_{:K} Y‖_F`, column by column.
pub fn snmf_right_factor(r: &DenseMatrix, k: &[usize], tol: f64) -> Result<DenseMatrix> {
    let mut seen = vec![false; r.cols()];
    for &j in k {
        if j >= r.cols() || core::mem::replace(&mut seen[j], true) {
            return Err(Error::arg("column indices must be distinct and in range"));
        }
    }
    if k.is_empty() {
        return Err(Error::arg("empty column selection"));
    }
    nnls_solve(&r.select_cols(k), r, tol)
}

/// The reduced matrix for a given reduction.
pub fn reduce<S: RowBlocks>(a: &S, reduction: Reduction, cfg: CompressionConfig, tsqr: TsqrOptions) -> Result<DenseMatrix> {
    let (m, n) = (a.rows(), a.cols());
    match reduction {
        Reduction::Qr if m >= n => tsqr_r(a, tsqr),
        // Fat input: the dense QR's `R` is `m × n` and the input fits in memory by assumption.
        Reduction::Qr => Ok(linalg::qr(&collect_dense(a)?).r),
        Reduction::Compressed => {
            let cfg = cfg.adjust(m, n)?;
            let q = structured_compress(a, cfg)?.q;
            Ok(t_matmul_blocked(a, &q)?.transpose())
        }
    }
}

/// Full pipeline: reduce, select `K` on the reduced matrix, solve for `Y`,
/// and report errors in both spaces.
pub fn snmf<S: RowBlocks>(a: &S, opts: &SnmfOptions) -> Result<SnmfResult> {
    let (m, n) = (a.rows(), a.cols());
    let rank = opts.config.rank;
    if rank == 0 || rank > m.min(n) {
        return Err(Error::InfeasibleRank { rank, rows: m, cols: n });
    }
    let r = reduce(a, opts.reduction, opts.config, opts.tsqr)?;
    let k = match opts.selector {
        Selector::Spa => select_columns_spa(&r, rank)?,
        Selector::Xray => select_columns_xray(&r, rank)?,
    };
    let y = snmf_right_factor(&r, &k, opts.nnls_tol)?;
    let r_norm = r.frobenius_norm();
    if r_norm == 0.0 {
        return Err(Error::UndefinedMetric("‖A‖_F = 0".into()));
    }
    let rel_error_reduced = r.sub(&r.select_cols(&k).mul(&y)).frobenius_norm() / r_norm;
    let rel_error_full = full_error(a, &k, &y)?;
    Ok(SnmfResult {
        k,
        y,
        rel_error_reduced,
        rel_error_full,
        reduced_rows: r.rows(),
    })
}

/// `‖A − A_{:K} Y‖_F / ‖A‖_F` in one pass over `A`.
pub fn full_error<S: RowBlocks>(a: &S, k: &[usize], y: &DenseMatrix) -> Result<f64> {
    let mut num = 0.0;
    for block in a.blocks() {
        let (_, block) = block?;
        num += block.sub(&block.select_cols(k).mul(y)).frobenius_norm_sq();
    }
    let den = frobenius_norm_sq_blocked(a)?;
    if den == 0.0 {
        return Err(Error::UndefinedMetric("‖A‖_F = 0".into()));
    }
    Ok(math::sqrt(num / den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn separable(m: usize, n: usize, r: usize, seed: u64) -> (DenseMatrix, Vec<usize>) {
        let mut rng = Rng::new(seed);
        let w = rng.uniform_matrix(m, r);
        let mut h = DenseMatrix::zeros(r, n);
        let k: Vec<usize> = (0..r).map(|i| i * (n / r) + 1).collect();
        for j in 0..n {
            if let Some(pos) = k.iter().position(|&x| x == j) {
                h[(pos, j)] = 1.0;
            } else {
                let c: Vec<f64> = (0..r).map(|_| rng.uniform() + 0.05).collect();
                let s: f64 = c.iter().sum();
                for i in 0..r {
                    h[(i, j)] = c[i] / s;
                }
            }
        }
        (w.mul(&h), k)
    }

    fn sorted(mut v: Vec<usize>) -> Vec<usize> {
        v.sort_unstable();
        v
    }

    #[test]
    fn spa_hand_example() {
        let r = DenseMatrix::from_rows(&[[3.0, 0.0, 1.0], [0.0, 2.0, 0.0]]).unwrap();
        assert_eq!(select_columns_spa(&r, 2).unwrap(), vec![0, 1]);
        assert_eq!(select_columns_spa(&r.scaled(2.0), 2).unwrap(), vec![0, 1]);
    }

    #[test]
    fn spa_reports_rank_deficiency() {
        let r = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]]).unwrap();
        match select_columns_spa(&r, 2) {
            Err(Error::RankDeficient { picks, wanted }) => {
                assert_eq!(picks, vec![2]);
                assert_eq!(wanted, 2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicated_extremes_give_distinct_picks() {
        let r = DenseMatrix::from_rows(&[[1.0, 1.0, 0.0, 0.5], [0.0, 0.0, 1.0, 0.5]]).unwrap();
        for k in [select_columns_spa(&r, 2).unwrap(), select_columns_xray(&r, 2).unwrap()] {
            assert_eq!(sorted(k), vec![0, 2]);
        }
    }

    #[test]
    fn selectors_recover_separable_columns() {
        for seed in 0..5 {
            let (a, k) = separable(30, 60, 4, seed);
            assert_eq!(sorted(select_columns_spa(&a, 4).unwrap()), k);
            assert_eq!(sorted(select_columns_xray(&a, 4).unwrap()), k);
        }
    }

    #[test]
    fn xray_exhausts_square_input() {
        let mut rng = Rng::new(4);
        let r = rng.uniform_matrix(5, 5);
        let k = select_columns_xray(&r, 5).unwrap();
        assert_eq!(sorted(k.clone()), vec![0, 1, 2, 3, 4]);
        let y = snmf_right_factor(&r, &k, DEFAULT_TOL).unwrap();
        assert!(r.sub(&r.select_cols(&k).mul(&y)).frobenius_norm() <= 1e-10);
    }

    #[test]
    fn right_factor_reproduces_selected_columns() {
        let (a, k) = separable(20, 40, 3, 9);
        let y = snmf_right_factor(&a, &k, DEFAULT_TOL).unwrap();
        for (pos, &j) in k.iter().enumerate() {
            for i in 0..3 {
                let e = if i == pos { 1.0 } else { 0.0 };
                assert!((y[(i, j)] - e).abs() <= 1e-8);
            }
        }
        assert!(snmf_right_factor(&a, &[1, 1], DEFAULT_TOL).is_err());
    }

    #[test]
    fn pipelines_agree_on_separable_input() {
        let (a, k) = separable(50, 120, 5, 11);
        for reduction in [Reduction::Qr, Reduction::Compressed] {
            for selector in [Selector::Spa, Selector::Xray] {
                let res = snmf(&a, &SnmfOptions::new(5, selector, reduction, 2)).unwrap();
                assert_eq!(sorted(res.k.clone()), k);
                assert!(res.rel_error_full <= 1e-6);
                assert!(res.y.min_value() >= 0.0);
            }
        }
        let fat = a.transpose();
        let r = reduce(&fat, Reduction::Qr, CompressionConfig::snmf_defaults(5, 0), TsqrOptions::default()).unwrap();
        assert_eq!(r.shape(), (50, 50));
    }
}
