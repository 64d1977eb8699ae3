//! Nonnegative least squares, `min_{H ≥ 0} ‖D − C H‖_F`, column by column.
//!
//! Lawson–Hanson active-set iterations run on the normal equations: `CᵀC`
//! and `CᵀD` are formed once per call and shared by every column, so the
//! per-column cost depends only on the number of unknowns `q`. The design
//! may have any sign, which the compressed factorization steps rely on.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::matrix::{dot, DenseMatrix};

pub const DEFAULT_TOL: f64 = 1e-10;

/// Solves `min_{H ≥ 0} ‖D − C H‖_F` for `H` (`q × k`).
///
/// `tol` bounds the KKT residual relative to `‖Cᵀd‖_∞` of each column.
pub fn nnls_solve(c: &DenseMatrix, d: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    if c.rows() == 0 || c.cols() == 0 {
        return Err(Error::arg("nnls design must be at least 1x1"));
    }
    if c.rows() != d.rows() {
        return Err(Error::dims("nnls: design and target row counts differ"));
    }
    c.ensure_finite("nnls design")?;
    d.ensure_finite("nnls targets")?;
    nnls_gram(&c.gram(), &c.t_mul(d), tol)
}

/// Same problem stated through `G = CᵀC` (`q × q`) and `CᵀD` (`q × k`).
pub fn nnls_gram(gram: &DenseMatrix, ctd: &DenseMatrix, tol: f64) -> Result<DenseMatrix> {
    let q = gram.rows();
    if gram.cols() != q || ctd.rows() != q {
        return Err(Error::dims("nnls: gram and right-hand side disagree"));
    }
    if !(tol > 0.0) {
        return Err(Error::arg("nnls tolerance must be positive"));
    }
    let k = ctd.cols();
    let cap = 3 * q;
    let rhs = ctd.transpose();
    let mut h = DenseMatrix::zeros(k, q);
    let mut failed = None;
    for j in 0..k {
        let (col, converged) = solve_column(gram, rhs.row(j), tol, cap);
        h.row_mut(j).copy_from_slice(&col);
        if !converged && failed.is_none() {
            failed = Some(j);
        }
    }
    let h = h.transpose();
    match failed {
        Some(column) => Err(Error::NnlsConvergence {
            column,
            cap,
            best: h,
        }),
        None => Ok(h),
    }
}

/// Lawson–Hanson on one column; returns the iterate and whether the KKT
/// test passed within `cap` exchanges.
fn solve_column(g: &DenseMatrix, c: &[f64], tol: f64, cap: usize) -> (Vec<f64>, bool) {
    let q = c.len();
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut h = vec![0.0; q];
    if scale == 0.0 {
        return (h, true);
    }
    let tol = tol * scale;
    let mut passive = vec![false; q];
    // Indices whose entry bounced straight back out; skipped until the
    // passive set changes through a successful addition.
    let mut blocked = vec![false; q];
    let mut w = c.to_vec();
    let mut work = Passive::new(q);
    let mut exchanges = 0;

    loop {
        let mut pick = None;
        let mut best = tol;
        for i in 0..q {
            if !passive[i] && !blocked[i] && w[i] > best {
                best = w[i];
                pick = Some(i);
            }
        }
        let Some(t) = pick else {
            return (h, true);
        };
        if exchanges >= cap {
            return (h, false);
        }
        exchanges += 1;
        passive[t] = true;

        let mut first = true;
        loop {
            let s = work.solve(g, c, &passive);
            let mut alpha = f64::INFINITY;
            let mut limiting = None;
            for i in 0..q {
                if passive[i] && s[i] <= 0.0 {
                    let denom = h[i] - s[i];
                    let ratio = if denom > 0.0 { h[i] / denom } else { 0.0 };
                    if ratio < alpha {
                        alpha = ratio;
                        limiting = Some(i);
                    }
                }
            }
            let Some(limiting) = limiting else {
                h.copy_from_slice(s);
                break;
            };
            if first && limiting == t && h[t] == 0.0 {
                passive[t] = false;
                blocked[t] = true;
                break;
            }
            first = false;
            for i in 0..q {
                if passive[i] {
                    h[i] += alpha * (s[i] - h[i]);
                }
            }
            h[limiting] = 0.0;
            for i in 0..q {
                if passive[i] && h[i] <= 0.0 {
                    h[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
        if passive[t] {
            blocked.iter_mut().for_each(|b| *b = false);
        }
        for i in 0..q {
            w[i] = c[i] - dot(g.row(i), &h);
        }
    }
}

/// Buffers for the passive-set solves of one column; sized once per `q`.
struct Passive {
    idx: Vec<usize>,
    l: Vec<f64>,
    s: Vec<f64>,
}

impl Passive {
    fn new(q: usize) -> Self {
        Passive {
            idx: Vec::with_capacity(q),
            l: vec![0.0; q * q],
            s: vec![0.0; q],
        }
    }

    /// Unconstrained least squares restricted to the passive set, left in
    /// `self.s` (zero elsewhere). Same arithmetic as `linalg::cholesky` and
    /// `linalg::cholesky_solve_in_place` on the extracted block.
    fn solve(&mut self, g: &DenseMatrix, c: &[f64], passive: &[bool]) -> &[f64] {
        self.idx.clear();
        self.idx.extend((0..c.len()).filter(|&i| passive[i]));
        let p = self.idx.len();
        let l = &mut self.l[..p * p];
        if !cholesky_block(g, &self.idx, l) {
            let sub = DenseMatrix::from_fn(p, p, |a, b| g[(self.idx[a], self.idx[b])]);
            l.copy_from_slice(linalg::cholesky_with_ridge(&sub).data());
        }
        self.s.iter_mut().for_each(|v| *v = 0.0);
        // The passive values go into `s` at their own indices, so solve in a
        // compact prefix first and scatter afterwards (indices ascend).
        let b = &mut self.s[..p];
        for (a, &i) in self.idx.iter().enumerate() {
            b[a] = c[i];
        }
        for i in 0..p {
            let v = b[i] - dot(&l[i * p..i * p + i], &b[..i]);
            b[i] = v / l[i * p + i];
        }
        for i in (0..p).rev() {
            let mut v = b[i];
            for k in i + 1..p {
                v -= l[k * p + i] * b[k];
            }
            b[i] = v / l[i * p + i];
        }
        for a in (0..p).rev() {
            let (i, v) = (self.idx[a], self.s[a]);
            self.s[a] = 0.0;
            self.s[i] = v;
        }
        &self.s
    }
}

/// Row-major lower Cholesky factor of `g[idx, idx]` into `l`; false when a
/// pivot is not strictly positive.
fn cholesky_block(g: &DenseMatrix, idx: &[usize], l: &mut [f64]) -> bool {
    let p = idx.len();
    l.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..p {
        let d = g[(idx[j], idx[j])] - dot(&l[j * p..j * p + j], &l[j * p..j * p + j]);
        if !(d > 0.0) {
            return false;
        }
        let d = math::sqrt(d);
        l[j * p + j] = d;
        for i in j + 1..p {
            let v = g[(idx[i], idx[j])] - dot(&l[i * p..i * p + j], &l[j * p..j * p + j]);
            l[i * p + j] = v / d;
        }
    }
    true
}

/// `‖D − C H‖_F²`.
pub fn objective(c: &DenseMatrix, d: &DenseMatrix, h: &DenseMatrix) -> f64 {
    d.sub(&c.mul(h)).frobenius_norm_sq()
}

/// Largest KKT violation over all columns, measured the way the solver's
/// stopping test does: `max(-g_i)` on zero entries, `|g_i|` on positive ones,
/// with `g = Cᵀ(C h − d)`, each column scaled by `‖Cᵀd‖_∞`.
pub fn kkt_violation(c: &DenseMatrix, d: &DenseMatrix, h: &DenseMatrix) -> f64 {
    let g = c.gram().mul(h).sub(&c.t_mul(d));
    let ctd = c.t_mul(d);
    let mut worst = 0.0f64;
    for j in 0..h.cols() {
        let scale = (0..ctd.rows()).fold(0.0f64, |m, i| m.max(ctd[(i, j)].abs()));
        if scale == 0.0 {
            continue;
        }
        for i in 0..h.rows() {
            let v = if h[(i, j)] > 0.0 {
                g[(i, j)].abs()
            } else {
                (-g[(i, j)]).max(0.0)
            };
            worst = worst.max(v / scale);
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn col(v: &[f64]) -> DenseMatrix {
        DenseMatrix::new(v.len(), 1, v.to_vec()).unwrap()
    }

    #[test]
    fn identity_design_projects_onto_orthant() {
        let h = nnls_solve(&DenseMatrix::identity(3), &col(&[1.0, -2.0, 3.0]), DEFAULT_TOL).unwrap();
        assert_eq!(h, col(&[1.0, 0.0, 3.0]));
    }

    #[test]
    fn interior_optimum() {
        let h = nnls_solve(&col(&[1.0, 1.0]), &col(&[1.0, 3.0]), DEFAULT_TOL).unwrap();
        assert!((h[(0, 0)] - 2.0).abs() <= 1e-14);
    }

    #[test]
    fn known_small_problem() {
        let c = DenseMatrix::from_rows(&[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let h = nnls_solve(&c, &col(&[2.0, 1.0, 1.0]), DEFAULT_TOL).unwrap();
        assert!((h[(0, 0)] - 1.5).abs() <= 1e-12 && (h[(1, 0)] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn beats_trivial_candidates_and_satisfies_kkt() {
        let mut rng = Rng::new(17);
        for _ in 0..50 {
            let c = rng.gaussian_matrix(12, 6);
            let d = rng.gaussian_matrix(12, 4);
            let h = nnls_solve(&c, &d, DEFAULT_TOL).unwrap();
            assert!(h.min_value() >= 0.0);
            let f = objective(&c, &d, &h);
            assert!(f <= objective(&c, &d, &DenseMatrix::zeros(6, 4)) + 1e-12);
            let mut clipped = linalg::solve_spd(&c.gram(), &c.t_mul(&d));
            clipped.map_inplace(|v| v.max(0.0));
            assert!(f <= objective(&c, &d, &clipped) + 1e-12);
            assert!(kkt_violation(&c, &d, &h) <= 1e-9);
        }
    }

    #[test]
    fn columns_are_separable() {
        let mut rng = Rng::new(3);
        let c = rng.gaussian_matrix(10, 5);
        let d = rng.gaussian_matrix(10, 6);
        let joint = nnls_solve(&c, &d, DEFAULT_TOL).unwrap();
        for j in 0..6 {
            let single = nnls_solve(&c, &col(&d.column(j)), DEFAULT_TOL).unwrap();
            for i in 0..5 {
                assert!((single[(i, 0)] - joint[(i, j)]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn collinear_design_uses_ridge() {
        let c = DenseMatrix::from_rows(&[[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let h = nnls_solve(&c, &col(&[1.0, 2.0, 3.0]), DEFAULT_TOL).unwrap();
        assert!(objective(&c, &col(&[1.0, 2.0, 3.0]), &h) <= 1e-12);
    }

    #[test]
    fn argument_errors() {
        assert!(nnls_solve(&DenseMatrix::zeros(2, 2), &DenseMatrix::zeros(3, 1), 1e-10).is_err());
        assert!(nnls_solve(&DenseMatrix::identity(2), &DenseMatrix::zeros(2, 1), 0.0).is_err());
        let mut bad = DenseMatrix::identity(2);
        bad[(0, 0)] = f64::NAN;
        assert!(matches!(
            nnls_solve(&bad, &DenseMatrix::zeros(2, 1), 1e-10),
            Err(Error::NonFinite(_))
        ));
    }
}
