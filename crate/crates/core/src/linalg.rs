//! Householder QR and symmetric positive definite solves.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::matrix::{axpy, dot, DenseMatrix};

/// Thin QR factors: `q` is `m × p` with orthonormal columns, `r` is `p × n`
/// upper trapezoidal with a nonnegative diagonal, `p = min(m, n)`.
#[derive(Clone, Debug)]
pub struct Qr {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

/// Householder QR, sign-canonicalized so that `diag(R) >= 0`.
///
/// A column that is already zero below the diagonal gets the identity
/// reflector, so an upper-triangular input with a nonnegative diagonal is
/// returned unchanged with `Q = I` exactly.
pub fn qr(a: &DenseMatrix) -> Qr {
    let (m, n) = a.shape();
    let p = m.min(n);
    // Column-major working copy; reflector j lives below the diagonal of column j.
    let mut w = vec![0.0; m * n];
    for i in 0..m {
        for (j, &v) in a.row(i).iter().enumerate() {
            w[j * m + i] = v;
        }
    }
    let mut tau = vec![0.0; p];
    for j in 0..p {
        let (head, tail) = w.split_at_mut((j + 1) * m);
        let x = &mut head[j * m + j..];
        let alpha = x[0];
        let sigma = dot(&x[1..], &x[1..]);
        if sigma == 0.0 {
            continue;
        }
        let norm = math::hypot(alpha, math::sqrt(sigma));
        let beta = if alpha >= 0.0 { -norm } else { norm };
        let scale = 1.0 / (alpha - beta);
        x[1..].iter_mut().for_each(|v| *v *= scale);
        tau[j] = (beta - alpha) / beta;
        x[0] = beta;
        let v = &x[1..];
        for k in 0..n - j - 1 {
            let col = &mut tail[k * m + j..(k + 1) * m];
            let s = tau[j] * (col[0] + dot(v, &col[1..]));
            col[0] -= s;
            axpy(-s, v, &mut col[1..]);
        }
    }

    let mut r = DenseMatrix::zeros(p, n);
    for i in 0..p {
        for k in i..n {
            r[(i, k)] = w[k * m + i];
        }
    }

    // Q = H_0 H_1 ... H_{p-1} applied to the first p identity columns.
    let mut e = vec![0.0; m * p];
    for c in 0..p {
        e[c * m + c] = 1.0;
    }
    for j in (0..p).rev() {
        if tau[j] == 0.0 {
            continue;
        }
        let v = &w[j * m + j + 1..(j + 1) * m];
        for c in 0..p {
            let col = &mut e[c * m + j..(c + 1) * m];
            let s = tau[j] * (col[0] + dot(v, &col[1..]));
            col[0] -= s;
            axpy(-s, v, &mut col[1..]);
        }
    }
    let mut q = DenseMatrix::zeros(m, p);
    for c in 0..p {
        for i in 0..m {
            q[(i, c)] = e[c * m + i];
        }
    }

    for i in 0..p {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).iter_mut().for_each(|v| *v = -*v);
            for row in 0..m {
                q[(row, i)] = -q[(row, i)];
            }
        }
    }
    Qr { q, r }
}

/// Orthonormal basis for the column space of `a` (the `Q` of its thin QR).
pub fn orthonormalize(a: &DenseMatrix) -> DenseMatrix {
    qr(a).q
}

/// Lower Cholesky factor of a symmetric matrix, or `None` if a pivot is not
/// strictly positive.
pub fn cholesky(g: &DenseMatrix) -> Option<DenseMatrix> {
    let n = g.rows();
    assert_eq!(n, g.cols());
    let mut l = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let d = g[(j, j)] - dot(&l.row(j)[..j], &l.row(j)[..j]);
        if !(d > 0.0) {
            return None;
        }
        let d = math::sqrt(d);
        l[(j, j)] = d;
        for i in j + 1..n {
            let s = g[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = s / d;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` in place.
pub fn cholesky_solve_in_place(l: &DenseMatrix, b: &mut [f64]) {
    let n = l.rows();
    for i in 0..n {
        let s = b[i] - dot(&l.row(i)[..i], &b[..i]);
        b[i] = s / l[(i, i)];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Cholesky factor of `g`, retrying with a `1e-12 · trace` ridge (growing
/// tenfold) when `g` is numerically singular.
pub fn cholesky_with_ridge(g: &DenseMatrix) -> DenseMatrix {
    if let Some(l) = cholesky(g) {
        return l;
    }
    let n = g.rows();
    let base = (g.trace().abs() / n.max(1) as f64).max(f64::MIN_POSITIVE);
    let mut ridge = 1e-12 * base * n as f64;
    loop {
        let mut shifted = g.clone();
        shifted.add_diagonal(ridge);
        if let Some(l) = cholesky(&shifted) {
            return l;
        }
        ridge *= 10.0;
    }
}

/// `X = G⁻¹ B` for symmetric positive definite `G` (ridge fallback on failure).
pub fn solve_spd(g: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    assert_eq!(g.rows(), b.rows());
    let l = cholesky_with_ridge(g);
    let bt = b.transpose();
    let mut xt = DenseMatrix::zeros(bt.rows(), bt.cols());
    let mut col: Vec<f64> = vec![0.0; g.rows()];
    for c in 0..bt.rows() {
        col.copy_from_slice(bt.row(c));
        cholesky_solve_in_place(&l, &mut col);
        xt.row_mut(c).copy_from_slice(&col);
    }
    xt.transpose()
}

/// `X = B G⁻¹` for symmetric positive definite `G`.
pub fn solve_spd_right(b: &DenseMatrix, g: &DenseMatrix) -> DenseMatrix {
    assert_eq!(b.cols(), g.rows());
    let l = cholesky_with_ridge(g);
    let mut x = b.clone();
    for i in 0..x.rows() {
        cholesky_solve_in_place(&l, x.row_mut(i));
    }
    x
}


/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
pub fn symmetric_eigenvalues(s: &DenseMatrix) -> Vec<f64> {
    let n = s.rows();
    assert_eq!(n, s.cols());
    let mut a = s.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                off += a[(i, j)] * a[(i, j)];
            }
        }
        if off <= 1e-30 * a.frobenius_norm_sq().max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + math::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(t * t + 1.0);
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

/// Singular values by one-sided (Hestenes) Jacobi, descending.
pub fn singular_values(a: &DenseMatrix) -> Vec<f64> {
    // Work on columns of the taller orientation.
    let w = if a.rows() >= a.cols() { a.transpose() } else { a.clone() };
    // Rows of `w` are the columns being orthogonalized.
    let (k, len) = w.shape();
    let mut cols: Vec<Vec<f64>> = (0..k).map(|i| w.row(i).to_vec()).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * math::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + math::sqrt(1.0 + zeta * zeta));
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                let (cp, cq) = (&mut lo[p], &mut hi[0]);
                for i in 0..len {
                    let x = cp[i];
                    let y = cq[i];
                    cp[i] = c * x - s * y;
                    cq[i] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| math::sqrt(dot(c, c))).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn orth_err(q: &DenseMatrix) -> f64 {
        q.gram().sub(&DenseMatrix::identity(q.cols())).frobenius_norm()
    }

    #[test]
    fn qr_reconstructs_tall_square_and_fat() {
        let mut rng = Rng::new(11);
        for &(m, n) in &[(40, 7), (9, 9), (5, 12), (1, 3), (3, 1)] {
            let a = rng.gaussian_matrix(m, n);
            let Qr { q, r } = qr(&a);
            assert_eq!(q.shape(), (m, m.min(n)));
            assert_eq!(r.shape(), (m.min(n), n));
            assert!(q.mul(&r).sub(&a).frobenius_norm() <= 1e-12 * a.frobenius_norm());
            assert!(orth_err(&q) <= 1e-12);
            for i in 0..r.rows() {
                assert!(r[(i, i)] >= 0.0);
                for k in 0..i.min(n) {
                    assert_eq!(r[(i, k)], 0.0);
                }
            }
        }
    }

    #[test]
    fn qr_of_canonical_triangle_is_exact_identity() {
        let mut rng = Rng::new(2);
        let r0 = qr(&rng.gaussian_matrix(10, 4)).r;
        let f = qr(&r0);
        assert_eq!(f.q, DenseMatrix::identity(4));
        assert_eq!(f.r, r0);
    }

    #[test]
    fn orthonormal_input_gives_unit_r() {
        let mut rng = Rng::new(5);
        let q0 = orthonormalize(&rng.gaussian_matrix(30, 6));
        let f = qr(&q0);
        assert!(f.r.sub(&DenseMatrix::identity(6)).max_abs() <= 1e-12);
        assert!(f.q.sub(&q0).max_abs() <= 1e-12);
    }

    #[test]
    fn spd_solves() {
        let mut rng = Rng::new(9);
        let a = rng.gaussian_matrix(12, 5);
        let mut g = a.gram();
        g.add_diagonal(0.5);
        let b = rng.gaussian_matrix(5, 3);
        let x = solve_spd(&g, &b);
        assert!(g.mul(&x).sub(&b).max_abs() <= 1e-10);
        let bt = b.transpose();
        let y = solve_spd_right(&bt, &g);
        assert!(y.mul(&g).sub(&bt).max_abs() <= 1e-10);
    }

    #[test]
    fn jacobi_spectra_match_construction() {
        let mut rng = Rng::new(21);
        let u = orthonormalize(&rng.gaussian_matrix(15, 4));
        let v = orthonormalize(&rng.gaussian_matrix(9, 4));
        let sigma = [5.0, 2.0, 0.5, 1e-3];
        let a = u.mul(&DenseMatrix::from_diag(&sigma)).mul_t(&v);
        let sv = singular_values(&a);
        for (got, want) in sv.iter().zip(sigma) {
            assert!((got - want).abs() <= 1e-12 * 5.0);
        }
        assert!(sv[4..].iter().all(|s| s.abs() <= 1e-12));
        let ev = symmetric_eigenvalues(&a.gram());
        for (got, want) in ev.iter().zip(sigma) {
            assert!((got - want * want).abs() <= 1e-10);
        }
        assert_eq!(singular_values(&a.transpose()).len(), 9);
    }

    #[test]
    fn singular_gram_gets_ridge() {
        let g = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(cholesky(&g).is_none());
        let l = cholesky_with_ridge(&g);
        assert!(l.is_finite());
    }
}
