#![allow(dead_code)]

use cnmf_core::{DenseMatrix, Rng};
use nalgebra::DMatrix;

pub fn to_na(a: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.data())
}

pub fn from_na(a: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

/// Singular values, descending, from nalgebra's SVD.
pub fn svd_values(a: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

pub fn spectral_norm(a: &DenseMatrix) -> f64 {
    svd_values(a).first().copied().unwrap_or(0.0)
}

/// `(Σ_{j>r} σ_j²)^{1/2}`.
pub fn tail_energy(a: &DenseMatrix, r: usize) -> f64 {
    svd_values(a).iter().skip(r).map(|s| s * s).sum::<f64>().sqrt()
}

/// Random matrix with orthonormal columns (`m × k`), via nalgebra's QR.
pub fn random_orthonormal(m: usize, k: usize, rng: &mut Rng) -> DenseMatrix {
    let g = to_na(&rng.gaussian_matrix(m, k));
    from_na(&g.qr().q())
}

/// `U diag(sigma) Vᵀ` with random orthonormal `U`, `V`.
pub fn with_spectrum(m: usize, n: usize, sigma: &[f64], rng: &mut Rng) -> DenseMatrix {
    let k = sigma.len();
    let u = random_orthonormal(m, k, rng);
    let v = random_orthonormal(n, k, rng);
    u.mul(&DenseMatrix::from_diag(sigma)).mul_t(&v)
}

/// `‖A − Q Qᵀ A‖` in the Frobenius norm.
pub fn projection_residual(a: &DenseMatrix, q: &DenseMatrix) -> DenseMatrix {
    a.sub(&q.mul(&q.t_mul(a)))
}

/// Brute-force NNLS for one column: enumerate all supports, solve the
/// unconstrained least squares on each with nalgebra's SVD, keep the best
/// feasible point.
pub fn nnls_brute_force(c: &DenseMatrix, d: &[f64]) -> (Vec<f64>, f64) {
    let q = c.cols();
    let cn = to_na(c);
    let dn = nalgebra::DVector::from_column_slice(d);
    let mut best = (vec![0.0; q], dn.norm_squared());
    for mask in 1u32..(1 << q) {
        let idx: Vec<usize> = (0..q).filter(|&i| mask & (1 << i) != 0).collect();
        let sub = cn.select_columns(&idx);
        let sol = sub.clone().svd(true, true).solve(&dn, 1e-13).unwrap();
        if sol.iter().any(|&v| v < 0.0) {
            continue;
        }
        let f = (&dn - &sub * &sol).norm_squared();
        if f < best.1 {
            let mut h = vec![0.0; q];
            for (k, &i) in idx.iter().enumerate() {
                h[i] = sol[k];
            }
            best = (h, f);
        }
    }
    best
}
