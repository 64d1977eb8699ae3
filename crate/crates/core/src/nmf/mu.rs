use crate::error::Result;
use crate::math;
use crate::matrix::DenseMatrix;

/// Denominator guard of the multiplicative update.
pub const MU_EPS: f64 = 1e-16;

/// Which factor of `A ≈ X Y` an update touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Update `X`.
    Left,
    /// Update `Y`.
    Right,
}

/// One multiplicative update of `A_eff ≈ X Y` in the semi-NMF form, which
/// stays valid when `A_eff` (or the fixed factor) has mixed signs:
///
/// `Y ← Y ∘ sqrt(((XᵀA)⁺ + (XᵀX)⁻ Y) / ((XᵀA)⁻ + (XᵀX)⁺ Y))`
///
/// and symmetrically for `X`. Zero entries stay zero.
pub fn mu_step(a_eff: &DenseMatrix, x: &DenseMatrix, y: &DenseMatrix, side: Side) -> Result<DenseMatrix> {
    a_eff.ensure_finite("multiplicative update input")?;
    match side {
        Side::Left => {
            let p = a_eff.mul_t(y);
            mu_update(x, &p, &y.gram_rows())
        }
        Side::Right => {
            let p = x.t_mul(a_eff);
            Ok(mu_update(&y.transpose(), &p.transpose(), &x.gram())?.transpose())
        }
    }
}

/// Left-side update `F ← F ∘ sqrt((P⁺ + F G⁻) / (P⁻ + F G⁺))` given the
/// cross product `P` (shape of `F`) and the symmetric Gram `G`.
pub fn mu_update(f: &DenseMatrix, p: &DenseMatrix, gram: &DenseMatrix) -> Result<DenseMatrix> {
    assert_eq!(f.shape(), p.shape());
    assert_eq!(f.cols(), gram.rows());
    let mut g_pos = gram.clone();
    g_pos.map_inplace(|v| v.max(0.0));
    let mut g_neg = gram.clone();
    g_neg.map_inplace(|v| (-v).max(0.0));
    let fg_pos = f.mul(&g_pos);
    let fg_neg = f.mul(&g_neg);
    let mut out = f.clone();
    for (i, o) in out.data_mut().iter_mut().enumerate() {
        if *o == 0.0 {
            continue;
        }
        let pv = p.data()[i];
        let num = pv.max(0.0) + fg_neg.data()[i];
        let den = (-pv).max(0.0) + fg_pos.data()[i];
        *o *= math::sqrt(num / den.max(MU_EPS));
    }
    out.ensure_finite("multiplicative update")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn obj(a: &DenseMatrix, x: &DenseMatrix, y: &DenseMatrix) -> f64 {
        a.sub(&x.mul(y)).frobenius_norm_sq()
    }

    #[test]
    fn fixed_point_is_kept() {
        let mut rng = Rng::new(1);
        let x = rng.uniform_matrix(10, 3);
        let y = rng.uniform_matrix(3, 8);
        let a = x.mul(&y);
        let y2 = mu_step(&a, &x, &y, Side::Right).unwrap();
        assert!(y2.max_abs_diff(&y) <= 1e-12);
        let x2 = mu_step(&a, &x, &y, Side::Left).unwrap();
        assert!(x2.max_abs_diff(&x) <= 1e-12);
    }

    #[test]
    fn zeros_stay_locked() {
        let mut rng = Rng::new(2);
        let a = rng.uniform_matrix(6, 5);
        let x = rng.uniform_matrix(6, 2);
        let mut y = rng.uniform_matrix(2, 5);
        y[(1, 3)] = 0.0;
        let y2 = mu_step(&a, &x, &y, Side::Right).unwrap();
        assert_eq!(y2[(1, 3)], 0.0);
    }

    #[test]
    fn mixed_sign_data_keeps_factors_nonnegative() {
        let mut rng = Rng::new(3);
        let a = rng.gaussian_matrix(12, 9);
        let mut x = rng.uniform_matrix(12, 3);
        let mut y = rng.uniform_matrix(3, 9);
        for _ in 0..20 {
            x = mu_step(&a, &x, &y, Side::Left).unwrap();
            y = mu_step(&a, &x, &y, Side::Right).unwrap();
            assert!(x.min_value() >= 0.0 && y.min_value() >= 0.0);
        }
    }

    #[test]
    fn sweeps_do_not_increase_objective() {
        let mut rng = Rng::new(4);
        let a = rng.uniform_matrix(15, 12);
        let mut x = rng.uniform_matrix(15, 4);
        let mut y = rng.uniform_matrix(4, 12);
        let mut f = obj(&a, &x, &y);
        for _ in 0..30 {
            x = mu_step(&a, &x, &y, Side::Left).unwrap();
            let fx = obj(&a, &x, &y);
            y = mu_step(&a, &x, &y, Side::Right).unwrap();
            let fy = obj(&a, &x, &y);
            assert!(fx <= f * (1.0 + 1e-12) && fy <= fx * (1.0 + 1e-12));
            f = fy;
        }
    }

    #[test]
    fn nan_input_is_rejected() {
        let mut a = DenseMatrix::identity(2);
        a[(0, 1)] = f64::NAN;
        let x = DenseMatrix::identity(2);
        assert!(mu_step(&a, &x, &x, Side::Left).is_err());
    }
}
