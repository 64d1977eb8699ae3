mod common;

use cnmf_core::nmf::{
    admm_compressed, admm_direct, mu_step, nmf_admm, nmf_alternating, relative_error, AdmmOptions, AdmmParams,
    Compression, Method, NmfOptions, Side,
};
use cnmf_core::{DenseMatrix, InCore, Rng};
use proptest::prelude::*;

fn objective(a: &DenseMatrix, x: &DenseMatrix, y: &DenseMatrix) -> f64 {
    a.sub(&x.mul(y)).frobenius_norm_sq()
}

#[test]
fn multiplicative_sweeps_never_increase_the_objective() {
    let mut rng = Rng::new(31);
    for _ in 0..50 {
        let (m, n, r) = (5 + rng.below(30), 5 + rng.below(30), 1 + rng.below(4));
        let a = rng.uniform_matrix(m, n);
        let mut x = rng.uniform_matrix(m, r);
        let mut y = rng.uniform_matrix(r, n);
        let mut f = objective(&a, &x, &y);
        for _ in 0..20 {
            x = mu_step(&a, &x, &y, Side::Left).unwrap();
            y = mu_step(&a, &x, &y, Side::Right).unwrap();
            let g = objective(&a, &x, &y);
            assert!(g <= f + 1e-12 * f.max(1.0));
            f = g;
        }
    }
}

#[test]
fn compressed_objective_is_a_contraction() {
    let mut rng = Rng::new(8);
    let a = rng.uniform_matrix(60, 40);
    let q = cnmf_core::compress::structured_compress(&a, cnmf_core::CompressionConfig::nmf_defaults(4, 1)).unwrap().q;
    for _ in 0..10 {
        let x = rng.uniform_matrix(60, 4);
        let y = rng.uniform_matrix(4, 40);
        let full = a.sub(&x.mul(&y)).frobenius_norm();
        let reduced = q.t_mul(&a).sub(&q.t_mul(&x).mul(&y)).frobenius_norm();
        assert!(reduced <= full * (1.0 + 1e-12));
    }
}

#[test]
fn structured_variants_track_the_uncompressed_error() {
    let mut rng = Rng::new(12);
    let a = rng.uniform_matrix(120, 90).scaled(0.1).add(&rng.uniform_matrix(120, 5).mul(&rng.uniform_matrix(5, 90)));
    for method in [Method::Mu, Method::ActiveSet] {
        let run = |c| nmf_alternating(&a, &NmfOptions::new(5, method, c, 3)).unwrap().relative_error;
        let (plain, sc) = (run(Compression::None), run(Compression::Structured));
        assert!((sc - plain).abs() <= 0.1 * plain, "{method:?}: {sc} vs {plain}");
    }
}

#[test]
fn reported_error_matches_recomputation() {
    let mut rng = Rng::new(5);
    let a = rng.uniform_matrix(70, 30);
    let f = nmf_alternating(&InCore::new(a.clone(), 9).unwrap(), &NmfOptions::new(3, Method::Mu, Compression::Gaussian, 2)).unwrap();
    let direct = a.sub(&f.x.mul(&f.y)).frobenius_norm() / a.frobenius_norm();
    assert!((f.relative_error - direct).abs() <= 1e-12);
    assert!((relative_error(&a, &f.x, &f.y).unwrap() - f.relative_error).abs() <= 1e-12);
}

#[test]
fn admm_converges_on_exact_low_rank_input() {
    let mut rng = Rng::new(4);
    let a = rng.uniform_matrix(100, 5).mul(&rng.uniform_matrix(5, 80));
    let mut o = AdmmOptions::new(5, true, 1);
    o.params.tol = 1e-4;
    let (pair, run) = nmf_admm(&a, &o).unwrap();
    assert!(run.converged && run.iterations <= 500);
    assert!(run.residual.max() <= 1e-4);
    assert!(pair.relative_error <= 1e-3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn identity_bases_reproduce_direct_admm(m in 4usize..20, n in 4usize..20, r in 1usize..4, seed in any::<u64>(), br in 1usize..8) {
        let mut rng = Rng::new(seed);
        let a = rng.uniform_matrix(m, n);
        let u0 = rng.uniform_matrix(m, r);
        let v0 = rng.uniform_matrix(r, n);
        let p = AdmmParams { max_iter: 40, tol: 0.0, ..AdmmParams::default() };
        let c = admm_compressed(&a, &DenseMatrix::identity(m), &DenseMatrix::identity(n), u0.clone(), v0.clone(), &p).unwrap();
        let d = admm_direct(&InCore::new(a, br).unwrap(), u0, v0, &p).unwrap();
        prop_assert!(c.state.u.max_abs_diff(&d.state.u) <= 1e-10);
        prop_assert!(c.state.v.max_abs_diff(&d.state.v) <= 1e-10);
        prop_assert!(c.state.x_tilde.max_abs_diff(&d.state.x_tilde) <= 1e-10);
        prop_assert!(c.state.phi_mult.max_abs_diff(&d.state.phi_mult) <= 1e-10);
    }

    #[test]
    fn factors_are_always_nonnegative(seed in any::<u64>(), mu in any::<bool>(), comp in 0usize..3) {
        let mut rng = Rng::new(seed);
        let a = rng.gaussian_matrix(30, 25);
        let compression = [Compression::None, Compression::Gaussian, Compression::Structured][comp];
        let method = if mu { Method::Mu } else { Method::ActiveSet };
        let mut o = NmfOptions::new(3, method, compression, seed);
        o.max_iter = 15;
        let f = nmf_alternating(&a, &o).unwrap();
        prop_assert!(f.x.min_value() >= 0.0 && f.y.min_value() >= 0.0);
    }
}
