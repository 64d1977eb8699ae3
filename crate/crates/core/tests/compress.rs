mod common;

use cnmf_core::compress::{
    compression_error, gaussian_compress, spectral_norm, spectrum, structured_compress, tsqr_compress,
};
use cnmf_core::{CompressionConfig, DenseMatrix, InCore, Norm, Rng};
use proptest::prelude::*;

fn cfg(rank: usize, oversample: usize, power: usize, seed: u64) -> CompressionConfig {
    CompressionConfig {
        rank,
        oversample,
        power,
        seed,
        reorthogonalize: false,
    }
}

fn decaying(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let sigma: Vec<f64> = (0..n.min(m)).map(|j| 0.8f64.powi(j as i32)).collect();
    common::with_spectrum(m, n, &sigma, &mut Rng::new(seed))
}

#[test]
fn expected_error_respects_the_gaussian_bound() {
    let (r, r_ov) = (10, 10);
    let mut mean = 0.0;
    let mut tail = 0.0;
    for seed in 0..20 {
        let a = decaying(200, 100, 100 + seed);
        let basis = structured_compress(&a, cfg(r, r_ov, 0, seed)).unwrap();
        mean += common::projection_residual(&a, &basis.q).frobenius_norm() / 20.0;
        tail += common::tail_energy(&a, r) / 20.0;
    }
    let bound = (1.0 + r as f64 / (r_ov as f64 - 1.0)).sqrt() * tail;
    assert!(mean <= 1.1 * bound, "{mean} > 1.1 * {bound}");
}

#[test]
fn power_passes_shrink_the_spectral_error() {
    let sigma: Vec<f64> = (0..60).map(|j| if j < 10 { 1.0 } else { 0.5 * 0.98f64.powi(j - 10) }).collect();
    let mut wins = 0;
    for seed in 0..20 {
        let a = common::with_spectrum(200, 100, &sigma, &mut Rng::new(seed));
        let e0 = common::spectral_norm(&common::projection_residual(&a, &structured_compress(&a, cfg(10, 2, 0, seed)).unwrap().q));
        let e4 = common::spectral_norm(&common::projection_residual(&a, &structured_compress(&a, cfg(10, 2, 4, seed)).unwrap().q));
        if e4 <= e0 {
            wins += 1;
        }
    }
    assert!(wins >= 18, "w = 4 better in only {wins} of 20 seeds");
}

#[test]
fn error_decreases_with_oversampling() {
    let mut means = Vec::new();
    for r_ov in [2, 5, 10, 20] {
        let mut mean = 0.0;
        for seed in 0..20 {
            let a = decaying(200, 100, 500 + seed);
            let q = structured_compress(&a, cfg(10, r_ov, 0, seed)).unwrap().q;
            mean += common::projection_residual(&a, &q).frobenius_norm();
        }
        means.push(mean / 20.0);
    }
    assert!(means.windows(2).all(|w| w[1] <= w[0]), "{means:?}");
}

#[test]
fn measured_errors_match_the_svd_oracle() {
    let mut rng = Rng::new(9);
    let a = rng.gaussian_matrix(80, 50);
    let basis = structured_compress(&a, cfg(5, 5, 1, 3)).unwrap();
    let resid = common::projection_residual(&a, &basis.q);
    let fro = compression_error(&a, &basis, Norm::Frobenius).unwrap();
    assert!((fro - resid.frobenius_norm()).abs() <= 1e-10 * fro);
    let spec = compression_error(&a, &basis, Norm::Spectral).unwrap();
    let oracle = common::spectral_norm(&resid);
    assert!((spec - oracle).abs() <= 1e-6 * oracle, "{spec} vs {oracle}");
    assert!((spectral_norm(&a) - common::spectral_norm(&a)).abs() <= 1e-6 * common::spectral_norm(&a));
}

#[test]
fn spectrum_report_matches_the_svd_oracle() {
    let a = decaying(60, 40, 4);
    let report = spectrum(&a, 7);
    let oracle = common::svd_values(&a);
    for (s, o) in report.singular_values.iter().zip(&oracle) {
        assert!((s - o).abs() <= 1e-10);
    }
    assert!((report.tail_energy - common::tail_energy(&a, 7)).abs() <= 1e-10);
}

#[test]
fn gaussian_projection_roughly_preserves_norms() {
    let mut rng = Rng::new(77);
    let m = 400;
    let mut ok = 0;
    for trial in 0..100 {
        let q = gaussian_compress(m, 50, trial).unwrap().q;
        let x = rng.gaussian_matrix(m, 1);
        let x = x.scaled(1.0 / x.frobenius_norm());
        let y = q.t_mul(&x).frobenius_norm();
        if (0.7..=1.3).contains(&y) {
            ok += 1;
        }
    }
    assert!(ok >= 95, "{ok} of 100 within 30%");
}

fn shapes() -> impl Strategy<Value = (DenseMatrix, CompressionConfig, usize)> {
    (30usize..90, 25usize..60, 1usize..6, 0usize..8, 0usize..3, any::<u64>(), 5usize..40).prop_map(
        |(m, n, r, r_ov, w, seed, br)| {
            let a = Rng::new(seed).gaussian_matrix(m, n);
            (a, cfg(r, r_ov, w, seed).adjust(m, n).unwrap(), br)
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn basis_is_orthonormal_and_projection_idempotent((a, c, _) in shapes()) {
        let q = structured_compress(&a, c).unwrap().q;
        let s = c.sample_size();
        prop_assert_eq!(q.shape(), (a.rows(), s));
        prop_assert!(q.gram().sub(&DenseMatrix::identity(s)).frobenius_norm() <= 1e-10);
        let once = q.mul(&q.t_mul(&a));
        let twice = q.mul(&q.t_mul(&once));
        prop_assert!(once.sub(&twice).frobenius_norm() <= 1e-12 * a.frobenius_norm().max(1.0));
    }

    #[test]
    fn blocked_and_in_core_bases_agree((a, c, br) in shapes()) {
        let br = br.max(c.sample_size());
        let dense = structured_compress(&a, c).unwrap().q;
        let blocked = tsqr_compress(&InCore::new(a, br).unwrap(), c).unwrap().q;
        prop_assert!(dense.sub(&blocked).frobenius_norm() <= 1e-8);
    }
}
