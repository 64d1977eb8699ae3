mod common;

use cnmf_core::tsqr::tsqr;
use cnmf_core::{DenseMatrix, InCore, Rng};
use proptest::prelude::*;

fn check_against_oracle(a: &DenseMatrix, block_rows: usize, tol: f64) {
    let res = tsqr(&InCore::new(a.clone(), block_rows).unwrap()).unwrap();
    let n = a.cols();
    assert!(res.q.gram().sub(&DenseMatrix::identity(n)).frobenius_norm() <= tol);
    assert!(res.q.mul(&res.r).sub(a).frobenius_norm() <= tol * a.frobenius_norm());
    for i in 0..n {
        for j in 0..i {
            assert_eq!(res.r[(i, j)], 0.0);
        }
    }
    // nalgebra's R, rows flipped to a nonnegative diagonal.
    let mut oracle = common::from_na(&common::to_na(a).qr().r());
    for i in 0..n {
        if oracle[(i, i)] < 0.0 {
            oracle.row_mut(i).iter_mut().for_each(|v| *v = -*v);
        }
    }
    assert!(res.r.sub(&oracle).frobenius_norm() <= tol * oracle.frobenius_norm());
}

#[test]
fn tall_blocked_matrix() {
    let a = Rng::new(1).gaussian_matrix(10_000, 20);
    check_against_oracle(&a, 512, 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_valid_partition_works(n in 1usize..12, extra in 0usize..200, br_extra in 0usize..60, seed in any::<u64>()) {
        let m = n + extra;
        let a = Rng::new(seed).gaussian_matrix(m, n);
        check_against_oracle(&a, n + br_extra, 1e-11);
    }
}
