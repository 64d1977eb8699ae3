use cnmf_core::blocks::collect_dense;
use cnmf_core::synth::{gen_nmf_synthetic, gen_snmf_synthetic, SyntheticKind, SyntheticSpec};

#[test]
fn sparse_factor_density_is_within_the_binomial_band() {
    let delta = 1e-2;
    let spec = SyntheticSpec { m: 20_000, n: 50, r: 10, delta, kind: SyntheticKind::NmfNoisy, seed: 3 };
    let g = gen_nmf_synthetic(spec).unwrap();
    let x = g.x_gt();
    let trials = x.data().len() as f64;
    let nonzero = x.data().iter().filter(|&&v| v != 0.0).count() as f64;
    let sigma = (trials * delta * (1.0 - delta)).sqrt();
    assert!((nonzero - trials * delta).abs() <= 3.0 * sigma, "{nonzero} nonzeros of {trials}");
}

#[test]
fn blocked_generation_matches_in_core() {
    let spec = SyntheticSpec { m: 10_000, n: 100, r: 10, delta: 1.0, kind: SyntheticKind::SnmfGaussian, seed: 8 };
    let in_core = gen_snmf_synthetic(spec).unwrap().to_dense();
    // Blocks of 777 rows, far below a 64 MiB block.
    let blocked = gen_snmf_synthetic(spec).unwrap().with_block_rows(777).unwrap();
    assert_eq!(collect_dense(&blocked).unwrap(), in_core);
}
