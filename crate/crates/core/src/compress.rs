//! Structured random compression and the Gaussian-projection baseline.
//!
//! A structured basis is an orthonormal `Q` for the range of
//! `B = (A Aᵀ)^w A Ω`, where `Ω` is an `n × s` Gaussian test matrix and
//! `s = r + r_ov`. Power iterations are evaluated as `Z ← Aᵀ(A Z)` starting
//! from `Z = Ω`, so a pass over `A` only ever holds the `n × s` iterate, and
//! the final `B = A Z` is either formed in memory or streamed straight into
//! TSQR.

use alloc::format;
use alloc::vec::Vec;

use crate::blocks::{gram_apply_blocked, BlockScratch, DenseSink, MemoryScratch, RowBlocks, RowSink};
use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::matrix::DenseMatrix;
use crate::rng::Rng;
use crate::tsqr::{self, BlockLayout, TsqrOptions};

/// Parameters of the randomized range finder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CompressionConfig {
    /// Target rank `r`.
    pub rank: usize,
    /// Oversampling `r_ov`.
    pub oversample: usize,
    /// Power exponent `w`.
    pub power: usize,
    pub seed: u64,
    /// Orthonormalize the `n × s` iterate after every power pass.
    pub reorthogonalize: bool,
}

impl CompressionConfig {
    /// `w = 4`, `r_ov = 10`.
    pub fn nmf_defaults(rank: usize, seed: u64) -> Self {
        Self {
            rank,
            oversample: 10,
            power: 4,
            seed,
            reorthogonalize: false,
        }
    }

    /// `w = 0`, `r_ov = 10`.
    pub fn snmf_defaults(rank: usize, seed: u64) -> Self {
        Self {
            power: 0,
            ..Self::nmf_defaults(rank, seed)
        }
    }

    /// Number of basis columns `s = r + r_ov`.
    pub fn sample_size(&self) -> usize {
        self.rank + self.oversample
    }

    /// Resizes the oversampling so that `r + r_ov = min(max(20, r + r_ov), n)`,
    /// additionally capped at `m` so the basis fits an `m × n` matrix.
    pub fn adjust(self, m: usize, n: usize) -> Result<Self> {
        if self.rank == 0 {
            return Err(Error::arg("target rank must be at least 1"));
        }
        if self.rank >= m.min(n) {
            return Err(Error::InfeasibleRank {
                rank: self.rank,
                rows: m,
                cols: n,
            });
        }
        let s = self.sample_size().max(20).min(n).min(m);
        Ok(Self {
            oversample: s - self.rank,
            ..self
        })
    }

    fn check_fits(&self, m: usize, n: usize) -> Result<()> {
        if self.rank == 0 || self.sample_size() > m.min(n) {
            return Err(Error::InfeasibleRank {
                rank: self.sample_size(),
                rows: m,
                cols: n,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompressionKind {
    Structured,
    Gaussian,
}

/// A compression matrix `Q` (`m × s`) together with how it was made.
#[derive(Clone, Debug)]
pub struct CompressionBasis {
    pub q: DenseMatrix,
    pub kind: CompressionKind,
    pub config: CompressionConfig,
}

impl CompressionBasis {
    pub fn size(&self) -> usize {
        self.q.cols()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    Frobenius,
    Spectral,
}

/// Structured random compression of `A` (`m × n`) to an `m × s` orthonormal basis.
///
/// In-memory inputs use one dense QR of `B`; anything else goes through
/// [`tsqr_compress`]. `cfg` is expected to be adjusted already.
pub fn structured_compress<S: RowBlocks>(a: &S, cfg: CompressionConfig) -> Result<CompressionBasis> {
    cfg.check_fits(a.rows(), a.cols())?;
    let Some(dense) = a.as_dense() else {
        return tsqr_compress(a, cfg);
    };
    let z = sketch_right(a, &cfg)?;
    let b = dense.mul(&z);
    b.ensure_finite("range sample A Z")?;
    Ok(CompressionBasis {
        q: linalg::orthonormalize(&b),
        kind: CompressionKind::Structured,
        config: cfg,
    })
}

/// Out-of-core structured compression with the basis collected in memory.
pub fn tsqr_compress<S: RowBlocks>(a: &S, cfg: CompressionConfig) -> Result<CompressionBasis> {
    let mut scratch = MemoryScratch::new();
    let mut sink = DenseSink::new(cfg.sample_size());
    tsqr_compress_into(a, cfg, &mut scratch, &mut sink, TsqrOptions::default())?;
    Ok(CompressionBasis {
        q: sink.into_matrix(),
        kind: CompressionKind::Structured,
        config: cfg,
    })
}

/// Out-of-core structured compression: `B_i = A_i Z` is computed block by
/// block and fed to TSQR, so `B` never exists as a whole. The basis rows
/// are streamed into `q_sink`.
pub fn tsqr_compress_into<S, Sc, K>(
    a: &S,
    cfg: CompressionConfig,
    scratch: &mut Sc,
    q_sink: &mut K,
    opts: TsqrOptions,
) -> Result<()>
where
    S: RowBlocks,
    Sc: BlockScratch + ?Sized,
    K: RowSink + ?Sized,
{
    cfg.check_fits(a.rows(), a.cols())?;
    let z = sketch_right(a, &cfg)?;
    let layout = BlockLayout {
        rows: a.rows(),
        cols: cfg.sample_size(),
        blocks: (0..a.num_blocks()).map(|i| a.block_range(i).1).collect(),
    };
    tsqr::tsqr_blocks(
        &layout,
        |i| Ok(a.read_block(i)?.mul(&z)),
        Some(scratch),
        Some(q_sink),
        opts,
    )?;
    Ok(())
}

/// `Z = (AᵀA)^w Ω`, the right-hand factor of `B = A Z`.
fn sketch_right<S: RowBlocks>(a: &S, cfg: &CompressionConfig) -> Result<DenseMatrix> {
    let mut z = Rng::new(cfg.seed).gaussian_matrix(a.cols(), cfg.sample_size());
    for pass in 0..cfg.power {
        z = gram_apply_blocked(a, &z)?;
        z.ensure_finite(&format!("power iteration pass {}", pass + 1))?;
        if cfg.reorthogonalize {
            z = linalg::orthonormalize(&z);
        }
    }
    Ok(z)
}

/// Structured compression of `Aᵀ`: an `n × s` orthonormal basis for the
/// range of `(AᵀA)^w Aᵀ Ω`, with `Ω` an `m × s` Gaussian drawn row by row
/// alongside the blocks of `A`.
pub fn structured_compress_transpose<S: RowBlocks>(
    a: &S,
    cfg: CompressionConfig,
) -> Result<CompressionBasis> {
    cfg.check_fits(a.rows(), a.cols())?;
    let s = cfg.sample_size();
    let mut rng = Rng::new(cfg.seed);
    let mut y = DenseMatrix::zeros(a.cols(), s);
    for block in a.blocks() {
        let (_, block) = block?;
        let omega = rng.gaussian_matrix(block.rows(), s);
        block.t_mul_acc(&omega, &mut y);
    }
    y.ensure_finite("range sample Aᵀ Ω")?;
    for pass in 0..cfg.power {
        y = gram_apply_blocked(a, &y)?;
        y.ensure_finite(&format!("power iteration pass {}", pass + 1))?;
        if cfg.reorthogonalize {
            y = linalg::orthonormalize(&y);
        }
    }
    Ok(CompressionBasis {
        q: linalg::orthonormalize(&y),
        kind: CompressionKind::Structured,
        config: cfg,
    })
}

/// Gaussian compression `Q_Ω = s^{-1/2} Ω` with `Ω` an `m × s` Gaussian.
pub fn gaussian_compress(m: usize, s: usize, seed: u64) -> Result<CompressionBasis> {
    if m == 0 || s == 0 {
        return Err(Error::arg("gaussian compression needs m, s >= 1"));
    }
    let mut q = Rng::new(seed).gaussian_matrix(m, s);
    q.scale(1.0 / math::sqrt(s as f64));
    Ok(CompressionBasis {
        q,
        kind: CompressionKind::Gaussian,
        config: CompressionConfig {
            rank: s,
            oversample: 0,
            power: 0,
            seed,
            reorthogonalize: false,
        },
    })
}

/// `‖A − Q Qᵀ A‖` in the requested norm.
pub fn compression_error(a: &DenseMatrix, basis: &CompressionBasis, norm: Norm) -> Result<f64> {
    if basis.q.rows() != a.rows() {
        return Err(Error::dims(format!(
            "basis has {} rows, matrix has {}",
            basis.q.rows(),
            a.rows()
        )));
    }
    let residual = a.sub(&basis.q.mul(&basis.q.t_mul(a)));
    Ok(match norm {
        Norm::Frobenius => residual.frobenius_norm(),
        Norm::Spectral => spectral_norm(&residual),
    })
}

/// Largest singular value by block power iteration on `EᵀE` with a
/// Rayleigh–Ritz estimate: at most 100 steps, relative tolerance 1e-6.
pub fn spectral_norm(e: &DenseMatrix) -> f64 {
    const MAX_STEPS: usize = 100;
    const TOL: f64 = 1e-6;
    let n = e.cols();
    if n == 0 || e.rows() == 0 {
        return 0.0;
    }
    let width = n.min(6);
    let mut v = linalg::orthonormalize(&Rng::new(0x5eed_cafe).gaussian_matrix(n, width));
    let mut estimate = 0.0;
    for _ in 0..MAX_STEPS {
        let ev = e.mul(&v);
        let ritz = linalg::symmetric_eigenvalues(&ev.gram());
        let next = math::sqrt(ritz[0].max(0.0));
        let done = (next - estimate).abs() <= TOL * next;
        estimate = next;
        if done || next == 0.0 {
            break;
        }
        v = linalg::orthonormalize(&e.t_mul(&ev));
    }
    estimate
}

/// Singular values of a small matrix and the tail energy beyond rank `r`.
#[derive(Clone, Debug)]
pub struct SpectrumReport {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// `(Σ_{j>r} σ_j²)^{1/2}`.
    pub tail_energy: f64,
}

pub fn spectrum(a: &DenseMatrix, rank: usize) -> SpectrumReport {
    let singular_values = linalg::singular_values(a);
    let tail: f64 = singular_values.iter().skip(rank).map(|s| s * s).sum();
    SpectrumReport {
        singular_values,
        rank,
        tail_energy: math::sqrt(tail),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::InCore;

    fn cfg(rank: usize, oversample: usize, power: usize, seed: u64) -> CompressionConfig {
        CompressionConfig {
            rank,
            oversample,
            power,
            seed,
            reorthogonalize: false,
        }
    }

    #[test]
    fn adjustment_rule() {
        let c = cfg(5, 10, 0, 1).adjust(5000, 1000).unwrap();
        assert_eq!((c.sample_size(), c.oversample), (20, 15));
        let c = cfg(5, 10, 0, 1).adjust(5000, 12).unwrap();
        assert_eq!((c.sample_size(), c.oversample), (12, 7));
        let c = cfg(30, 10, 0, 1).adjust(5000, 1000).unwrap();
        assert_eq!(c.sample_size(), 40);
        let c = cfg(5, 10, 0, 1).adjust(9, 1000).unwrap();
        assert_eq!(c.sample_size(), 9);
    }

    #[test]
    fn infeasible_rank() {
        assert!(matches!(
            cfg(10, 5, 0, 1).adjust(10, 50),
            Err(Error::InfeasibleRank { .. })
        ));
        assert!(matches!(cfg(0, 5, 0, 1).adjust(10, 50), Err(Error::InvalidArgument(_))));
        let a = DenseMatrix::zeros(10, 10);
        assert!(matches!(
            structured_compress(&a, cfg(5, 10, 0, 1)),
            Err(Error::InfeasibleRank { .. })
        ));
    }

    #[test]
    fn exact_rank_is_captured() {
        let mut rng = Rng::new(1);
        let a = rng.uniform_matrix(60, 5).mul(&rng.uniform_matrix(5, 40));
        for power in [0, 2] {
            let basis = structured_compress(&a, cfg(5, 5, power, 7)).unwrap();
            let q = &basis.q;
            assert!(q.gram().sub(&DenseMatrix::identity(10)).frobenius_norm() <= 1e-10);
            let err = compression_error(&a, &basis, Norm::Frobenius).unwrap();
            assert!(err <= 1e-8 * a.frobenius_norm(), "w={power}: {err}");
        }
    }

    #[test]
    fn in_core_and_blocked_agree() {
        let a = Rng::new(2).gaussian_matrix(300, 40);
        for (power, reorth) in [(0, false), (1, false), (2, true)] {
            let c = CompressionConfig {
                reorthogonalize: reorth,
                ..cfg(5, 5, power, 3)
            };
            let dense = structured_compress(&a, c).unwrap();
            let blocked = tsqr_compress(&InCore::new(a.clone(), 64).unwrap(), c).unwrap();
            assert!(dense.q.sub(&blocked.q).frobenius_norm() <= 1e-8);
        }
    }

    #[test]
    fn transpose_basis_spans_row_space() {
        let mut rng = Rng::new(4);
        let a = rng.uniform_matrix(50, 4).mul(&rng.uniform_matrix(4, 30));
        let basis = structured_compress_transpose(&InCore::new(a.clone(), 7).unwrap(), cfg(4, 6, 1, 9)).unwrap();
        assert_eq!(basis.q.shape(), (30, 10));
        let at = a.transpose();
        assert!(compression_error(&at, &basis, Norm::Frobenius).unwrap() <= 1e-8 * a.frobenius_norm());
        // Blocked and single-block draws of Ω coincide.
        let single = structured_compress_transpose(&a, cfg(4, 6, 1, 9)).unwrap();
        assert!(single.q.sub(&basis.q).frobenius_norm() <= 1e-10);
    }

    #[test]
    fn projection_is_idempotent() {
        let a = Rng::new(5).gaussian_matrix(80, 30);
        let q = structured_compress(&a, cfg(5, 5, 0, 1)).unwrap().q;
        let once = q.mul(&q.t_mul(&a));
        let twice = q.mul(&q.t_mul(&once));
        assert!(once.sub(&twice).frobenius_norm() <= 1e-12 * a.frobenius_norm());
    }

    #[test]
    fn error_fixpoints() {
        let mut rng = Rng::new(6);
        let q = linalg::orthonormalize(&rng.gaussian_matrix(40, 6));
        let basis = CompressionBasis {
            q: q.clone(),
            kind: CompressionKind::Structured,
            config: cfg(3, 3, 0, 0),
        };
        let inside = q.mul(&rng.gaussian_matrix(6, 9));
        assert!(compression_error(&inside, &basis, Norm::Frobenius).unwrap() <= 1e-10);
        assert!(compression_error(&inside, &basis, Norm::Spectral).unwrap() <= 1e-10);
        let g = rng.gaussian_matrix(40, 9);
        let outside = g.sub(&q.mul(&q.t_mul(&g)));
        let err = compression_error(&outside, &basis, Norm::Frobenius).unwrap();
        assert!((err - outside.frobenius_norm()).abs() <= 1e-12 * err);
        assert!(compression_error(&DenseMatrix::zeros(39, 2), &basis, Norm::Frobenius).is_err());
    }

    #[test]
    fn gaussian_basis_scaling() {
        let b = gaussian_compress(500, 50, 3).unwrap();
        assert_eq!(b.kind, CompressionKind::Gaussian);
        assert_eq!(b.q, gaussian_compress(500, 50, 3).unwrap().q);
        let raw = Rng::new(3).gaussian_matrix(500, 50);
        assert!(b.q.sub(&raw.scaled(1.0 / math::sqrt(50.0))).max_abs() <= 1e-15);
        assert!(gaussian_compress(5, 0, 1).is_err());
    }
}
