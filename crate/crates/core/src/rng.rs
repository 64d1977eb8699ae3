//! Reproducible random variates.
//!
//! The stream is fixed: xoshiro256++ seeded through `SeedableRng::seed_from_u64`,
//! uniforms from the top 53 bits of each output, and standard normals by the
//! Box–Muller transform (both variates of a pair are used, cosine branch
//! first). All transcendental functions come from `libm`, so a seed yields
//! the same bits on every platform.

use rand_core::{Rng as _, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::DenseMatrix;

/// Generator identifier recorded in reports.
pub const ALGORITHM: &str = "xoshiro256++/box-muller";

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh generator for an independent sub-task.
    pub fn child(&self, stream: u64) -> Rng {
        Rng::new(derive_seed(self.seed, stream))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`, by rejection so every value is equally likely.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0);
        let n = n as u64;
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return (x % n) as usize;
            }
        }
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], keeping ln finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = math::sqrt(-2.0 * math::ln(u1));
        let (s, c) = math::sin_cos(core::f64::consts::TAU * u2);
        self.spare = Some(radius * s);
        radius * c
    }

    /// Fills a row-major `rows × cols` matrix with standard normals.
    pub fn gaussian_matrix(&mut self, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| self.normal())
    }

    pub fn uniform_matrix(&mut self, rows: usize, cols: usize) -> DenseMatrix {
        DenseMatrix::from_fn(rows, cols, |_, _| self.uniform())
    }
}

/// `rows × cols` i.i.d. standard normal matrix drawn from a generator seeded with `seed`.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Result<DenseMatrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::arg("gaussian matrix needs nonzero dimensions"));
    }
    Ok(Rng::new(seed).gaussian_matrix(rows, cols))
}

/// SplitMix64 finalizer over `seed ^ stream`; used to give each sub-task
/// (left basis, right basis, initialization, ...) its own stream.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        assert_eq!(gaussian_matrix(4, 3, 7).unwrap(), gaussian_matrix(4, 3, 7).unwrap());
        assert_ne!(gaussian_matrix(4, 3, 7).unwrap(), gaussian_matrix(4, 3, 8).unwrap());
    }

    #[test]
    fn shapes_follow_arguments() {
        assert_eq!(gaussian_matrix(3, 2, 1).unwrap().shape(), (3, 2));
        assert_eq!(gaussian_matrix(2, 3, 1).unwrap().shape(), (2, 3));
    }

    #[test]
    fn zero_dimension_is_rejected() {
        assert!(matches!(gaussian_matrix(0, 3, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(gaussian_matrix(3, 0, 1), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn moments_over_twenty_seeds() {
        for seed in 0..20 {
            let g = gaussian_matrix(100, 100, seed).unwrap();
            let n = g.data().len() as f64;
            let mean = g.data().iter().sum::<f64>() / n;
            let var = g.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            assert!(mean.abs() <= 0.05, "seed {seed}: mean {mean}");
            assert!((0.9..=1.1).contains(&var), "seed {seed}: var {var}");
        }
    }

    #[test]
    fn uniform_range_and_below() {
        let mut rng = Rng::new(3);
        for _ in 0..1000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
            assert!(rng.below(7) < 7);
        }
    }
}
