//! Synthetic inputs and the biclustering threshold.
//!
//! Every row of a generated matrix draws from its own stream derived from
//! the seed, so any row block can be regenerated independently and a blocked
//! consumer sees exactly the matrix an in-core consumer would.

use alloc::vec;
use alloc::vec::Vec;

use crate::blocks::RowBlocks;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::DenseMatrix;
use crate::rng::{derive_seed, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// `A = X Y + N`; factor entries uniform `[0, 1]` with probability `δ`,
    /// noise entries standard normal with probability `δ²`.
    NmfNoisy,
    /// `A = X Y` with standard normal factors.
    SnmfGaussian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub delta: f64,
    pub kind: SyntheticKind,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.r == 0 {
            return Err(Error::arg("synthetic dimensions must be positive"));
        }
        if self.r > self.m.min(self.n) {
            return Err(Error::InfeasibleRank {
                rank: self.r,
                rows: self.m,
                cols: self.n,
            });
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::arg("density must lie in (0, 1]"));
        }
        Ok(())
    }
}

const FACTOR_STREAM: u64 = 0;
const ROW_STREAM_BASE: u64 = 1;

/// A generated matrix that produces its rows on demand.
#[derive(Clone, Debug)]
pub struct Synthetic {
    spec: SyntheticSpec,
    y_gt: DenseMatrix,
    block_rows: usize,
}

impl Synthetic {
    pub fn spec(&self) -> &SyntheticSpec {
        &self.spec
    }

    pub fn y_gt(&self) -> &DenseMatrix {
        &self.y_gt
    }

    /// Same matrix, different row partition.
    pub fn with_block_rows(mut self, block_rows: usize) -> Result<Self> {
        if block_rows == 0 {
            return Err(Error::arg("block_rows must be positive"));
        }
        self.block_rows = block_rows;
        Ok(self)
    }

    /// Row `i` of `X_gt` and row `i` of `A`.
    fn row(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let s = &self.spec;
        let mut rng = Rng::new(derive_seed(s.seed, ROW_STREAM_BASE + i as u64));
        let x: Vec<f64> = match s.kind {
            SyntheticKind::NmfNoisy => (0..s.r).map(|_| sparse_uniform(&mut rng, s.delta)).collect(),
            SyntheticKind::SnmfGaussian => (0..s.r).map(|_| rng.normal()).collect(),
        };
        let mut a = vec![0.0; s.n];
        for (k, &xk) in x.iter().enumerate() {
            if xk != 0.0 {
                crate::matrix::axpy(xk, self.y_gt.row(k), &mut a);
            }
        }
        if s.kind == SyntheticKind::NmfNoisy {
            let p = s.delta * s.delta;
            for v in a.iter_mut() {
                if rng.uniform() < p {
                    *v += rng.normal();
                }
            }
        }
        (x, a)
    }

    /// `X_gt` (`m × r`).
    pub fn x_gt(&self) -> DenseMatrix {
        let mut x = DenseMatrix::zeros(self.spec.m, self.spec.r);
        for i in 0..self.spec.m {
            x.row_mut(i).copy_from_slice(&self.row(i).0);
        }
        x
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut a = DenseMatrix::zeros(self.spec.m, self.spec.n);
        for i in 0..self.spec.m {
            a.row_mut(i).copy_from_slice(&self.row(i).1);
        }
        a
    }
}

impl RowBlocks for Synthetic {
    fn rows(&self) -> usize {
        self.spec.m
    }

    fn cols(&self) -> usize {
        self.spec.n
    }

    fn block_rows(&self) -> usize {
        self.block_rows
    }

    fn read_rows(&self, start: usize, count: usize) -> Result<DenseMatrix> {
        if start + count > self.spec.m {
            return Err(Error::arg("row range past the end of the matrix"));
        }
        let mut out = DenseMatrix::zeros(count, self.spec.n);
        for i in 0..count {
            out.row_mut(i).copy_from_slice(&self.row(start + i).1);
        }
        Ok(out)
    }
}

fn sparse_uniform(rng: &mut Rng, delta: f64) -> f64 {
    if delta >= 1.0 || rng.uniform() < delta {
        rng.uniform()
    } else {
        0.0
    }
}

fn generate(spec: SyntheticSpec, kind: SyntheticKind) -> Result<Synthetic> {
    spec.validate()?;
    if spec.kind != kind {
        return Err(Error::arg("generator does not match the spec kind"));
    }
    let mut rng = Rng::new(derive_seed(spec.seed, FACTOR_STREAM));
    let y_gt = match kind {
        SyntheticKind::NmfNoisy => DenseMatrix::from_fn(spec.r, spec.n, |_, _| sparse_uniform(&mut rng, spec.delta)),
        SyntheticKind::SnmfGaussian => rng.gaussian_matrix(spec.r, spec.n),
    };
    Ok(Synthetic {
        spec,
        y_gt,
        block_rows: spec.m,
    })
}

/// Noisy sparse NMF test matrix. Negative entries introduced by the noise
/// are kept.
pub fn gen_nmf_synthetic(spec: SyntheticSpec) -> Result<Synthetic> {
    generate(spec, SyntheticKind::NmfNoisy)
}

/// Exact-rank product of two standard normal factors.
pub fn gen_snmf_synthetic(spec: SyntheticSpec) -> Result<Synthetic> {
    generate(spec, SyntheticKind::SnmfGaussian)
}

/// A separable matrix `A = W H + noise · N` with its construction.
#[derive(Clone, Debug)]
pub struct Separable {
    pub a: DenseMatrix,
    /// `k[p]` is the column of `A` equal to (noiseless) column `p` of `W`.
    pub k: Vec<usize>,
    pub w: DenseMatrix,
    pub h: DenseMatrix,
}

/// `W` uniform `[0, 1]` (`m × r`); `H` holds an identity block at `K` and
/// random convex combinations elsewhere.
pub fn gen_separable_synthetic(m: usize, n: usize, r: usize, noise: f64, seed: u64) -> Result<Separable> {
    if m == 0 || r == 0 || r > n {
        return Err(Error::arg("separable generator needs 1 <= r <= n and m >= 1"));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(Error::arg("noise level must be finite and nonnegative"));
    }
    let mut rng = Rng::new(seed);
    let w = rng.uniform_matrix(m, r);
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..r {
        let j = i + rng.below(n - i);
        perm.swap(i, j);
    }
    let k = perm[..r].to_vec();
    let mut h = DenseMatrix::zeros(r, n);
    let mut pos = vec![usize::MAX; n];
    for (p, &j) in k.iter().enumerate() {
        pos[j] = p;
    }
    for j in 0..n {
        if pos[j] != usize::MAX {
            h[(pos[j], j)] = 1.0;
            continue;
        }
        let weights: Vec<f64> = (0..r).map(|_| rng.uniform()).collect();
        let total: f64 = weights.iter().sum();
        for (i, wt) in weights.into_iter().enumerate() {
            h[(i, j)] = wt / total;
        }
    }
    let mut a = w.mul(&h);
    if noise > 0.0 {
        a.axpy(noise, &rng.gaussian_matrix(m, n));
    }
    Ok(Separable { a, k, w, h })
}

/// Entries of `values` strictly below mean + 3·std (population) become zero.
fn threshold_line(values: &mut [f64]) {
    let len = values.len() as f64;
    // Shifted by the first entry so that a constant line has exactly zero spread.
    let shift = values[0];
    let mean = shift + values.iter().map(|v| v - shift).sum::<f64>() / len;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len;
    let cut = mean + 3.0 * math::sqrt(var);
    values.iter_mut().filter(|v| **v < cut).for_each(|v| *v = 0.0);
}

/// Zero everything but the `top` largest entries; ties keep the lower index.
fn keep_largest(values: &mut [f64], top: usize) {
    let mut idx: Vec<usize> = (0..values.len()).filter(|&i| values[i] != 0.0).collect();
    if idx.len() <= top {
        return;
    }
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    for &i in &idx[top..] {
        values[i] = 0.0;
    }
}

/// Biclustering postprocess: per column of `X` and per row of `Y`, zero the
/// entries below mean + 3·std; then keep at most `top` entries per column of `X`.
pub fn threshold_factors(x: &DenseMatrix, y: &DenseMatrix, top: usize) -> (DenseMatrix, DenseMatrix) {
    let mut xt = x.transpose();
    for j in 0..xt.rows() {
        let col = xt.row_mut(j);
        if col.is_empty() {
            continue;
        }
        threshold_line(col);
        keep_largest(col, top);
    }
    let mut y = y.clone();
    for i in 0..y.rows() {
        if y.cols() > 0 {
            threshold_line(y.row_mut(i));
        }
    }
    (xt.transpose(), y)
}
