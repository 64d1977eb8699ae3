use alloc::vec::Vec;

use super::{check_rank, converged, mu_update, objective_from_products, relative_error};
use super::{Compression, FactorPair, Method};
use crate::blocks::{frobenius_norm_sq_blocked, matmul_blocked, t_matmul_blocked, RowBlocks};
use crate::compress::{
    gaussian_compress, structured_compress, structured_compress_transpose, CompressionConfig,
};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::nnls::{nnls_gram, DEFAULT_TOL};
use crate::rng::{derive_seed, Rng};

/// Options of [`nmf_alternating`].
#[derive(Clone, Debug)]
pub struct NmfOptions {
    pub method: Method,
    pub compression: Compression,
    /// Rank, seed, oversampling and power exponent. The rank is the
    /// factorization rank; the remaining fields only matter when compressing,
    /// except the seed, which also drives initialization.
    pub config: CompressionConfig,
    pub max_iter: usize,
    /// Stop once the relative objective change falls below this.
    pub tol: f64,
    /// Starting `Y` (`r × n`, nonnegative); uniform `[0, 1]` when absent.
    pub init_y: Option<DenseMatrix>,
    pub nnls_tol: f64,
}

impl NmfOptions {
    pub fn new(rank: usize, method: Method, compression: Compression, seed: u64) -> Self {
        NmfOptions {
            method,
            compression,
            config: CompressionConfig::nmf_defaults(rank, seed),
            max_iter: 500,
            tol: 1e-5,
            init_y: None,
            nnls_tol: DEFAULT_TOL,
        }
    }
}

/// Stream indices for [`derive_seed`]; fixed so that runs are reproducible.
pub(crate) const INIT_STREAM: u64 = 1;
pub(crate) const LEFT_STREAM: u64 = 2;
pub(crate) const RIGHT_STREAM: u64 = 3;

/// What the iterations see in place of `A`.
enum Target {
    /// `Ǎ = A Rᵀ` (`m × s`), `Â = Lᵀ A` (`s × n`), `L` and `Rᵀ`.
    Compressed {
        a_check: DenseMatrix,
        a_hat: DenseMatrix,
        l: DenseMatrix,
        rt: DenseMatrix,
        a_hat_norm_sq: f64,
    },
    Raw {
        norm_sq: f64,
    },
}

/// `L` and `Rᵀ` for the compressed drivers.
pub(crate) fn compression_pair<S: RowBlocks>(
    a: &S,
    compression: Compression,
    cfg: CompressionConfig,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let (m, n) = (a.rows(), a.cols());
    let cfg = cfg.adjust(m, n)?;
    let left = CompressionConfig {
        seed: derive_seed(cfg.seed, LEFT_STREAM),
        ..cfg
    };
    let right = CompressionConfig {
        seed: derive_seed(cfg.seed, RIGHT_STREAM),
        ..cfg
    };
    match compression {
        Compression::Structured => Ok((
            structured_compress(a, left)?.q,
            structured_compress_transpose(a, right)?.q,
        )),
        Compression::Gaussian => {
            let s = cfg.sample_size();
            Ok((
                gaussian_compress(m, s, left.seed)?.q,
                gaussian_compress(n, s, right.seed)?.q,
            ))
        }
        Compression::None => Err(Error::arg("no compression requested")),
    }
}

/// Alternating NMF with multiplicative or active-set updates.
///
/// Compressed runs iterate on `Ǎ` and `Â` only and report the
/// compressed-space objective; the true relative error is computed once at
/// the end with one pass over `A`.
pub fn nmf_alternating<S: RowBlocks>(a: &S, opts: &NmfOptions) -> Result<FactorPair> {
    let (m, n) = (a.rows(), a.cols());
    let r = opts.config.rank;
    check_rank(r, m, n)?;
    if !(opts.tol >= 0.0) {
        return Err(Error::arg("tolerance must be nonnegative"));
    }
    let mut rng = Rng::new(derive_seed(opts.config.seed, INIT_STREAM));
    let mut y = match &opts.init_y {
        Some(y0) => {
            if y0.shape() != (r, n) {
                return Err(Error::dims("initial Y must be r x n"));
            }
            if y0.min_value() < 0.0 || !y0.is_finite() {
                return Err(Error::arg("initial Y must be finite and nonnegative"));
            }
            y0.clone()
        }
        None => rng.uniform_matrix(r, n),
    };
    let mut x = rng.uniform_matrix(m, r);

    let target = match opts.compression {
        Compression::None => Target::Raw {
            norm_sq: frobenius_norm_sq_blocked(a)?,
        },
        kind => {
            let (l, rt) = compression_pair(a, kind, opts.config)?;
            let a_check = matmul_blocked(a, &rt)?;
            let a_hat = t_matmul_blocked(a, &l)?.transpose();
            let a_hat_norm_sq = a_hat.frobenius_norm_sq();
            Target::Compressed {
                a_check,
                a_hat,
                l,
                rt,
                a_hat_norm_sq,
            }
        }
    };

    let mut trace = Vec::new();
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        // X step: P = (effective A) (effective Y)ᵀ, G = (effective Y)(effective Y)ᵀ.
        let (p, g) = match &target {
            Target::Raw { .. } => (matmul_blocked(a, &y.transpose())?, y.gram_rows()),
            Target::Compressed { a_check, rt, .. } => {
                let yt = y.mul(rt);
                (a_check.mul_t(&yt), yt.gram_rows())
            }
        };
        x = match opts.method {
            Method::Mu => mu_update(&x, &p, &g),
            Method::ActiveSet => {
                nnls_gram(&g, &p.transpose(), opts.nnls_tol).map(|h| h.transpose())
            }
        }
        .map_err(|e| e.at_iteration(it))?;

        // Y step: P = (effective X)ᵀ (effective A), G = (effective X)ᵀ(effective X).
        let (p, g, norm_sq) = match &target {
            Target::Raw { norm_sq } => (t_matmul_blocked(a, &x)?.transpose(), x.gram(), *norm_sq),
            Target::Compressed {
                a_hat,
                l,
                a_hat_norm_sq,
                ..
            } => {
                let xh = l.t_mul(&x);
                (xh.t_mul(a_hat), xh.gram(), *a_hat_norm_sq)
            }
        };
        y = match opts.method {
            Method::Mu => mu_update(&y.transpose(), &p.transpose(), &g).map(|v| v.transpose()),
            Method::ActiveSet => nnls_gram(&g, &p, opts.nnls_tol),
        }
        .map_err(|e| e.at_iteration(it))?;

        let f = objective_from_products(norm_sq, &p, &g, &y);
        if !f.is_finite() {
            return Err(Error::NonFinite("objective".into()).at_iteration(it));
        }
        iterations = it + 1;
        let stop = trace.last().is_some_and(|&prev| converged(prev, f, opts.tol));
        trace.push(f);
        if stop || f == 0.0 {
            break;
        }
    }
    let relative_error = relative_error(a, &x, &y)?;
    Ok(FactorPair {
        x,
        y,
        iterations,
        objective_trace: trace,
        relative_error,
    })
}
