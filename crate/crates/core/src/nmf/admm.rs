//! ADMM on the split problem
//! `min ½‖Ã − X̃ Ỹ‖² s.t. L X̃ = U, Ỹ R = V, U, V ≥ 0`.
//!
//! With `L = I`, `R = I` and `Ã = A` this is the uncompressed problem, which
//! [`admm_direct`] solves without ever forming identity matrices.

use alloc::vec::Vec;

use super::alternating::{compression_pair, INIT_STREAM};
use super::{check_rank, objective_from_products, relative_error, Compression, FactorPair};
use crate::blocks::{frobenius_norm_sq_blocked, matmul_blocked, RowBlocks};
use crate::compress::CompressionConfig;
use crate::error::{Error, Result};
use crate::linalg::{solve_spd, solve_spd_right};
use crate::math;
use crate::matrix::DenseMatrix;
use crate::rng::{derive_seed, Rng};

/// Penalties, step scale and stopping rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdmmParams {
    pub lambda: f64,
    pub phi: f64,
    pub xi: f64,
    pub max_iter: usize,
    /// Stop once the largest KKT residual falls below this.
    pub tol: f64,
}

impl Default for AdmmParams {
    fn default() -> Self {
        AdmmParams {
            lambda: 1.0,
            phi: 1.0,
            xi: 1.0,
            max_iter: 500,
            tol: 1e-5,
        }
    }
}

impl AdmmParams {
    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.phi > 0.0 && self.xi > 0.0) {
            return Err(Error::arg("ADMM penalties and step scale must be positive"));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::arg("ADMM tolerance must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct AdmmOptions {
    pub config: CompressionConfig,
    pub compressed: bool,
    pub params: AdmmParams,
}

impl AdmmOptions {
    pub fn new(rank: usize, compressed: bool, seed: u64) -> Self {
        AdmmOptions {
            config: CompressionConfig::nmf_defaults(rank, seed),
            compressed,
            params: AdmmParams::default(),
        }
    }
}

/// Iterates of the split problem.
#[derive(Clone, Debug)]
pub struct AdmmState {
    /// `s × r` (`m × r` uncompressed).
    pub x_tilde: DenseMatrix,
    /// `r × s` (`r × n` uncompressed).
    pub y_tilde: DenseMatrix,
    /// `m × r`, nonnegative.
    pub u: DenseMatrix,
    /// `r × n`, nonnegative.
    pub v: DenseMatrix,
    /// `Λ`, `m × r`.
    pub lambda_mult: DenseMatrix,
    /// `Φ`, `r × n`.
    pub phi_mult: DenseMatrix,
    pub lambda: f64,
    pub phi: f64,
    pub xi: f64,
}

/// Frobenius norms of the six KKT conditions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct KktResidual {
    /// `(X̃Ỹ − Ã)Ỹᵀ + LᵀΛ`.
    pub stationarity_x: f64,
    /// `X̃ᵀ(X̃Ỹ − Ã) + ΦRᵀ`.
    pub stationarity_y: f64,
    /// `L X̃ − U`.
    pub feasibility_u: f64,
    /// `Ỹ R − V`.
    pub feasibility_v: f64,
    /// `‖Λ ∘ U‖ + ‖Λ⁺‖ + ‖U⁻‖`.
    pub complementarity_u: f64,
    /// `‖Φ ∘ V‖ + ‖Φ⁺‖ + ‖V⁻‖`.
    pub complementarity_v: f64,
}

impl KktResidual {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.stationarity_x,
            self.stationarity_y,
            self.feasibility_u,
            self.feasibility_v,
            self.complementarity_u,
            self.complementarity_v,
        ]
    }

    /// The convergence score.
    pub fn max(&self) -> f64 {
        self.as_array().into_iter().fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct AdmmResult {
    pub state: AdmmState,
    pub residual: KktResidual,
    pub iterations: usize,
    pub converged: bool,
    /// `‖Ã − X̃Ỹ‖_F²` per iteration.
    pub objective_trace: Vec<f64>,
    /// Max KKT residual per iteration.
    pub kkt_trace: Vec<f64>,
}

fn complementarity(mult: &DenseMatrix, primal: &DenseMatrix) -> f64 {
    let (mut prod, mut pos, mut neg) = (0.0, 0.0, 0.0);
    for (&l, &u) in mult.data().iter().zip(primal.data()) {
        prod += (l * u) * (l * u);
        pos += l.max(0.0) * l.max(0.0);
        neg += u.min(0.0) * u.min(0.0);
    }
    math::sqrt(prod) + math::sqrt(pos) + math::sqrt(neg)
}

/// Residuals from the products the drivers already hold:
/// `ã_yt = Ã Ỹᵀ`, `xt_a = X̃ᵀ Ã`, `lt_lambda = LᵀΛ`, `phi_rt = Φ Rᵀ`,
/// `lx = L X̃`, `yr = Ỹ R`.
#[allow(clippy::too_many_arguments)]
fn residual_from_products(
    s: &AdmmState,
    a_yt: &DenseMatrix,
    xt_a: &DenseMatrix,
    lt_lambda: &DenseMatrix,
    phi_rt: &DenseMatrix,
    lx: &DenseMatrix,
    yr: &DenseMatrix,
) -> KktResidual {
    let mut ra = s.x_tilde.mul(&s.y_tilde.gram_rows());
    ra.axpy(-1.0, a_yt);
    ra.add_assign(lt_lambda);
    let mut rb = s.x_tilde.gram().mul(&s.y_tilde);
    rb.axpy(-1.0, xt_a);
    rb.add_assign(phi_rt);
    KktResidual {
        stationarity_x: ra.frobenius_norm(),
        stationarity_y: rb.frobenius_norm(),
        feasibility_u: lx.sub(&s.u).frobenius_norm(),
        feasibility_v: yr.sub(&s.v).frobenius_norm(),
        complementarity_u: complementarity(&s.lambda_mult, &s.u),
        complementarity_v: complementarity(&s.phi_mult, &s.v),
    }
}

/// KKT residuals of `state` for `Ã`, `L` (`m × s`) and `R` (`s × n`);
/// `None` stands for an identity factor.
pub fn kkt_residual(
    state: &AdmmState,
    a_tilde: &DenseMatrix,
    l: Option<&DenseMatrix>,
    r: Option<&DenseMatrix>,
) -> KktResidual {
    let a_yt = a_tilde.mul_t(&state.y_tilde);
    let xt_a = state.x_tilde.t_mul(a_tilde);
    let (lt_lambda, lx) = match l {
        Some(l) => (l.t_mul(&state.lambda_mult), l.mul(&state.x_tilde)),
        None => (state.lambda_mult.clone(), state.x_tilde.clone()),
    };
    let (phi_rt, yr) = match r {
        Some(r) => (state.phi_mult.mul_t(r), state.y_tilde.mul(r)),
        None => (state.phi_mult.clone(), state.y_tilde.clone()),
    };
    residual_from_products(state, &a_yt, &xt_a, &lt_lambda, &phi_rt, &lx, &yr)
}

fn project(mut m: DenseMatrix) -> DenseMatrix {
    m.map_inplace(|v| v.max(0.0));
    m
}

/// `U ← P₊(Z + Λ/λ)`, `Λ ← Λ + ξλ(Z − U)` for `Z = L X̃` (and likewise `V`, `Φ`).
fn split_update(z: &DenseMatrix, mult: &mut DenseMatrix, penalty: f64, xi: f64) -> DenseMatrix {
    let mut shifted = z.clone();
    shifted.axpy(1.0 / penalty, mult);
    let u = project(shifted);
    let mut gap = z.clone();
    gap.axpy(-1.0, &u);
    mult.axpy(xi * penalty, &gap);
    u
}

fn initial_state(u0: DenseMatrix, v0: DenseMatrix, y0: DenseMatrix, x_rows: usize, p: &AdmmParams) -> AdmmState {
    let r = u0.cols();
    AdmmState {
        x_tilde: DenseMatrix::zeros(x_rows, r),
        y_tilde: y0,
        lambda_mult: DenseMatrix::zeros(u0.rows(), r),
        phi_mult: DenseMatrix::zeros(r, v0.cols()),
        u: u0,
        v: v0,
        lambda: p.lambda,
        phi: p.phi,
        xi: p.xi,
    }
}

fn check_start(u0: &DenseMatrix, v0: &DenseMatrix, m: usize, n: usize) -> Result<()> {
    if u0.rows() != m || v0.cols() != n || u0.cols() != v0.rows() || u0.cols() == 0 {
        return Err(Error::dims("ADMM start: U must be m x r and V r x n"));
    }
    if u0.min_value() < 0.0 || v0.min_value() < 0.0 || !u0.is_finite() || !v0.is_finite() {
        return Err(Error::arg("ADMM start must be finite and nonnegative"));
    }
    Ok(())
}

/// Tracks the stopping score; errors once it has grown tenfold over the
/// last 50 iterations.
struct Monitor {
    kkt: Vec<f64>,
    objective: Vec<f64>,
}

const DIVERGENCE_WINDOW: usize = 50;
const DIVERGENCE_FACTOR: f64 = 10.0;

impl Monitor {
    fn push(&mut self, it: usize, score: f64, objective: f64, tol: f64) -> Result<bool> {
        if !score.is_finite() || !objective.is_finite() {
            return Err(Error::Divergence {
                iteration: it,
                trace: self.kkt.clone(),
            });
        }
        self.kkt.push(score);
        self.objective.push(objective);
        let k = self.kkt.len();
        if k > DIVERGENCE_WINDOW && score > tol && score > DIVERGENCE_FACTOR * self.kkt[k - 1 - DIVERGENCE_WINDOW] {
            return Err(Error::Divergence {
                iteration: it,
                trace: self.kkt.clone(),
            });
        }
        Ok(score < tol)
    }
}

/// ADMM iterations on a compressed problem: `Ã` (`s₁ × s₂`), `L` (`m × s₁`),
/// `R` (`s₂ × n`), starting from `U₀ ≥ 0`, `V₀ ≥ 0` with `Ỹ₀ = V₀ Rᵀ` and
/// zero multipliers. The closed-form X̃ and Ỹ steps assume `LᵀL = I` and
/// `R Rᵀ = I`.
pub fn admm_compressed(
    a_tilde: &DenseMatrix,
    l: &DenseMatrix,
    r: &DenseMatrix,
    u0: DenseMatrix,
    v0: DenseMatrix,
    params: &AdmmParams,
) -> Result<AdmmResult> {
    params.validate()?;
    let (s1, s2) = a_tilde.shape();
    if l.cols() != s1 || r.rows() != s2 {
        return Err(Error::dims("ADMM: L, Ã and R do not chain"));
    }
    check_start(&u0, &v0, l.rows(), r.cols())?;
    a_tilde.ensure_finite("compressed matrix")?;
    let rank = u0.cols();
    let a_norm_sq = a_tilde.frobenius_norm_sq();
    let y0 = v0.mul_t(r);
    let mut st = initial_state(u0, v0, y0, s1, params);
    let (lam, phi, xi) = (params.lambda, params.phi, params.xi);
    let mut mon = Monitor {
        kkt: Vec::new(),
        objective: Vec::new(),
    };
    let mut converged = false;
    let mut residual = KktResidual::default();
    let mut iterations = 0;

    for it in 0..params.max_iter {
        let mut g = st.y_tilde.gram_rows();
        g.add_diagonal(lam);
        let mut rhs = a_tilde.mul_t(&st.y_tilde);
        let mut shift = st.u.scaled(lam);
        shift.axpy(-1.0, &st.lambda_mult);
        rhs.add_assign(&l.t_mul(&shift));
        st.x_tilde = solve_spd_right(&rhs, &g);

        let xt_a = st.x_tilde.t_mul(a_tilde);
        let mut g = st.x_tilde.gram();
        g.add_diagonal(phi);
        let mut shift = st.v.scaled(phi);
        shift.axpy(-1.0, &st.phi_mult);
        let mut rhs = xt_a.clone();
        rhs.add_assign(&shift.mul_t(r));
        st.y_tilde = solve_spd(&g, &rhs);

        let lx = l.mul(&st.x_tilde);
        let yr = st.y_tilde.mul(r);
        st.u = split_update(&lx, &mut st.lambda_mult, lam, xi);
        st.v = split_update(&yr, &mut st.phi_mult, phi, xi);

        let a_yt = a_tilde.mul_t(&st.y_tilde);
        let lt_lambda = l.t_mul(&st.lambda_mult);
        let phi_rt = st.phi_mult.mul_t(r);
        residual = residual_from_products(&st, &a_yt, &xt_a, &lt_lambda, &phi_rt, &lx, &yr);
        let f = objective_from_products(a_norm_sq, &xt_a, &st.x_tilde.gram(), &st.y_tilde);
        iterations = it + 1;
        if mon.push(it, residual.max(), f, params.tol)? {
            converged = true;
            break;
        }
    }
    debug_assert_eq!(st.u.cols(), rank);
    Ok(AdmmResult {
        state: st,
        residual,
        iterations,
        converged,
        objective_trace: mon.objective,
        kkt_trace: mon.kkt,
    })
}

/// Uncompressed ADMM (`L = I`, `R = I`, `Ã = A`) run directly on a blocked
/// `A`. Each iteration makes two passes over `A`.
pub fn admm_direct<S: RowBlocks>(
    a: &S,
    u0: DenseMatrix,
    v0: DenseMatrix,
    params: &AdmmParams,
) -> Result<AdmmResult> {
    params.validate()?;
    let (m, n) = (a.rows(), a.cols());
    check_start(&u0, &v0, m, n)?;
    let a_norm_sq = frobenius_norm_sq_blocked(a)?;
    let y0 = v0.clone();
    let mut st = initial_state(u0, v0, y0, m, params);
    let (lam, phi, xi) = (params.lambda, params.phi, params.xi);
    let mut mon = Monitor {
        kkt: Vec::new(),
        objective: Vec::new(),
    };
    let mut converged = false;
    let mut residual = KktResidual::default();
    let mut iterations = 0;
    let mut a_yt = a_mul_t(a, &st.y_tilde)?;

    for it in 0..params.max_iter {
        let mut g = st.y_tilde.gram_rows();
        g.add_diagonal(lam);
        let mut rhs = a_yt;
        let mut shift = st.u.scaled(lam);
        shift.axpy(-1.0, &st.lambda_mult);
        rhs.add_assign(&shift);
        st.x_tilde = solve_spd_right(&rhs, &g);

        let xt_a = t_mul_a(&st.x_tilde, a)?;
        let mut g = st.x_tilde.gram();
        g.add_diagonal(phi);
        let mut shift = st.v.scaled(phi);
        shift.axpy(-1.0, &st.phi_mult);
        let mut rhs = xt_a.clone();
        rhs.add_assign(&shift);
        st.y_tilde = solve_spd(&g, &rhs);

        let lx = st.x_tilde.clone();
        let yr = st.y_tilde.clone();
        st.u = split_update(&lx, &mut st.lambda_mult, lam, xi);
        st.v = split_update(&yr, &mut st.phi_mult, phi, xi);

        a_yt = a_mul_t(a, &st.y_tilde)?;
        residual = residual_from_products(&st, &a_yt, &xt_a, &st.lambda_mult, &st.phi_mult, &lx, &yr);
        let f = objective_from_products(a_norm_sq, &xt_a, &st.x_tilde.gram(), &st.y_tilde);
        iterations = it + 1;
        if mon.push(it, residual.max(), f, params.tol)? {
            converged = true;
            break;
        }
    }
    Ok(AdmmResult {
        state: st,
        residual,
        iterations,
        converged,
        objective_trace: mon.objective,
        kkt_trace: mon.kkt,
    })
}

/// `A Yᵀ`, row block by row block.
fn a_mul_t<S: RowBlocks>(a: &S, y: &DenseMatrix) -> Result<DenseMatrix> {
    let mut out = DenseMatrix::zeros(0, y.rows());
    for block in a.blocks() {
        out.append_rows(&block?.1.mul_t(y));
    }
    Ok(out)
}

/// `Xᵀ A`, accumulated over row blocks.
fn t_mul_a<S: RowBlocks>(x: &DenseMatrix, a: &S) -> Result<DenseMatrix> {
    let mut acc = DenseMatrix::zeros(x.cols(), a.cols());
    for block in a.blocks() {
        let (start, block) = block?;
        x.row_range(start, block.rows()).t_mul_acc(&block, &mut acc);
    }
    Ok(acc)
}

/// Uniform `[0, 1]` starting splits `(U₀, V₀)` for a run seed.
pub(crate) fn initial_splits(m: usize, n: usize, rank: usize, seed: u64) -> (DenseMatrix, DenseMatrix) {
    let mut rng = Rng::new(derive_seed(seed, INIT_STREAM));
    let v0 = rng.uniform_matrix(rank, n);
    let u0 = rng.uniform_matrix(m, rank);
    (u0, v0)
}

/// ADMM NMF driver: compresses with structured bases when requested,
/// iterates, and reports `X = U`, `Y = V` with the true relative error.
pub fn nmf_admm<S: RowBlocks>(a: &S, opts: &AdmmOptions) -> Result<(FactorPair, AdmmResult)> {
    let (m, n) = (a.rows(), a.cols());
    let rank = opts.config.rank;
    check_rank(rank, m, n)?;
    let (u0, v0) = initial_splits(m, n, rank, opts.config.seed);
    let run = if opts.compressed {
        let (l, rt) = compression_pair(a, Compression::Structured, opts.config)?;
        let a_tilde = l.t_mul(&matmul_blocked(a, &rt)?);
        admm_compressed(&a_tilde, &l, &rt.transpose(), u0, v0, &opts.params)?
    } else {
        admm_direct(a, u0, v0, &opts.params)?
    };
    let x = run.state.u.clone();
    let y = run.state.v.clone();
    let relative_error = relative_error(a, &x, &y)?;
    let pair = FactorPair {
        x,
        y,
        iterations: run.iterations,
        objective_trace: run.objective_trace.clone(),
        relative_error,
    };
    Ok((pair, run))
}
