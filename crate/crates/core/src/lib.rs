//! Structured random compression for nonnegative matrix factorization.
//!
//! This crate is the allocation-only numerical core: dense matrices, a
//! reproducible normal generator, Householder and tall-and-skinny QR,
//! randomized range finding, nonnegative least squares, classical NMF
//! drivers (multiplicative updates, alternating active set, ADMM), and
//! separable NMF with SPA / XRAY column selection.
//!
//! Everything that touches a filesystem lives in the companion `cnmf`
//! crate. Algorithms here read their input through [`RowBlocks`], so the
//! same code runs over an in-memory [`DenseMatrix`] or over a file-backed
//! store that only ever holds one block of rows in memory.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod blocks;
pub mod compress;
mod error;
pub mod linalg;
mod math;
pub mod matrix;
pub mod nmf;
pub mod nnls;
pub mod rng;
pub mod snmf;
pub mod synth;
pub mod tsqr;

pub use blocks::{BlockScratch, DenseSink, InCore, MemoryScratch, RowBlocks, RowSink};
pub use compress::{CompressionBasis, CompressionConfig, CompressionKind, Norm};
pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use rng::Rng;
