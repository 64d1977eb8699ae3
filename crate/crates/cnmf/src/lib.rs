//! Files, out-of-core storage, benchmarks and the command line for
//! `cnmf-core`.
//!
//! Matrices live in the `CNMF1` binary format or in headerless CSV (see
//! [`store`]). Inputs larger than the memory budget stay on disk and are
//! read one row block at a time through [`store::FileStore`]; TSQR parks its
//! intermediate factors in a [`scratch::FileScratch`] directory.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod error;
pub mod ops;
pub mod run;
pub mod scratch;
pub mod store;

pub use error::{Error, Result};
pub use store::{load_matrix, save_matrix, save_store, FileStore, Format, LoadOptions, MatrixStore, MemoryBudget};
