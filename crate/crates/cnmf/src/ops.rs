//! Out-of-core drivers: blocked products, TSQR and structured compression
//! whose outputs land on disk when they would not fit the memory budget.

use std::path::PathBuf;

use cnmf_core::blocks::matmul_blocked_into;
use cnmf_core::compress::tsqr_compress_into;
use cnmf_core::tsqr::{tsqr_into, TsqrOptions};
use cnmf_core::{CompressionConfig, DenseMatrix, DenseSink, InCore, RowBlocks, RowSink};

use crate::scratch::FileScratch;
use crate::store::{BinaryWriter, FileStore, MatrixStore, MemoryBudget};
use crate::Result;

/// Where and how large out-of-core work may be.
#[derive(Clone, Debug, Default)]
pub struct OutOfCore {
    pub budget: MemoryBudget,
    /// Parent of the temporary scratch directories.
    pub scratch_root: Option<PathBuf>,
    /// Rows per block of produced stores; derived from the budget when absent.
    pub block_rows: Option<usize>,
}

impl OutOfCore {
    pub fn new(budget: MemoryBudget) -> Self {
        OutOfCore {
            budget,
            ..Default::default()
        }
    }

    fn block_rows(&self, cols: usize) -> usize {
        self.block_rows.unwrap_or_else(|| self.budget.block_rows(cols))
    }

    pub fn tsqr_options(&self) -> TsqrOptions {
        TsqrOptions {
            stack_budget_bytes: self.budget.bytes,
        }
    }

    /// A sink for an `rows × cols` result: memory if it fits, a file otherwise.
    pub fn sink(&self, rows: usize, cols: usize) -> Result<OutputSink> {
        if self.budget.fits(rows, cols) {
            return Ok(OutputSink::Memory(DenseSink::new(cols)));
        }
        let dir = FileScratch::new(self.scratch_root.as_deref())?;
        let writer = BinaryWriter::create(&dir.file("result.cnmf"), cols)?;
        Ok(OutputSink::File { dir, writer })
    }
}

/// Collects streamed rows either in memory or in a scratch file.
pub enum OutputSink {
    Memory(DenseSink),
    File { dir: FileScratch, writer: BinaryWriter },
}

impl RowSink for OutputSink {
    fn append(&mut self, block: &DenseMatrix) -> cnmf_core::Result<()> {
        match self {
            OutputSink::Memory(s) => s.append(block),
            OutputSink::File { writer, .. } => writer.append(block),
        }
    }
}

impl OutputSink {
    pub fn finish(self, block_rows: usize) -> Result<MatrixStore> {
        match self {
            OutputSink::Memory(s) => {
                let m = s.into_matrix();
                let block_rows = block_rows.min(m.rows().max(1));
                Ok(MatrixStore::InCore(InCore::new(m, block_rows)?))
            }
            OutputSink::File { dir, writer } => Ok(MatrixStore::File(FileStore::adopt(
                writer.finish()?,
                block_rows,
                Some(dir.owner()),
            )?)),
        }
    }
}

/// `A B`; the result is file-backed iff `A.rows × B.cols` exceeds the budget.
pub fn matmul_store<S: RowBlocks>(a: &S, b: &DenseMatrix, ctx: &OutOfCore) -> Result<MatrixStore> {
    let mut sink = ctx.sink(a.rows(), b.cols())?;
    matmul_blocked_into(a, b, &mut sink)?;
    sink.finish(ctx.block_rows(b.cols()))
}

/// TSQR with pass-1 factors parked in a scratch directory; returns `Q`
/// (file-backed when large) and `R`.
pub fn tsqr_store<S: RowBlocks>(a: &S, ctx: &OutOfCore) -> Result<(MatrixStore, DenseMatrix)> {
    let mut scratch = FileScratch::new(ctx.scratch_root.as_deref())?;
    let mut sink = ctx.sink(a.rows(), a.cols())?;
    let r = tsqr_into(a, &mut scratch, &mut sink, ctx.tsqr_options())?;
    Ok((sink.finish(ctx.block_rows(a.cols()))?, r))
}

/// Structured compression through TSQR with file scratch; `cfg` is
/// adjusted to the shape of `A` first. Returns the `m × s` basis.
pub fn compress_store<S: RowBlocks>(a: &S, cfg: CompressionConfig, ctx: &OutOfCore) -> Result<MatrixStore> {
    let cfg = cfg.adjust(a.rows(), a.cols())?;
    let s = cfg.sample_size();
    let mut scratch = FileScratch::new(ctx.scratch_root.as_deref())?;
    let mut sink = ctx.sink(a.rows(), s)?;
    tsqr_compress_into(a, cfg, &mut scratch, &mut sink, ctx.tsqr_options())?;
    sink.finish(ctx.block_rows(s))
}
