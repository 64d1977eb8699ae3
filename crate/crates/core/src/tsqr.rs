//! Direct tall-and-skinny QR over row blocks.
//!
//! Pass 1 factors every block `A_i = Q1_i R_i`, parking `Q1_i` in scratch
//! storage. The stacked `R_i` are factored once more, `[R_1; …; R_b] = Q2 R`,
//! and pass 2 emits `Q_i = Q1_i Q2_i` block by block. Only the stack of
//! small triangles is ever held in memory at once.

use alloc::format;
use alloc::vec::Vec;

use crate::blocks::{BlockScratch, DenseSink, MemoryScratch, RowBlocks, RowSink};
use crate::error::{Error, Result};
use crate::linalg::{self, Qr};
use crate::matrix::DenseMatrix;

#[derive(Clone, Copy, Debug)]
pub struct TsqrOptions {
    /// Bytes allowed for the stacked triangles and the central `Q2` together.
    pub stack_budget_bytes: usize,
}

impl Default for TsqrOptions {
    fn default() -> Self {
        Self {
            stack_budget_bytes: usize::MAX,
        }
    }
}

/// In-memory TSQR output.
#[derive(Clone, Debug)]
pub struct TsqrResult {
    pub q: DenseMatrix,
    pub r: DenseMatrix,
}

/// TSQR of a blocked matrix with `Q` collected in memory.
pub fn tsqr<S: RowBlocks>(a: &S) -> Result<TsqrResult> {
    let mut scratch = MemoryScratch::new();
    let mut sink = DenseSink::new(a.cols());
    let r = tsqr_into(a, &mut scratch, &mut sink, TsqrOptions::default())?;
    Ok(TsqrResult {
        q: sink.into_matrix(),
        r,
    })
}

/// TSQR of a blocked matrix, streaming `Q` into `q_sink`; returns `R`.
pub fn tsqr_into<S, Sc, K>(
    a: &S,
    scratch: &mut Sc,
    q_sink: &mut K,
    opts: TsqrOptions,
) -> Result<DenseMatrix>
where
    S: RowBlocks,
    Sc: BlockScratch + ?Sized,
    K: RowSink + ?Sized,
{
    let layout = layout_of(a);
    tsqr_blocks(&layout, |i| a.read_block(i), Some(scratch), Some(q_sink), opts)
}

/// The `R` factor alone, in one pass over `A` with no scratch storage.
pub fn tsqr_r<S: RowBlocks>(a: &S, opts: TsqrOptions) -> Result<DenseMatrix> {
    tsqr_blocks::<_, MemoryScratch, DenseSink>(&layout_of(a), |i| a.read_block(i), None, None, opts)
}

fn layout_of<S: RowBlocks>(a: &S) -> BlockLayout {
    BlockLayout {
        rows: a.rows(),
        cols: a.cols(),
        blocks: (0..a.num_blocks()).map(|i| a.block_range(i).1).collect(),
    }
}

/// Shape of a row-block partition.
#[derive(Clone, Debug)]
pub(crate) struct BlockLayout {
    pub rows: usize,
    pub cols: usize,
    pub blocks: Vec<usize>,
}

/// Core two-pass scheme over blocks produced on demand by `next_block`
/// (called exactly once per block, in order). Without a scratch and a sink
/// only pass 1 and the central factorization run, yielding `R` alone.
pub(crate) fn tsqr_blocks<F, Sc, K>(
    layout: &BlockLayout,
    mut next_block: F,
    mut scratch: Option<&mut Sc>,
    q_sink: Option<&mut K>,
    opts: TsqrOptions,
) -> Result<DenseMatrix>
where
    F: FnMut(usize) -> Result<DenseMatrix>,
    Sc: BlockScratch + ?Sized,
    K: RowSink + ?Sized,
{
    let n = layout.cols;
    if n == 0 || layout.rows < n {
        return Err(Error::dims(format!(
            "tsqr needs a tall matrix, got {}x{}",
            layout.rows, n
        )));
    }
    let nb = layout.blocks.len();
    for (i, &k) in layout.blocks.iter().enumerate() {
        if k < n && i + 1 < nb {
            return Err(Error::arg(format!(
                "block {i} has {k} rows, narrower than the {n} columns; use larger blocks"
            )));
        }
    }
    let stack_rows: usize = layout.blocks.iter().map(|&k| k.min(n)).sum();
    let stack_bytes = 2 * stack_rows * n * core::mem::size_of::<f64>();
    if stack_bytes > opts.stack_budget_bytes {
        return Err(Error::Budget(format!(
            "stacked R factors need {stack_bytes} bytes (budget {}); use larger blocks",
            opts.stack_budget_bytes
        )));
    }

    // Pass 1: local factorizations.
    let mut stack = DenseMatrix::zeros(0, n);
    for (i, &k) in layout.blocks.iter().enumerate() {
        let block = next_block(i)?;
        if block.shape() != (k, n) {
            return Err(Error::dims(format!(
                "block {i} is {}x{}, expected {k}x{n}",
                block.rows(),
                block.cols()
            )));
        }
        block.ensure_finite(&format!("tsqr input block {i}"))?;
        let Qr { q, r } = linalg::qr(&block);
        drop(block);
        if let Some(scratch) = scratch.as_deref_mut() {
            scratch.store(i, &q)?;
        }
        stack.append_rows(&r);
    }

    // The only centralized step.
    let Qr { q: q2, r } = linalg::qr(&stack);
    drop(stack);
    let (Some(scratch), Some(q_sink)) = (scratch, q_sink) else {
        return Ok(r);
    };

    // Pass 2: Q_i = Q1_i * Q2_i.
    let mut offset = 0;
    for (i, &k) in layout.blocks.iter().enumerate() {
        let p = k.min(n);
        let q1 = scratch.load(i)?;
        let q2_i = q2.row_range(offset, p);
        q_sink.append(&q1.mul(&q2_i))?;
        offset += p;
    }
    Ok(r)
}
