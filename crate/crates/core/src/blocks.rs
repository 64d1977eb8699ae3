//! Row-block access to matrices that may not fit in memory.
//!
//! [`RowBlocks`] is the read side: a matrix partitioned into consecutive
//! blocks of `block_rows` rows (the last one may be short). Every pass
//! visits the same blocks in the same order. [`RowSink`] is the write side,
//! receiving rows in order, and [`BlockScratch`] holds intermediate blocks
//! between passes.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub trait RowBlocks {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn block_rows(&self) -> usize;

    /// Copy of rows `start..start + count`.
    fn read_rows(&self, start: usize, count: usize) -> Result<DenseMatrix>;

    /// The whole matrix, when it already lives in memory.
    fn as_dense(&self) -> Option<&DenseMatrix> {
        None
    }

    fn num_blocks(&self) -> usize {
        self.rows().div_ceil(self.block_rows().max(1))
    }

    /// `(first_row, row_count)` of block `index`.
    fn block_range(&self, index: usize) -> (usize, usize) {
        let br = self.block_rows().max(1);
        let start = index * br;
        (start, br.min(self.rows() - start))
    }

    fn read_block(&self, index: usize) -> Result<DenseMatrix> {
        let (start, count) = self.block_range(index);
        self.read_rows(start, count)
    }

    /// Iterates `(first_row, block)` pairs in order.
    fn blocks(&self) -> Blocks<'_, Self>
    where
        Self: Sized,
    {
        Blocks {
            source: self,
            next: 0,
        }
    }
}

pub struct Blocks<'a, S: RowBlocks> {
    source: &'a S,
    next: usize,
}

impl<S: RowBlocks> Iterator for Blocks<'_, S> {
    type Item = Result<(usize, DenseMatrix)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.source.num_blocks() {
            return None;
        }
        let index = self.next;
        self.next += 1;
        let (start, _) = self.source.block_range(index);
        Some(self.source.read_block(index).map(|b| (start, b)))
    }
}

impl<T: RowBlocks + ?Sized> RowBlocks for &T {
    fn rows(&self) -> usize {
        (**self).rows()
    }
    fn cols(&self) -> usize {
        (**self).cols()
    }
    fn block_rows(&self) -> usize {
        (**self).block_rows()
    }
    fn read_rows(&self, start: usize, count: usize) -> Result<DenseMatrix> {
        (**self).read_rows(start, count)
    }
    fn as_dense(&self) -> Option<&DenseMatrix> {
        (**self).as_dense()
    }
}

/// A dense matrix is a single block.
impl RowBlocks for DenseMatrix {
    fn rows(&self) -> usize {
        DenseMatrix::rows(self)
    }
    fn cols(&self) -> usize {
        DenseMatrix::cols(self)
    }
    fn block_rows(&self) -> usize {
        DenseMatrix::rows(self).max(1)
    }
    fn read_rows(&self, start: usize, count: usize) -> Result<DenseMatrix> {
        check_range(self, start, count)?;
        Ok(self.row_range(start, count))
    }
    fn as_dense(&self) -> Option<&DenseMatrix> {
        Some(self)
    }
}

/// In-memory matrix with an explicit block partition.
#[derive(Clone, Debug)]
pub struct InCore {
    matrix: DenseMatrix,
    block_rows: usize,
}

impl InCore {
    pub fn new(matrix: DenseMatrix, block_rows: usize) -> Result<Self> {
        if block_rows == 0 {
            return Err(Error::arg("block_rows must be positive"));
        }
        Ok(Self { matrix, block_rows })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.matrix
    }
}

impl RowBlocks for InCore {
    fn rows(&self) -> usize {
        self.matrix.rows()
    }
    fn cols(&self) -> usize {
        self.matrix.cols()
    }
    fn block_rows(&self) -> usize {
        self.block_rows
    }
    fn read_rows(&self, start: usize, count: usize) -> Result<DenseMatrix> {
        check_range(&self.matrix, start, count)?;
        Ok(self.matrix.row_range(start, count))
    }
    fn as_dense(&self) -> Option<&DenseMatrix> {
        Some(&self.matrix)
    }
}

fn check_range(m: &DenseMatrix, start: usize, count: usize) -> Result<()> {
    if start + count > m.rows() {
        return Err(Error::dims(format!(
            "rows {start}..{} out of range for {} rows",
            start + count,
            m.rows()
        )));
    }
    Ok(())
}

/// Receives the rows of a matrix in order.
pub trait RowSink {
    fn append(&mut self, block: &DenseMatrix) -> Result<()>;
}

/// Sink that collects rows into a [`DenseMatrix`].
#[derive(Debug)]
pub struct DenseSink {
    matrix: DenseMatrix,
}

impl DenseSink {
    pub fn new(cols: usize) -> Self {
        Self {
            matrix: DenseMatrix::zeros(0, cols),
        }
    }

    pub fn into_matrix(self) -> DenseMatrix {
        self.matrix
    }
}

impl RowSink for DenseSink {
    fn append(&mut self, block: &DenseMatrix) -> Result<()> {
        if block.cols() != self.matrix.cols() {
            return Err(Error::dims("sink block width differs"));
        }
        self.matrix.append_rows(block);
        Ok(())
    }
}

/// Indexed storage for intermediate blocks kept between passes.
pub trait BlockScratch {
    fn store(&mut self, index: usize, block: &DenseMatrix) -> Result<()>;
    fn load(&self, index: usize) -> Result<DenseMatrix>;
}

#[derive(Debug, Default)]
pub struct MemoryScratch {
    blocks: Vec<Option<DenseMatrix>>,
}

impl MemoryScratch {
    pub fn new() -> Self {
        Self::default()
    }
}

impl BlockScratch for MemoryScratch {
    fn store(&mut self, index: usize, block: &DenseMatrix) -> Result<()> {
        if self.blocks.len() <= index {
            self.blocks.resize(index + 1, None);
        }
        self.blocks[index] = Some(block.clone());
        Ok(())
    }

    fn load(&self, index: usize) -> Result<DenseMatrix> {
        self.blocks
            .get(index)
            .and_then(Option::clone)
            .ok_or_else(|| Error::Storage(format!("scratch block {index} missing")))
    }
}

/// Blocked `A * B`, streaming each product block into `sink`.
pub fn matmul_blocked_into<S: RowBlocks, K: RowSink + ?Sized>(
    a: &S,
    b: &DenseMatrix,
    sink: &mut K,
) -> Result<()> {
    if a.cols() != b.rows() {
        return Err(Error::dims(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    for block in a.blocks() {
        let (_, block) = block?;
        sink.append(&block.mul(b))?;
    }
    Ok(())
}

/// Blocked `A * B` collected in memory.
pub fn matmul_blocked<S: RowBlocks>(a: &S, b: &DenseMatrix) -> Result<DenseMatrix> {
    let mut sink = DenseSink::new(b.cols());
    matmul_blocked_into(a, b, &mut sink)?;
    Ok(sink.into_matrix())
}

/// `Aᵀ B` for `B` held in memory with `A.rows()` rows, one pass over `A`.
pub fn t_matmul_blocked<S: RowBlocks>(a: &S, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::dims("t_matmul: row counts differ"));
    }
    let mut acc = DenseMatrix::zeros(a.cols(), b.cols());
    for block in a.blocks() {
        let (start, block) = block?;
        block.t_mul_acc(&b.row_range(start, block.rows()), &mut acc);
    }
    Ok(acc)
}

/// `Aᵀ (A Z)` in a single pass; the inner step of blocked power iteration.
pub fn gram_apply_blocked<S: RowBlocks>(a: &S, z: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != z.rows() {
        return Err(Error::dims("gram_apply: inner dimensions differ"));
    }
    let mut acc = DenseMatrix::zeros(a.cols(), z.cols());
    for block in a.blocks() {
        let (_, block) = block?;
        let az = block.mul(z);
        block.t_mul_acc(&az, &mut acc);
    }
    Ok(acc)
}

/// Reads every block into one in-memory matrix.
pub fn collect_dense<S: RowBlocks>(a: &S) -> Result<DenseMatrix> {
    if let Some(d) = a.as_dense() {
        return Ok(d.clone());
    }
    let mut out = DenseMatrix::zeros(0, a.cols());
    for block in a.blocks() {
        out.append_rows(&block?.1);
    }
    Ok(out)
}

/// `‖A‖_F²` in one pass.
pub fn frobenius_norm_sq_blocked<S: RowBlocks>(a: &S) -> Result<f64> {
    let mut s = 0.0;
    for block in a.blocks() {
        s += block?.1.frobenius_norm_sq();
    }
    Ok(s)
}
