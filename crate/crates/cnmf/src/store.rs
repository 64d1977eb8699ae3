//! Matrix files and row-block stores.
//!
//! Binary layout: the 5-byte magic `CNMF1`, `rows` and `cols` as
//! little-endian `u64`, then `rows × cols` little-endian `f64` in row-major
//! order. Row `i` starts at byte `HEADER_LEN + 8·i·cols`, so any block can be
//! read with one seek.
//!
//! CSV: one matrix row per line, comma separated, no header.

use std::fs::{File, OpenOptions};
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use cnmf_core::blocks::RowSink;
use cnmf_core::{DenseMatrix, InCore, RowBlocks};
use tempfile::TempDir;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 5] = b"CNMF1";
pub const HEADER_LEN: u64 = 21;
const F64: usize = std::mem::size_of::<f64>();

/// Environment variable overriding the memory budget, in MiB.
pub const BUDGET_ENV: &str = "CNMF_MEM_BUDGET_MB";
pub const DEFAULT_BUDGET_BYTES: usize = 64 << 20;

/// Bytes a single in-memory matrix or block may occupy.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MemoryBudget {
    pub bytes: usize,
}

impl Default for MemoryBudget {
    fn default() -> Self {
        MemoryBudget {
            bytes: DEFAULT_BUDGET_BYTES,
        }
    }
}

impl MemoryBudget {
    pub fn from_mib(mib: usize) -> Self {
        MemoryBudget { bytes: mib << 20 }
    }

    /// Default budget, or `CNMF_MEM_BUDGET_MB` when set.
    pub fn from_env() -> Result<Self> {
        match std::env::var(BUDGET_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&mib| mib > 0)
                .map(Self::from_mib)
                .ok_or_else(|| Error::Config(format!("{BUDGET_ENV} must be a positive integer, got {v:?}"))),
            Err(_) => Ok(Self::default()),
        }
    }

    /// Rows per block so that one block of `cols` columns fits the budget.
    pub fn block_rows(&self, cols: usize) -> usize {
        (self.bytes / (cols.max(1) * F64)).max(1)
    }

    pub fn fits(&self, rows: usize, cols: usize) -> bool {
        rows.saturating_mul(cols).saturating_mul(F64) <= self.bytes
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Binary,
    Csv,
}

impl Format {
    /// `.csv` (any case) is CSV; everything else is the binary format.
    pub fn from_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Format::Csv,
            _ => Format::Binary,
        }
    }
}

fn encode_header(rows: u64, cols: u64) -> [u8; HEADER_LEN as usize] {
    let mut h = [0u8; HEADER_LEN as usize];
    h[..5].copy_from_slice(MAGIC);
    h[5..13].copy_from_slice(&rows.to_le_bytes());
    h[13..21].copy_from_slice(&cols.to_le_bytes());
    h
}

/// Reads and checks the header and the payload length against the file size.
pub fn read_header(path: &Path) -> Result<(usize, usize)> {
    let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
    let len = f.metadata().map_err(|e| Error::io(path, e))?.len();
    let mut h = [0u8; HEADER_LEN as usize];
    let got = read_up_to(&mut f, &mut h).map_err(|e| Error::io(path, e))?;
    if got < h.len() {
        return Err(Error::parse(path, format!("byte {got}"), "file ends inside the 21-byte header"));
    }
    if &h[..5] != MAGIC {
        return Err(Error::parse(path, "byte 0", "missing CNMF1 magic"));
    }
    let rows = u64::from_le_bytes(h[5..13].try_into().unwrap());
    let cols = u64::from_le_bytes(h[13..21].try_into().unwrap());
    let expected = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(F64 as u64))
        .and_then(|v| v.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::parse(path, "byte 5", "dimensions overflow"))?;
    if expected != len {
        let payload = len - HEADER_LEN;
        return Err(Error::Dimension {
            path: path.into(),
            message: format!(
                "header says {rows}x{cols} ({} values) but the payload holds {} bytes ({} values{})",
                rows * cols,
                payload,
                payload / F64 as u64,
                if !payload.is_multiple_of(F64 as u64) { ", plus a partial value" } else { "" }
            ),
        });
    }
    Ok((rows as usize, cols as usize))
}

fn read_up_to(f: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match f.read(&mut buf[got..])? {
            0 => break,
            k => got += k,
        }
    }
    Ok(got)
}

fn decode_into(bytes: &[u8], out: &mut Vec<f64>) {
    out.extend(bytes.chunks_exact(F64).map(|c| f64::from_le_bytes(c.try_into().unwrap())));
}

/// Checks a decoded run of values that starts at `first` (flat index).
fn check_finite(path: &Path, values: &[f64], first: usize, cols: usize) -> Result<()> {
    if let Some(k) = values.iter().position(|v| !v.is_finite()) {
        let flat = first + k;
        return Err(Error::parse(
            path,
            format!("row {}, column {} (byte {})", flat / cols, flat % cols, HEADER_LEN as usize + flat * F64),
            format!("non-finite entry {}", values[k]),
        ));
    }
    Ok(())
}

/// Writes a whole matrix in the binary format.
pub fn write_binary(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut w = BinaryWriter::create(path, m.cols())?;
    w.write_rows(m)?;
    w.finish()?;
    Ok(())
}

/// Reads a binary matrix fully into memory.
pub fn read_binary(path: &Path) -> Result<DenseMatrix> {
    let (rows, cols) = read_header(path)?;
    let store = FileStore::open_unchecked(path, rows, cols, rows.max(1), None)?;
    let m = store.read_rows_checked(0, rows)?;
    Ok(m)
}

/// Streams rows into a binary matrix file; the row count in the header is
/// fixed up by [`BinaryWriter::finish`].
pub struct BinaryWriter {
    path: PathBuf,
    out: BufWriter<File>,
    cols: usize,
    rows: usize,
    buf: Vec<u8>,
}

impl BinaryWriter {
    pub fn create(path: &Path, cols: usize) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::with_capacity(1 << 20, file);
        out.write_all(&encode_header(0, cols as u64)).map_err(|e| Error::io(path, e))?;
        Ok(BinaryWriter {
            path: path.into(),
            out,
            cols,
            rows: 0,
            buf: Vec::new(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn write_rows(&mut self, block: &DenseMatrix) -> Result<()> {
        if block.cols() != self.cols {
            return Err(Error::Dimension {
                path: self.path.clone(),
                message: format!("writing {} columns into a {}-column file", block.cols(), self.cols),
            });
        }
        self.write_values(block.data())?;
        self.rows += block.rows();
        Ok(())
    }

    fn write_values(&mut self, values: &[f64]) -> Result<()> {
        self.buf.clear();
        self.buf.extend(values.iter().flat_map(|v| v.to_le_bytes()));
        self.out.write_all(&self.buf).map_err(|e| Error::io(&self.path, e))
    }

    /// Writes the final header and returns `(path, rows, cols)`.
    pub fn finish(self) -> Result<(PathBuf, usize, usize)> {
        let BinaryWriter {
            path, out, cols, rows, ..
        } = self;
        let mut file = out.into_inner().map_err(|e| Error::io(&path, e.into_error()))?;
        file.seek(SeekFrom::Start(0)).map_err(|e| Error::io(&path, e))?;
        file.write_all(&encode_header(rows as u64, cols as u64)).map_err(|e| Error::io(&path, e))?;
        file.sync_data().map_err(|e| Error::io(&path, e))?;
        Ok((path, rows, cols))
    }
}

impl RowSink for BinaryWriter {
    fn append(&mut self, block: &DenseMatrix) -> cnmf_core::Result<()> {
        Ok(self.write_rows(block)?)
    }
}

/// A binary matrix file read in row blocks.
///
/// Entries are validated when the store is opened, so block reads only
/// decode. A store created from a scratch directory keeps that directory
/// alive for as long as it exists.
pub struct FileStore {
    path: PathBuf,
    rows: usize,
    cols: usize,
    block_rows: usize,
    file: Mutex<File>,
    _owner: Option<Arc<TempDir>>,
}

impl std::fmt::Debug for FileStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FileStore")
            .field("path", &self.path)
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("block_rows", &self.block_rows)
            .finish()
    }
}

impl FileStore {
    /// Opens a binary file, validating the header, the size and every entry.
    pub fn open(path: &Path, block_rows: usize) -> Result<Self> {
        let (rows, cols) = read_header(path)?;
        let store = Self::open_unchecked(path, rows, cols, block_rows, None)?;
        store.validate()?;
        Ok(store)
    }

    fn open_unchecked(path: &Path, rows: usize, cols: usize, block_rows: usize, owner: Option<Arc<TempDir>>) -> Result<Self> {
        if block_rows == 0 {
            return Err(Error::Config("block_rows must be positive".into()));
        }
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(FileStore {
            path: path.into(),
            rows,
            cols,
            block_rows,
            file: Mutex::new(file),
            _owner: owner,
        })
    }

    /// Wraps a file just written by a [`BinaryWriter`] inside `owner`.
    pub fn adopt(finished: (PathBuf, usize, usize), block_rows: usize, owner: Option<Arc<TempDir>>) -> Result<Self> {
        let (path, rows, cols) = finished;
        Self::open_unchecked(&path, rows, cols, block_rows, owner)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn with_block_rows(mut self, block_rows: usize) -> Result<Self> {
        if block_rows == 0 {
            return Err(Error::Config("block_rows must be positive".into()));
        }
        self.block_rows = block_rows;
        Ok(self)
    }

    /// One streamed pass checking that every entry is finite.
    fn validate(&self) -> Result<()> {
        let step = self.block_rows.min(self.rows.max(1));
        let mut start = 0;
        while start < self.rows {
            let count = step.min(self.rows - start);
            self.read_rows_checked(start, count)?;
            start += count;
        }
        Ok(())
    }

    fn read_rows_checked(&self, start: usize, count: usize) -> Result<DenseMatrix> {
        let m = self.read_raw(start, count)?;
        check_finite(&self.path, m.data(), start * self.cols, self.cols)?;
        Ok(m)
    }

    fn read_raw(&self, start: usize, count: usize) -> Result<DenseMatrix> {
        if start + count > self.rows {
            return Err(Error::Core(cnmf_core::Error::InvalidArgument(format!(
                "rows {start}..{} outside a {}-row matrix",
                start + count,
                self.rows
            ))));
        }
        let total = count * self.cols * F64;
        let offset = HEADER_LEN + (start * self.cols * F64) as u64;
        let mut values = Vec::with_capacity(count * self.cols);
        let mut file = self.file.lock().unwrap_or_else(|p| p.into_inner());
        file.seek(SeekFrom::Start(offset)).map_err(|e| Error::io(&self.path, e))?;
        let mut chunk = vec![0u8; total.min(1 << 20)];
        let mut done = 0;
        while done < total {
            let k = chunk.len().min(total - done);
            file.read_exact(&mut chunk[..k]).map_err(|e| Error::io(&self.path, e))?;
            decode_into(&chunk[..k], &mut values);
            done += k;
        }
        DenseMatrix::new(count, self.cols, values).map_err(Error::Core)
    }
}

impl RowBlocks for FileStore {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn block_rows(&self) -> usize {
        self.block_rows
    }
    fn read_rows(&self, start: usize, count: usize) -> cnmf_core::Result<DenseMatrix> {
        Ok(self.read_raw(start, count)?)
    }
}

/// A matrix readable in row blocks, held in memory or in a file.
#[derive(Debug)]
pub enum MatrixStore {
    InCore(InCore),
    File(FileStore),
}

impl MatrixStore {
    pub fn is_file_backed(&self) -> bool {
        matches!(self, MatrixStore::File(_))
    }

    /// The matrix in memory; reads every block of a file-backed store.
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        match self {
            MatrixStore::InCore(m) => Ok(m.matrix().clone()),
            MatrixStore::File(f) => f.read_rows_checked(0, f.rows),
        }
    }
}

impl RowBlocks for MatrixStore {
    fn rows(&self) -> usize {
        match self {
            MatrixStore::InCore(m) => m.rows(),
            MatrixStore::File(f) => f.rows(),
        }
    }
    fn cols(&self) -> usize {
        match self {
            MatrixStore::InCore(m) => m.cols(),
            MatrixStore::File(f) => f.cols(),
        }
    }
    fn block_rows(&self) -> usize {
        match self {
            MatrixStore::InCore(m) => m.block_rows(),
            MatrixStore::File(f) => f.block_rows(),
        }
    }
    fn read_rows(&self, start: usize, count: usize) -> cnmf_core::Result<DenseMatrix> {
        match self {
            MatrixStore::InCore(m) => m.read_rows(start, count),
            MatrixStore::File(f) => f.read_rows(start, count),
        }
    }
    fn as_dense(&self) -> Option<&DenseMatrix> {
        match self {
            MatrixStore::InCore(m) => m.as_dense(),
            MatrixStore::File(_) => None,
        }
    }
}

/// How [`load_matrix`] decides between memory and file.
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Inferred from the extension when absent.
    pub format: Option<Format>,
    pub budget: MemoryBudget,
    /// Rows per block; derived from the budget when absent.
    pub block_rows: Option<usize>,
    /// Keep binary input on disk even when it would fit the budget.
    pub out_of_core: bool,
    /// Where oversized CSV input is spilled; the system temp dir when absent.
    pub scratch_dir: Option<PathBuf>,
}

/// Loads a matrix file. Binary input stays on disk when it exceeds the
/// budget (or when asked to); CSV input that outgrows the budget while
/// being parsed is spilled to a binary scratch file.
pub fn load_matrix(path: &Path, opts: &LoadOptions) -> Result<MatrixStore> {
    match opts.format.unwrap_or_else(|| Format::from_path(path)) {
        Format::Binary => {
            let (rows, cols) = read_header(path)?;
            let block_rows = opts.block_rows.unwrap_or_else(|| opts.budget.block_rows(cols));
            let store = FileStore::open(path, block_rows)?;
            if opts.out_of_core || !opts.budget.fits(rows, cols) {
                return Ok(MatrixStore::File(store));
            }
            let m = store.read_raw(0, rows)?;
            Ok(MatrixStore::InCore(InCore::new(m, block_rows.min(rows.max(1)))?))
        }
        Format::Csv => load_csv(path, opts),
    }
}

fn load_csv(path: &Path, opts: &LoadOptions) -> Result<MatrixStore> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(BufReader::new(file));
    let mut cols = None;
    let mut values: Vec<f64> = Vec::new();
    let mut rows = 0usize;
    let mut spill: Option<(Arc<TempDir>, BinaryWriter)> = None;
    let mut record = csv::StringRecord::new();
    loop {
        let more = reader.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(rows + 1, |p| p.line() as usize);
            Error::parse(path, format!("row {}", line.saturating_sub(1)), e.to_string())
        })?;
        if !more {
            break;
        }
        let width = *cols.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::parse(
                path,
                format!("row {rows}"),
                format!("{} fields where earlier rows have {width}", record.len()),
            ));
        }
        for (j, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::parse(path, format!("row {rows}, column {j}"), format!("not a number: {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::parse(path, format!("row {rows}, column {j}"), format!("non-finite entry {v}")));
            }
            values.push(v);
        }
        rows += 1;
        if spill.is_none() && !opts.budget.fits(rows, width) {
            let dir = Arc::new(scratch_dir(opts.scratch_dir.as_deref())?);
            let writer = BinaryWriter::create(&dir.path().join("csv-input.cnmf"), width)?;
            spill = Some((dir, writer));
        }
        if let Some((_, w)) = spill.as_mut() {
            w.write_values(&values)?;
            w.rows += values.len() / width;
            values.clear();
        }
    }
    let cols = match cols {
        Some(c) if c > 0 && rows > 0 => c,
        _ => return Err(Error::parse(path, "byte 0", "empty matrix file")),
    };
    let block_rows = opts.block_rows.unwrap_or_else(|| opts.budget.block_rows(cols));
    match spill {
        Some((dir, w)) => Ok(MatrixStore::File(FileStore::adopt(w.finish()?, block_rows, Some(dir))?)),
        None => {
            let m = DenseMatrix::new(rows, cols, values)?;
            Ok(MatrixStore::InCore(InCore::new(m, block_rows.min(rows))?))
        }
    }
}

/// A fresh scratch directory, removed when dropped.
pub fn scratch_dir(root: Option<&Path>) -> Result<TempDir> {
    let mut b = tempfile::Builder::new();
    b.prefix("cnmf-scratch-");
    match root {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            b.tempdir_in(dir).map_err(|e| Error::io(dir, e))
        }
        None => b.tempdir().map_err(|e| Error::io(std::env::temp_dir(), e)),
    }
}

/// Writes any blocked matrix, one block at a time.
pub fn save_store<S: RowBlocks>(path: &Path, a: &S, format: Format) -> Result<()> {
    match format {
        Format::Binary => {
            let mut w = BinaryWriter::create(path, a.cols())?;
            for block in a.blocks() {
                w.write_rows(&block?.1)?;
            }
            w.finish()?;
        }
        Format::Csv => {
            let file = OpenOptions::new()
                .write(true)
                .create(true)
                .truncate(true)
                .open(path)
                .map_err(|e| Error::io(path, e))?;
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(BufWriter::new(file));
            for block in a.blocks() {
                let (_, block) = block?;
                for i in 0..block.rows() {
                    // `Display` for f64 is the shortest exact round-trip form.
                    w.write_record(block.row(i).iter().map(|v| v.to_string()))?;
                }
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
    }
    Ok(())
}

pub fn save_matrix(path: &Path, m: &DenseMatrix, format: Format) -> Result<()> {
    save_store(path, m, format)
}
