//! Command-line interface.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cnmf_core::nmf::Compression;
use cnmf_core::snmf::{Reduction, Selector};
use cnmf_core::synth::{gen_nmf_synthetic, gen_separable_synthetic, gen_snmf_synthetic, SyntheticKind, SyntheticSpec};
use cnmf_core::tsqr::TsqrOptions;
use cnmf_core::{CompressionConfig, RowBlocks};
use serde_json::json;

use crate::bench::{run_benchmark, BenchOptions};
use crate::error::{Error, Result};
use crate::ops::{compress_store, OutOfCore};
use crate::run::{run_nmf, run_snmf, NmfAlgorithm, NmfRun, RunReport, SnmfRun};
use crate::store::{load_matrix, save_matrix, save_store, Format, LoadOptions, MatrixStore, MemoryBudget};

#[derive(Debug, Parser)]
#[command(name = "cnmf", version, about = "Structured random compression for nonnegative matrix factorization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Factor A ≈ X Y with X, Y ≥ 0.
    Nmf(NmfArgs),
    /// Separable NMF: A ≈ A[:, K] Y with Y ≥ 0.
    Snmf(SnmfArgs),
    /// Orthonormal basis Q (m × s) with Q Qᵀ A ≈ A.
    Compress(CompressArgs),
    /// Run a benchmark suite.
    Bench(BenchArgs),
    /// Write a synthetic matrix.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Binary,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Binary => Format::Binary,
            FormatArg::Csv => Format::Csv,
        }
    }
}

/// Flags shared by every command that reads or compresses a matrix.
#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Oversampling r_ov (default 10).
    #[arg(long)]
    pub oversample: Option<usize>,
    /// Power iterations w (default 4 for nmf, 0 for snmf and compress).
    #[arg(long)]
    pub power: Option<usize>,
    /// Rows per block; by default one block stays within the memory budget.
    #[arg(long)]
    pub block_rows: Option<usize>,
    /// Parent directory for scratch files.
    #[arg(long)]
    pub scratch_dir: Option<PathBuf>,
    /// Keep the input on disk even if it fits the memory budget.
    #[arg(long)]
    pub out_of_core: bool,
    /// Input format; inferred from the extension (.csv or binary) when absent.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

impl Common {
    fn budget(&self) -> Result<MemoryBudget> {
        MemoryBudget::from_env()
    }

    fn load(&self, path: &Path) -> Result<MatrixStore> {
        load_matrix(
            path,
            &LoadOptions {
                format: self.format.map(Format::from),
                budget: self.budget()?,
                block_rows: self.block_rows,
                out_of_core: self.out_of_core,
                scratch_dir: self.scratch_dir.clone(),
            },
        )
    }

    fn config(&self, mut cfg: CompressionConfig) -> CompressionConfig {
        if let Some(v) = self.oversample {
            cfg.oversample = v;
        }
        if let Some(w) = self.power {
            cfg.power = w;
        }
        cfg
    }

    fn out_of_core(&self) -> Result<OutOfCore> {
        Ok(OutOfCore {
            budget: self.budget()?,
            scratch_root: self.scratch_dir.clone(),
            block_rows: self.block_rows,
        })
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Mu,
    Activeset,
    Admm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CompressArg {
    None,
    Gaussian,
    Structured,
}

#[derive(Debug, Args)]
pub struct NmfArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, value_enum, default_value = "mu")]
    pub method: MethodArg,
    #[arg(long = "compress", value_enum, default_value = "none")]
    pub compression: CompressArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long)]
    pub out_x: Option<PathBuf>,
    #[arg(long)]
    pub out_y: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SelectorArg {
    Spa,
    Xray,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReduceArg {
    Qr,
    Compressed,
}

#[derive(Debug, Args)]
pub struct SnmfArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, value_enum, default_value = "spa")]
    pub selector: SelectorArg,
    #[arg(long, value_enum, default_value = "compressed")]
    pub reduce: ReduceArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON file receiving the selected columns.
    #[arg(long)]
    pub out_k: Option<PathBuf>,
    #[arg(long)]
    pub out_y: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct CompressArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub rank: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output basis Q; written block by block.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Suite JSON, or the manifest.json of an earlier run.
    #[arg(long)]
    pub suite: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Run independent cells concurrently (error-only suites).
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GenKind {
    NmfNoisy,
    SnmfGaussian,
    Separable,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(short, long)]
    pub m: usize,
    #[arg(short, long)]
    pub n: usize,
    #[arg(short, long)]
    pub r: usize,
    /// Density of the sparse factors (nmf-noisy).
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Noise level (separable).
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON file receiving the true extreme columns (separable).
    #[arg(long)]
    pub out_k: Option<PathBuf>,
    /// Output format; inferred from the extension when absent.
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    #[arg(long)]
    pub block_rows: Option<usize>,
}

fn out_format(path: &Path) -> Format {
    Format::from_path(path)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_summary(r: &RunReport) {
    println!(
        "{}: {}x{} rank {} rel_error {:.6e} iterations {} time {:.3}s",
        r.variant, r.m, r.n, r.r, r.rel_error, r.iterations, r.time_s
    );
}

fn nmf(args: NmfArgs) -> Result<()> {
    let a = args.common.load(&args.input)?;
    let algorithm = match args.method {
        MethodArg::Mu => NmfAlgorithm::Mu,
        MethodArg::Activeset => NmfAlgorithm::ActiveSet,
        MethodArg::Admm => NmfAlgorithm::Admm,
    };
    let compression = match args.compression {
        CompressArg::None => Compression::None,
        CompressArg::Gaussian => Compression::Gaussian,
        CompressArg::Structured => Compression::Structured,
    };
    let mut run = NmfRun::new(algorithm, compression, args.rank, args.seed);
    run.config = args.common.config(run.config);
    run.max_iter = args.max_iter;
    run.tol = args.tol;
    let (pair, mut report) = run_nmf(&a, &run)?;
    report.config["input"] = json!(args.input);
    report.config["out_of_core"] = json!(a.is_file_backed());
    if let Some(p) = &args.out_x {
        save_matrix(p, &pair.x, out_format(p))?;
    }
    if let Some(p) = &args.out_y {
        save_matrix(p, &pair.y, out_format(p))?;
    }
    if let Some(p) = &args.report {
        write_json(p, &report)?;
    }
    print_summary(&report);
    Ok(())
}

fn snmf(args: SnmfArgs) -> Result<()> {
    let a = args.common.load(&args.input)?;
    let selector = match args.selector {
        SelectorArg::Spa => Selector::Spa,
        SelectorArg::Xray => Selector::Xray,
    };
    let reduction = match args.reduce {
        ReduceArg::Qr => Reduction::Qr,
        ReduceArg::Compressed => Reduction::Compressed,
    };
    let mut run = SnmfRun::new(selector, reduction, args.rank, args.seed);
    run.config = args.common.config(run.config);
    run.tsqr = TsqrOptions {
        stack_budget_bytes: args.common.budget()?.bytes,
    };
    let (res, mut report) = run_snmf(&a, &run)?;
    report.config["input"] = json!(args.input);
    report.config["out_of_core"] = json!(a.is_file_backed());
    if let Some(p) = &args.out_k {
        write_json(p, &json!({ "k": res.k }))?;
    }
    if let Some(p) = &args.out_y {
        save_matrix(p, &res.y, out_format(p))?;
    }
    if let Some(p) = &args.report {
        write_json(p, &report)?;
    }
    print_summary(&report);
    Ok(())
}

fn compress(args: CompressArgs) -> Result<()> {
    let a = args.common.load(&args.input)?;
    let cfg = args.common.config(CompressionConfig::snmf_defaults(args.rank, args.seed));
    let q = compress_store(&a, cfg, &args.common.out_of_core()?)?;
    save_store(&args.out, &q, out_format(&args.out))?;
    println!("basis {}x{} written to {}", q.rows(), q.cols(), args.out.display());
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let format = args.format.map_or_else(|| out_format(&args.out), Format::from);
    let budget = MemoryBudget::from_env()?;
    let block_rows = args.block_rows.unwrap_or_else(|| budget.block_rows(args.n));
    let spec = |kind| SyntheticSpec {
        m: args.m,
        n: args.n,
        r: args.r,
        delta: args.delta,
        kind,
        seed: args.seed,
    };
    match args.kind {
        // Rows are generated block by block, so any size can be written.
        GenKind::NmfNoisy => {
            let g = gen_nmf_synthetic(spec(SyntheticKind::NmfNoisy))?.with_block_rows(block_rows)?;
            save_store(&args.out, &g, format)?;
        }
        GenKind::SnmfGaussian => {
            let g = gen_snmf_synthetic(spec(SyntheticKind::SnmfGaussian))?.with_block_rows(block_rows)?;
            save_store(&args.out, &g, format)?;
        }
        GenKind::Separable => {
            let s = gen_separable_synthetic(args.m, args.n, args.r, args.noise, args.seed)?;
            save_matrix(&args.out, &s.a, format)?;
            if let Some(p) = &args.out_k {
                write_json(p, &json!({ "k": s.k }))?;
            }
        }
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let manifest = run_benchmark(&args.suite, &args.out, &BenchOptions { parallel: args.parallel })?;
    let failures = manifest.runs.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{} runs ({} failed), {} summary rows written to {}",
        manifest.runs.len(),
        failures,
        manifest.summary.len(),
        args.out.display()
    );
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Nmf(a) => nmf(a),
        Command::Snmf(a) => snmf(a),
        Command::Compress(a) => compress(a),
        Command::Bench(a) => bench(a),
        Command::Gen(a) => gen(a),
    }
}
