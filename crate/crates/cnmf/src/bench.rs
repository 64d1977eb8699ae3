//! Suite runner: synthetic cells × variants × sizes × repeats, written as
//! `raw.csv` (one row per run), `summary.csv` (one row per cell, variant
//! and size) and `manifest.json` (the suite, every seed and every failure).
//!
//! Within one (cell, size, repeat) all variants see the same matrix and the
//! same run seed, so their errors are paired.

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use cnmf_core::rng::derive_seed;
use cnmf_core::synth::{gen_nmf_synthetic, gen_separable_synthetic, gen_snmf_synthetic, SyntheticKind, SyntheticSpec};
use cnmf_core::DenseMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::run::{run_nmf, run_snmf, NmfRun, RunReport, SnmfRun, Variant};

pub const CSV_HEADER: [&str; 9] = ["variant", "m", "n", "r", "delta", "seed", "time_s", "rel_error", "iterations"];

fn default_repeats() -> usize {
    10
}
fn default_max_iter() -> usize {
    500
}
fn default_tol() -> f64 {
    1e-5
}
fn default_delta() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    /// Sparse noisy product for the classical NMF variants.
    NmfNoisy,
    /// Product of standard normal factors.
    SnmfGaussian,
    /// Exactly separable matrix plus optional noise.
    Separable,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    #[serde(default)]
    pub name: String,
    pub kind: CellKind,
    /// `[m, n]` pairs.
    pub sizes: Vec<[usize; 2]>,
    pub r: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Noise level of separable cells.
    #[serde(default)]
    pub noise: f64,
    pub variants: Vec<Variant>,
    /// Overrides the suite's repeat count.
    #[serde(default)]
    pub repeats: Option<usize>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    #[serde(default)]
    pub cells: Vec<Cell>,
}

impl Suite {
    /// Parses a suite file, or the `suite` entry of a previous manifest.
    pub fn from_json(text: &str) -> Result<Suite> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let suite = match v.get("suite") {
            Some(inner) if v.get("runs").is_some() => serde_json::from_value(inner.clone())?,
            _ => serde_json::from_value(v)?,
        };
        Ok(suite)
    }

    pub fn load(path: &Path) -> Result<Suite> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Suite::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn validate(&self) -> Result<()> {
        for (i, c) in self.cells.iter().enumerate() {
            if !(c.noise >= 0.0) {
                return Err(Error::Config(format!("cell {i}: noise must be nonnegative")));
            }
        }
        Ok(())
    }
}

/// Failed runs carry NaN, which JSON stores as null.
fn nan_when_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Seed of the matrix and of every run at (cell, size, repeat).
pub fn run_seed(suite_seed: u64, cell: usize, size: usize, repeat: usize) -> u64 {
    derive_seed(derive_seed(derive_seed(suite_seed, cell as u64), size as u64), repeat as u64)
}

/// One measured run; numeric fields are NaN when the run failed.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RawRow {
    pub cell: usize,
    pub variant: String,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub delta: f64,
    pub seed: u64,
    pub repeat: usize,
    #[serde(deserialize_with = "nan_when_null")]
    pub time_s: f64,
    #[serde(deserialize_with = "nan_when_null")]
    pub rel_error: f64,
    #[serde(deserialize_with = "nan_when_null")]
    pub iterations: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Aggregate over the repeats of one (cell, variant, size): mean relative
/// error, median time and mean iteration count over the successful runs.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SummaryRow {
    pub cell: usize,
    pub variant: String,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub delta: f64,
    /// Seed of the first repeat.
    pub seed: u64,
    #[serde(deserialize_with = "nan_when_null")]
    pub time_s: f64,
    #[serde(deserialize_with = "nan_when_null")]
    pub rel_error: f64,
    #[serde(deserialize_with = "nan_when_null")]
    pub iterations: f64,
    pub runs: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub suite: Suite,
    pub runs: Vec<RawRow>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Clone, Debug, Default)]
pub struct BenchOptions {
    /// Runs (cell, size, repeat) units on all available cores; timings are
    /// then less faithful, error columns are unchanged.
    pub parallel: bool,
}

fn generate(cell: &Cell, m: usize, n: usize, seed: u64) -> cnmf_core::Result<DenseMatrix> {
    let spec = |kind| SyntheticSpec {
        m,
        n,
        r: cell.r,
        delta: cell.delta,
        kind,
        seed,
    };
    Ok(match cell.kind {
        CellKind::NmfNoisy => gen_nmf_synthetic(spec(SyntheticKind::NmfNoisy))?.to_dense(),
        CellKind::SnmfGaussian => gen_snmf_synthetic(spec(SyntheticKind::SnmfGaussian))?.to_dense(),
        CellKind::Separable => gen_separable_synthetic(m, n, cell.r, cell.noise, seed)?.a,
    })
}

fn run_variant(a: &DenseMatrix, cell: &Cell, variant: Variant, seed: u64) -> Result<RunReport> {
    match variant {
        Variant::Nmf(alg, comp) => {
            let mut run = NmfRun::new(alg, comp, cell.r, seed);
            run.max_iter = cell.max_iter;
            run.tol = cell.tol;
            Ok(run_nmf(a, &run)?.1)
        }
        Variant::Snmf(sel, red) => Ok(run_snmf(a, &SnmfRun::new(sel, red, cell.r, seed))?.1),
    }
}

/// Runs every variant on one generated matrix.
fn run_unit(suite: &Suite, unit: (usize, usize, usize)) -> Vec<RawRow> {
    let (ci, si, rep) = unit;
    let cell = &suite.cells[ci];
    let [m, n] = cell.sizes[si];
    let seed = run_seed(suite.seed, ci, si, rep);
    let data = generate(cell, m, n, seed).map_err(|e| e.to_string());
    cell.variants
        .iter()
        .map(|&v| {
            let outcome = match &data {
                Ok(a) => run_variant(a, cell, v, seed),
                Err(e) => Err(Error::Config(format!("generating the input: {e}"))),
            };
            let mut row = RawRow {
                cell: ci,
                variant: v.to_string(),
                m,
                n,
                r: cell.r,
                delta: cell.delta,
                seed,
                repeat: rep,
                time_s: f64::NAN,
                rel_error: f64::NAN,
                iterations: f64::NAN,
                error: None,
            };
            match outcome {
                Ok(rep) => {
                    row.time_s = rep.time_s;
                    row.rel_error = rep.rel_error;
                    row.iterations = rep.iterations as f64;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn summarize(suite: &Suite, raw: &[RawRow]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for (ci, cell) in suite.cells.iter().enumerate() {
        for (si, &[m, n]) in cell.sizes.iter().enumerate() {
            for v in &cell.variants {
                let name = v.to_string();
                let rows: Vec<&RawRow> = raw
                    .iter()
                    .filter(|r| r.cell == ci && r.m == m && r.n == n && r.variant == name)
                    .collect();
                let ok: Vec<&&RawRow> = rows.iter().filter(|r| r.error.is_none()).collect();
                out.push(SummaryRow {
                    cell: ci,
                    variant: name,
                    m,
                    n,
                    r: cell.r,
                    delta: cell.delta,
                    seed: run_seed(suite.seed, ci, si, 0),
                    time_s: median(ok.iter().map(|r| r.time_s).collect()),
                    rel_error: mean(&ok.iter().map(|r| r.rel_error).collect::<Vec<_>>()),
                    iterations: mean(&ok.iter().map(|r| r.iterations).collect::<Vec<_>>()),
                    runs: rows.len(),
                    failures: rows.len() - ok.len(),
                });
            }
        }
    }
    out
}

/// Runs the suite in memory.
pub fn run_suite(suite: &Suite, opts: &BenchOptions) -> Result<Manifest> {
    suite.validate()?;
    let units: Vec<(usize, usize, usize)> = suite
        .cells
        .iter()
        .enumerate()
        .flat_map(|(ci, c)| {
            let reps = c.repeats.unwrap_or(suite.repeats);
            (0..c.sizes.len()).flat_map(move |si| (0..reps).map(move |rep| (ci, si, rep)))
        })
        .collect();
    let mut per_unit: Vec<Option<Vec<RawRow>>> = vec![None; units.len()];
    if opts.parallel && units.len() > 1 {
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(units.len());
        let next = AtomicUsize::new(0);
        let slots = Mutex::new(&mut per_unit);
        std::thread::scope(|scope| {
            for _ in 0..threads {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= units.len() {
                        break;
                    }
                    let rows = run_unit(suite, units[i]);
                    slots.lock().unwrap_or_else(|p| p.into_inner())[i] = Some(rows);
                });
            }
        });
    } else {
        for (i, &u) in units.iter().enumerate() {
            per_unit[i] = Some(run_unit(suite, u));
        }
    }
    // Unit order, then variant order: identical for sequential and parallel runs.
    let runs: Vec<RawRow> = per_unit.into_iter().flatten().flatten().collect();
    let summary = summarize(suite, &runs);
    Ok(Manifest {
        suite: suite.clone(),
        runs,
        summary,
    })
}

/// Shortest round-trip form; scientific notation outside `[1e-4, 1e15)`.
fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v.is_nan() {
        "NaN".into()
    } else if v == 0.0 || (1e-4..1e15).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn write_csv<I>(path: &Path, rows: I) -> Result<()>
where
    I: IntoIterator<Item = [String; 9]>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `raw.csv`, `summary.csv` and `manifest.json` into `dir`.
pub fn write_outputs(manifest: &Manifest, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(
        &dir.join("raw.csv"),
        manifest.runs.iter().map(|r| {
            [
                r.variant.clone(),
                r.m.to_string(),
                r.n.to_string(),
                r.r.to_string(),
                fmt_num(r.delta),
                r.seed.to_string(),
                fmt_num(r.time_s),
                fmt_num(r.rel_error),
                fmt_num(r.iterations),
            ]
        }),
    )?;
    write_csv(
        &dir.join("summary.csv"),
        manifest.summary.iter().map(|r| {
            [
                r.variant.clone(),
                r.m.to_string(),
                r.n.to_string(),
                r.r.to_string(),
                fmt_num(r.delta),
                r.seed.to_string(),
                fmt_num(r.time_s),
                fmt_num(r.rel_error),
                fmt_num(r.iterations),
            ]
        }),
    )?;
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Loads the suite at `suite_path`, runs it and writes the outputs to `out`.
pub fn run_benchmark(suite_path: &Path, out: &Path, opts: &BenchOptions) -> Result<Manifest> {
    let suite = Suite::load(suite_path)?;
    let manifest = run_suite(&suite, opts)?;
    write_outputs(&manifest, out)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.25), "0.25");
        assert_eq!(fmt_num(4.5e-16), "4.5e-16");
        assert_eq!(fmt_num(f64::NAN), "NaN");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(1e-2), "0.01");
    }

    #[test]
    fn median_and_mean() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(vec![]).is_nan());
        assert!(mean(&[]).is_nan());
    }

    #[test]
    fn suite_defaults() {
        let s = Suite::from_json(r#"{"cells":[{"kind":"nmf_noisy","sizes":[[20,15]],"r":2,"variants":["mu"]}]}"#).unwrap();
        assert_eq!(s.repeats, 10);
        assert_eq!(s.cells[0].delta, 1.0);
        assert_eq!(s.cells[0].max_iter, 500);
        assert!(Suite::from_json(r#"{"cells":[{"kind":"nmf_noisy","sizes":[],"r":2,"variants":["nope"]}]}"#).is_err());
    }

    #[test]
    fn seeds_differ_across_units() {
        let a = run_seed(1, 0, 0, 0);
        assert_ne!(a, run_seed(1, 0, 0, 1));
        assert_ne!(a, run_seed(1, 0, 1, 0));
        assert_ne!(a, run_seed(1, 1, 0, 0));
    }
}
