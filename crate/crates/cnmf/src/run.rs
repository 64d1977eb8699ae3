//! Timed single runs of the factorization drivers and their JSON reports.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use cnmf_core::nmf::{nmf_admm, nmf_alternating, AdmmOptions, Compression, FactorPair, Method, NmfOptions};
use cnmf_core::snmf::{snmf, Reduction, Selector, SnmfOptions, SnmfResult};
use cnmf_core::tsqr::TsqrOptions;
use cnmf_core::{CompressionConfig, RowBlocks};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NmfAlgorithm {
    Mu,
    ActiveSet,
    Admm,
}

impl NmfAlgorithm {
    pub fn name(self) -> &'static str {
        match self {
            NmfAlgorithm::Mu => "mu",
            NmfAlgorithm::ActiveSet => "activeset",
            NmfAlgorithm::Admm => "admm",
        }
    }
}

fn compression_name(c: Compression) -> &'static str {
    match c {
        Compression::None => "none",
        Compression::Gaussian => "gaussian",
        Compression::Structured => "structured",
    }
}

/// One benchmarked algorithm configuration, named as in the CSV output.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Nmf(NmfAlgorithm, Compression),
    Snmf(Selector, Reduction),
}

impl Variant {
    pub const ALL: [Variant; 12] = [
        Variant::Nmf(NmfAlgorithm::Mu, Compression::None),
        Variant::Nmf(NmfAlgorithm::Mu, Compression::Gaussian),
        Variant::Nmf(NmfAlgorithm::Mu, Compression::Structured),
        Variant::Nmf(NmfAlgorithm::ActiveSet, Compression::None),
        Variant::Nmf(NmfAlgorithm::ActiveSet, Compression::Gaussian),
        Variant::Nmf(NmfAlgorithm::ActiveSet, Compression::Structured),
        Variant::Nmf(NmfAlgorithm::Admm, Compression::None),
        Variant::Nmf(NmfAlgorithm::Admm, Compression::Structured),
        Variant::Snmf(Selector::Spa, Reduction::Qr),
        Variant::Snmf(Selector::Spa, Reduction::Compressed),
        Variant::Snmf(Selector::Xray, Reduction::Qr),
        Variant::Snmf(Selector::Xray, Reduction::Compressed),
    ];
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (base, suffix) = match *self {
            Variant::Nmf(alg, c) => (
                alg.name(),
                match c {
                    Compression::None => "",
                    Compression::Gaussian => "-gc",
                    Compression::Structured => "-sc",
                },
            ),
            Variant::Snmf(sel, red) => (
                match sel {
                    Selector::Spa => "spa",
                    Selector::Xray => "xray",
                },
                match red {
                    Reduction::Qr => "-qr",
                    Reduction::Compressed => "-sc",
                },
            ),
        };
        write!(f, "{base}{suffix}")
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.to_string() == s)
            .ok_or_else(|| {
                let known: Vec<String> = Variant::ALL.iter().map(|v| v.to_string()).collect();
                Error::Config(format!("unknown variant {s:?}; expected one of {}", known.join(", ")))
            })
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Settings of one NMF run.
#[derive(Clone, Debug)]
pub struct NmfRun {
    pub algorithm: NmfAlgorithm,
    pub compression: Compression,
    pub config: CompressionConfig,
    pub max_iter: usize,
    pub tol: f64,
}

impl NmfRun {
    pub fn new(algorithm: NmfAlgorithm, compression: Compression, rank: usize, seed: u64) -> Self {
        NmfRun {
            algorithm,
            compression,
            config: CompressionConfig::nmf_defaults(rank, seed),
            max_iter: 500,
            tol: 1e-5,
        }
    }
}

/// Settings of one separable NMF run.
#[derive(Clone, Debug)]
pub struct SnmfRun {
    pub selector: Selector,
    pub reduction: Reduction,
    pub config: CompressionConfig,
    pub tsqr: TsqrOptions,
}

impl SnmfRun {
    pub fn new(selector: Selector, reduction: Reduction, rank: usize, seed: u64) -> Self {
        let o = SnmfOptions::new(rank, selector, reduction, seed);
        SnmfRun {
            selector,
            reduction,
            config: o.config,
            tsqr: o.tsqr,
        }
    }
}

/// What a single run measured.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunReport {
    pub variant: String,
    pub m: usize,
    pub n: usize,
    pub r: usize,
    pub seed: u64,
    /// Wall time of the factorization alone; loading input is excluded.
    pub time_s: f64,
    pub rel_error: f64,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    /// Largest KKT residual after the final ADMM iteration.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kkt_residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    /// Selected columns of a separable run, in selection order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduced_rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_error_reduced: Option<f64>,
    pub config: Value,
}

fn config_json(cfg: &CompressionConfig) -> Value {
    json!({
        "rank": cfg.rank,
        "oversample": cfg.oversample,
        "power": cfg.power,
        "seed": cfg.seed,
        "reorthogonalize": cfg.reorthogonalize,
    })
}

/// Runs one NMF configuration on `a` and times it.
pub fn run_nmf<S: RowBlocks>(a: &S, run: &NmfRun) -> Result<(FactorPair, RunReport)> {
    let start = Instant::now();
    let (pair, admm) = match run.algorithm {
        NmfAlgorithm::Admm => {
            let compressed = match run.compression {
                Compression::None => false,
                Compression::Structured => true,
                Compression::Gaussian => {
                    return Err(Error::Config("ADMM supports no compression or structured compression only".into()))
                }
            };
            let mut o = AdmmOptions::new(run.config.rank, compressed, run.config.seed);
            o.config = run.config;
            o.params.max_iter = run.max_iter;
            o.params.tol = run.tol;
            let (pair, res) = nmf_admm(a, &o)?;
            (pair, Some(res))
        }
        alg => {
            let method = if alg == NmfAlgorithm::Mu { Method::Mu } else { Method::ActiveSet };
            let mut o = NmfOptions::new(run.config.rank, method, run.compression, run.config.seed);
            o.config = run.config;
            o.max_iter = run.max_iter;
            o.tol = run.tol;
            (nmf_alternating(a, &o)?, None)
        }
    };
    let time_s = start.elapsed().as_secs_f64();
    let report = RunReport {
        variant: Variant::Nmf(run.algorithm, run.compression).to_string(),
        m: a.rows(),
        n: a.cols(),
        r: run.config.rank,
        seed: run.config.seed,
        time_s,
        rel_error: pair.relative_error,
        iterations: pair.iterations,
        objective_trace: pair.objective_trace.clone(),
        kkt_residual: admm.as_ref().map(|r| r.residual.max()),
        converged: admm.as_ref().map(|r| r.converged),
        k: None,
        reduced_rows: None,
        rel_error_reduced: None,
        config: json!({
            "method": run.algorithm.name(),
            "compression": compression_name(run.compression),
            "max_iter": run.max_iter,
            "tol": run.tol,
            "compression_config": config_json(&run.config),
        }),
    };
    Ok((pair, report))
}

/// Runs one separable NMF configuration on `a` and times it. The iteration
/// count reported is the number of selected columns.
pub fn run_snmf<S: RowBlocks>(a: &S, run: &SnmfRun) -> Result<(SnmfResult, RunReport)> {
    let mut o = SnmfOptions::new(run.config.rank, run.selector, run.reduction, run.config.seed);
    o.config = run.config;
    o.tsqr = run.tsqr;
    let start = Instant::now();
    let res = snmf(a, &o)?;
    let time_s = start.elapsed().as_secs_f64();
    let report = RunReport {
        variant: Variant::Snmf(run.selector, run.reduction).to_string(),
        m: a.rows(),
        n: a.cols(),
        r: run.config.rank,
        seed: run.config.seed,
        time_s,
        rel_error: res.rel_error_full,
        iterations: res.k.len(),
        objective_trace: Vec::new(),
        kkt_residual: None,
        converged: None,
        k: Some(res.k.clone()),
        reduced_rows: Some(res.reduced_rows),
        rel_error_reduced: Some(res.rel_error_reduced),
        config: json!({
            "selector": match run.selector { Selector::Spa => "spa", Selector::Xray => "xray" },
            "reduction": match run.reduction { Reduction::Qr => "qr", Reduction::Compressed => "compressed" },
            "compression_config": config_json(&run.config),
        }),
    };
    Ok((res, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        let names: Vec<String> = Variant::ALL.iter().map(|v| v.to_string()).collect();
        assert_eq!(
            names,
            [
                "mu", "mu-gc", "mu-sc", "activeset", "activeset-gc", "activeset-sc", "admm", "admm-sc", "spa-qr",
                "spa-sc", "xray-qr", "xray-sc"
            ]
        );
        for v in Variant::ALL {
            assert_eq!(v.to_string().parse::<Variant>().unwrap(), v);
        }
        assert!("admm-gc".parse::<Variant>().is_err());
    }
}
