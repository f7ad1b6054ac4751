//! Declarative, seeded experiments: Gaussian pairs, outlier injection, mean
//! sweeps, swap stress tests and contamination tests.
//!
//! A spec is a TOML document:
//!
//! ```toml
//! seed = 7
//! repetitions = 5
//! metrics = ["barcode", "prdc"]
//! k = 5
//! convention = "survival"          # or "cdf"
//!
//! [outlier_policy]                 # optional
//! probability = 0.001
//! position = "out"                 # "in" | "out" | "both"
//!
//! [protocol]
//! kind = "mean_sweep"
//! n = 999
//! d = 64
//! means = [-5.0, 0.0, 5.0]
//! ```
//!
//! Protocol kinds and their keys:
//!
//! | kind                | keys                                             |
//! |---------------------|--------------------------------------------------|
//! | `gaussian_pair`     | `n`, `d`                                         |
//! | `outlier_injection` | `n_clean`, `d`, `outlier_value` (default 3)      |
//! | `mean_sweep`        | `n`, `d`, `means`                                |
//! | `swap_stress`       | `a`, `b` (data sources), `exponents`             |
//! | `contamination`     | `base`, `foreign` (data sources), `exponents`    |
//!
//! A data source is either `{ kind = "file", path = "x.npy" }` (relative
//! paths resolve against the spec file) or
//! `{ kind = "gaussian", n = 1000, d = 64, mean = 0.0 }`.

mod protocols;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barcode::{FidelityConvention, OutlierPolicy};
use crate::baseline::DEFAULT_K;
use crate::distance::DEFAULT_EXACT_LIMIT;
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::io::{load_embeddings, FileFormat};
use crate::sampling::{sample_gaussian_stream, SAMPLER_NAME};

pub use protocols::{
    evaluate, run_contamination, run_gaussian_pair, run_mean_sweep, run_outlier_injection,
    run_swap_stress,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Barcode,
    Prdc,
    Fid,
    /// Concentration diagnostics of the reference set.
    Concentration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    File {
        path: PathBuf,
        #[serde(default)]
        format: Option<FileFormat>,
    },
    Gaussian {
        n: usize,
        d: usize,
        #[serde(default)]
        mean: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Protocol {
    GaussianPair {
        n: usize,
        d: usize,
    },
    OutlierInjection {
        n_clean: usize,
        d: usize,
        #[serde(default = "default_outlier_value")]
        outlier_value: f64,
    },
    MeanSweep {
        n: usize,
        d: usize,
        means: Vec<f64>,
    },
    SwapStress {
        a: DataSource,
        b: DataSource,
        #[serde(default)]
        exponents: Vec<u32>,
    },
    Contamination {
        base: DataSource,
        foreign: DataSource,
        #[serde(default)]
        exponents: Vec<u32>,
    },
}

fn default_outlier_value() -> f64 {
    3.0
}

fn default_repetitions() -> u32 {
    1
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Barcode]
}

fn default_k() -> usize {
    DEFAULT_K
}

fn default_exact_limit() -> u64 {
    DEFAULT_EXACT_LIMIT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_repetitions")]
    pub repetitions: u32,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub convention: FidelityConvention,
    #[serde(default = "default_exact_limit")]
    pub exact_limit: u64,
    #[serde(default)]
    pub outlier_policy: Option<OutlierPolicy>,
    pub protocol: Protocol,
}

/// Metric selection and parameters shared by every protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub metrics: Vec<Metric>,
    pub k: usize,
    pub policy: Option<OutlierPolicy>,
    pub convention: FidelityConvention,
    pub exact_limit: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            metrics: default_metrics(),
            k: DEFAULT_K,
            policy: None,
            convention: FidelityConvention::Survival,
            exact_limit: DEFAULT_EXACT_LIMIT,
        }
    }
}

impl RunOptions {
    pub fn wants(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_point: String,
    pub metric: String,
    pub value: f64,
    pub rep: u32,
    pub seed: u64,
}

/// Rows chosen by a swap or replacement, for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexLog {
    pub sweep_point: String,
    pub rep: u32,
    pub role: String,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub engine_version: String,
    pub sampler: String,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub spec: Option<ExperimentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
    pub index_log: Vec<IndexLog>,
    pub provenance: Provenance,
}

impl ExperimentResult {
    pub(crate) fn new(seed: u64) -> Self {
        Self {
            rows: Vec::new(),
            index_log: Vec::new(),
            provenance: Provenance {
                engine_version: crate::VERSION.to_string(),
                sampler: SAMPLER_NAME.to_string(),
                seeds: vec![seed],
                spec: None,
            },
        }
    }

    pub(crate) fn push_all(&mut self, point: &str, seed: u64, values: Vec<(String, f64)>) {
        self.rows.extend(values.into_iter().map(|(metric, value)| ResultRow {
            sweep_point: point.to_string(),
            metric,
            value,
            rep: 0,
            seed,
        }));
    }

    /// First value recorded for `(sweep_point, metric)`.
    pub fn value(&self, sweep_point: &str, metric: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.sweep_point == sweep_point && r.metric == metric)
            .map(|r| r.value)
    }

    /// Sweep points in first-appearance order.
    pub fn sweep_points(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.sweep_point) {
                out.push(r.sweep_point.clone());
            }
        }
        out
    }

    /// Mean and population standard deviation over repetitions, per `(sweep_point, metric)`.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut groups: Vec<((String, String), Vec<f64>)> = Vec::new();
        let mut index: BTreeMap<(String, String), usize> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.sweep_point.clone(), r.metric.clone());
            let slot = *index.entry(key.clone()).or_insert_with(|| {
                groups.push((key, Vec::new()));
                groups.len() - 1
            });
            groups[slot].1.push(r.value);
        }
        groups
            .into_iter()
            .map(|((sweep_point, metric), v)| {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                SummaryRow {
                    sweep_point,
                    metric,
                    mean,
                    std: var.sqrt(),
                    reps: v.len() as u32,
                }
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "sweep_point,metric,value,rep,seed")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                csv_field(&r.sweep_point),
                csv_field(&r.metric),
                r.value,
                r.rep,
                r.seed
            )?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "provenance": self.provenance,
            "summary": self.summary(),
            "index_log": self.index_log,
        })
    }

    /// Write `results.csv` and `summary.json` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join("results.csv");
        let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let mut w = BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(&csv_path, e))?;
        let json_path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&self.summary_json())
            .map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep_point: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub reps: u32,
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<spec>", e.to_string()))?;
        let spec: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().to_string())
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions", "must be at least 1"));
        }
        if self.metrics.is_empty() {
            return Err(Error::config("metrics", "must name at least one metric"));
        }
        if self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if let Some(p) = &self.outlier_policy {
            p.validate()
                .map_err(|e| Error::config("outlier_policy.probability", e.to_string()))?;
        }
        let positive = |key: &str, v: usize, min: usize| {
            if v < min {
                Err(Error::config(
                    format!("protocol.{key}"),
                    format!("must be at least {min}, got {v}"),
                ))
            } else {
                Ok(())
            }
        };
        let exponents_ok = |key: &str, e: &[u32]| {
            if let Some(bad) = e.iter().find(|&&x| x > 40) {
                Err(Error::config(
                    format!("protocol.{key}"),
                    format!("exponent {bad} is too large"),
                ))
            } else {
                Ok(())
            }
        };
        let source_ok = |key: &str, s: &DataSource| match s {
            DataSource::Gaussian { n, d, mean } => {
                positive(&format!("{key}.n"), *n, 2)?;
                positive(&format!("{key}.d"), *d, 1)?;
                if !mean.is_finite() {
                    return Err(Error::config(format!("protocol.{key}.mean"), "must be finite"));
                }
                Ok(())
            }
            DataSource::File { .. } => Ok(()),
        };
        match &self.protocol {
            Protocol::GaussianPair { n, d } => {
                positive("n", *n, 2)?;
                positive("d", *d, 1)
            }
            Protocol::OutlierInjection {
                n_clean,
                d,
                outlier_value,
            } => {
                positive("n_clean", *n_clean, 2)?;
                positive("d", *d, 1)?;
                if !outlier_value.is_finite() {
                    return Err(Error::config("protocol.outlier_value", "must be finite"));
                }
                Ok(())
            }
            Protocol::MeanSweep { n, d, means } => {
                positive("n", *n, 2)?;
                positive("d", *d, 1)?;
                if means.is_empty() {
                    return Err(Error::config("protocol.means", "sweep grid must not be empty"));
                }
                if means.iter().any(|m| !m.is_finite()) {
                    return Err(Error::config("protocol.means", "means must be finite"));
                }
                Ok(())
            }
            Protocol::SwapStress { a, b, exponents } => {
                source_ok("a", a)?;
                source_ok("b", b)?;
                exponents_ok("exponents", exponents)
            }
            Protocol::Contamination {
                base,
                foreign,
                exponents,
            } => {
                source_ok("base", base)?;
                source_ok("foreign", foreign)?;
                exponents_ok("exponents", exponents)
            }
        }
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            metrics: self.metrics.clone(),
            k: self.k,
            policy: self.outlier_policy,
            convention: self.convention,
            exact_limit: self.exact_limit,
        }
    }
}

/// Seed of repetition `rep`.
pub fn repetition_seed(seed: u64, rep: u32) -> u64 {
    seed.wrapping_add(rep as u64)
}

impl DataSource {
    /// Materialize the source. Gaussian sources draw from `stream` of `seed`.
    pub fn load(&self, base_dir: &Path, seed: u64, stream: u64) -> Result<EmbeddingSet<f64>> {
        match self {
            DataSource::File { path, format } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base_dir.join(path)
                };
                let fmt = match format {
                    Some(f) => *f,
                    None => FileFormat::from_path(&full)?,
                };
                load_embeddings(&full, fmt)
            }
            DataSource::Gaussian { n, d, mean } => sample_gaussian_stream(*n, *d, *mean, seed, stream),
        }
    }
}

/// Run every repetition of `spec`. Relative file paths resolve against `base_dir`.
pub fn run_spec(spec: &ExperimentSpec, base_dir: &Path) -> Result<ExperimentResult> {
    spec.validate()?;
    let opts = spec.run_options();
    let reps: Vec<u32> = (0..spec.repetitions).collect();
    let results: Vec<ExperimentResult> = reps
        .par_iter()
        .map(|&rep| {
            let seed = repetition_seed(spec.seed, rep);
            let mut r = run_once(&spec.protocol, base_dir, seed, &opts)?;
            r.rows.iter_mut().for_each(|row| row.rep = rep);
            r.index_log.iter_mut().for_each(|l| l.rep = rep);
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let mut out = ExperimentResult::new(spec.seed);
    out.provenance.seeds = reps.iter().map(|&r| repetition_seed(spec.seed, r)).collect();
    out.provenance.spec = Some(spec.clone());
    for r in results {
        out.rows.extend(r.rows);
        out.index_log.extend(r.index_log);
    }
    Ok(out)
}

fn run_once(protocol: &Protocol, base_dir: &Path, seed: u64, opts: &RunOptions) -> Result<ExperimentResult> {
    match protocol {
        Protocol::GaussianPair { n, d } => run_gaussian_pair(*n, *d, seed, opts),
        Protocol::OutlierInjection {
            n_clean,
            d,
            outlier_value,
        } => run_outlier_injection(*n_clean, *d, *outlier_value, seed, opts),
        Protocol::MeanSweep { n, d, means } => run_mean_sweep(*n, *d, means, seed, opts),
        Protocol::SwapStress { a, b, exponents } => {
            let a_set = a.load(base_dir, seed, 10)?;
            let b_set = b.load(base_dir, seed, 11)?;
            run_swap_stress(&a_set, &b_set, exponents, seed, opts)
        }
        Protocol::Contamination {
            base,
            foreign,
            exponents,
        } => {
            let base_set = base.load(base_dir, seed, 10)?;
            let foreign_set = foreign.load(base_dir, seed, 11)?;
            run_contamination(&base_set, &foreign_set, exponents, seed, opts)
        }
    }
}
