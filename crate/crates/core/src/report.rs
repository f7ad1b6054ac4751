//! One-shot comparison of two embedding sets, with a serializable report.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::barcode::{barcode_metrics, BarcodeMetrics, BarcodeOptions, FidelityConvention, OutlierPolicy};
use crate::baseline::{frechet_distance, prdc, PrdcScores, DEFAULT_K};
use crate::distance::{DistanceMode, SelfPairs, StorageMode};
use crate::embedding::EmbeddingSet;
use crate::error::Result;
use crate::experiment::Metric;
use crate::projection::{fit_projection, project, ProjectionModel, ProjectionTarget};
use crate::sampling::SAMPLER_NAME;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub label: String,
    pub source: String,
    pub rows: usize,
    pub dims: usize,
    /// First 64 bits of the SHA-256 of shape and little-endian f64 values, as hex.
    pub digest: String,
}

impl InputSummary {
    pub fn of<T: Real>(set: &EmbeddingSet<T>) -> Self {
        Self {
            label: set.label().to_string(),
            source: set.source().to_string(),
            rows: set.rows(),
            dims: set.dims(),
            digest: content_digest(set),
        }
    }
}

pub fn content_digest<T: Real>(set: &EmbeddingSet<T>) -> String {
    let mut h = Sha256::new();
    h.update((set.rows() as u64).to_le_bytes());
    h.update((set.dims() as u64).to_le_bytes());
    for v in set.as_slice() {
        h.update(v.as_f64().to_le_bytes());
    }
    let out = h.finalize();
    out[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionInfo {
    pub dims: usize,
    pub explainability: f64,
    pub centered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineInfo {
    pub version: String,
    pub convention: FidelityConvention,
    pub sampler: String,
    pub self_pairs: SelfPairs,
    pub exact_limit: u64,
    /// Storage used for the cross, reference and comparison multisets.
    pub storage: [StorageMode; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub inputs: Vec<InputSummary>,
    pub barcode: Option<BarcodeMetrics<f64>>,
    pub prdc: Option<PrdcScores>,
    pub fid: Option<f64>,
    pub projection: Option<ProjectionInfo>,
    pub outlier_policy: Option<OutlierPolicy>,
    /// Wall-clock seconds per stage.
    pub timing: BTreeMap<String, f64>,
    pub engine: EngineInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeRequest {
    pub metrics: Vec<Metric>,
    pub k: usize,
    pub projection: Option<(ProjectionTarget, bool)>,
    pub barcode: BarcodeOptions,
}

impl Default for ComputeRequest {
    fn default() -> Self {
        Self {
            metrics: vec![Metric::Barcode],
            k: DEFAULT_K,
            projection: None,
            barcode: BarcodeOptions::default(),
        }
    }
}

fn storage_for(pairs: u64, opts: &BarcodeOptions) -> StorageMode {
    match opts.mode {
        DistanceMode::Exact => StorageMode::Exact,
        DistanceMode::Streaming => StorageMode::Streaming,
        DistanceMode::Auto if opts.policy.is_some() || pairs <= opts.exact_limit => StorageMode::Exact,
        DistanceMode::Auto => StorageMode::Streaming,
    }
}

/// Compute the requested metrics of `q` against reference `p`. When a
/// projection is requested both sets are projected first and the fitted model
/// is returned alongside the report.
pub fn compute_report(
    p: &EmbeddingSet<f64>,
    q: &EmbeddingSet<f64>,
    req: &ComputeRequest,
) -> Result<(MetricReport, Option<ProjectionModel<f64>>)> {
    let mut timing = BTreeMap::new();
    let inputs = vec![InputSummary::of(p), InputSummary::of(q)];

    let (model, projected) = match req.projection {
        Some((target, center)) => {
            let t = Instant::now();
            let m = fit_projection(p, q, target, center)?;
            let pp = project(&m, p)?;
            let qq = project(&m, q)?;
            timing.insert("projection".to_string(), t.elapsed().as_secs_f64());
            (Some(m), Some((pp, qq)))
        }
        None => (None, None),
    };
    let (p, q) = match &projected {
        Some((a, b)) => (a, b),
        None => (p, q),
    };

    let mut timed = |stage: &str, t: Instant| {
        timing.insert(stage.to_string(), t.elapsed().as_secs_f64());
    };
    let barcode = if req.metrics.contains(&Metric::Barcode) {
        let t = Instant::now();
        let m = barcode_metrics(p, q, &req.barcode)?;
        timed("barcode", t);
        Some(m)
    } else {
        None
    };
    let prdc_scores = if req.metrics.contains(&Metric::Prdc) {
        let t = Instant::now();
        let s = prdc(p, q, req.k)?;
        timed("prdc", t);
        Some(s)
    } else {
        None
    };
    let fid = if req.metrics.contains(&Metric::Fid) {
        let t = Instant::now();
        let f = frechet_distance(p, q)?;
        timed("fid", t);
        Some(f)
    } else {
        None
    };

    let (n, m) = (p.rows() as u64, q.rows() as u64);
    let within = |r: u64| match req.barcode.self_pairs {
        SelfPairs::Exclude => r * r.saturating_sub(1),
        SelfPairs::Include => r * r,
    };
    let report = MetricReport {
        inputs,
        barcode,
        prdc: prdc_scores,
        fid,
        projection: model.as_ref().map(|m| ProjectionInfo {
            dims: m.output_dims(),
            explainability: m.explainability(),
            centered: m.is_centered(),
        }),
        outlier_policy: req.barcode.policy,
        timing,
        engine: EngineInfo {
            version: crate::VERSION.to_string(),
            convention: req.barcode.convention,
            sampler: SAMPLER_NAME.to_string(),
            self_pairs: req.barcode.self_pairs,
            exact_limit: req.barcode.exact_limit,
            storage: [
                storage_for(n * m, &req.barcode),
                storage_for(within(n), &req.barcode),
                storage_for(within(m), &req.barcode),
            ],
        },
    };
    Ok((report, model))
}

impl MetricReport {
    /// Flat `(name, value)` view of every computed number.
    pub fn values(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = Vec::new();
        if let Some(b) = &self.barcode {
            out.extend(
                [
                    ("fidelity_pq", b.fidelity_pq),
                    ("fidelity_pp", b.fidelity_pp),
                    ("fidelity_qq", b.fidelity_qq),
                    ("diversity_pq", b.diversity_pq),
                    ("diversity_pp", b.diversity_pp),
                    ("diversity_qq", b.diversity_qq),
                ]
                .map(|(k, v)| (k.to_string(), v)),
            );
            if let Some(v) = b.relative_fidelity {
                out.push(("relative_fidelity".into(), v));
            }
            if let Some(v) = b.relative_diversity {
                out.push(("relative_diversity".into(), v));
            }
        }
        if let Some(s) = &self.prdc {
            out.extend(
                [
                    ("precision", s.precision),
                    ("recall", s.recall),
                    ("density", s.density),
                    ("coverage", s.coverage),
                ]
                .map(|(k, v)| (k.to_string(), v)),
            );
        }
        if let Some(f) = self.fid {
            out.push(("fid".into(), f));
        }
        if let Some(p) = &self.projection {
            out.push(("projection_dims".into(), p.dims as f64));
            out.push(("explainability".into(), p.explainability));
        }
        out
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "metric,value")?;
        for (k, v) in self.values() {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    }
}
