//! Fidelity and diversity of distance multisets, their relative forms, and
//! distance-domain outlier trimming.

use serde::{Deserialize, Serialize};

use crate::distance::{
    cross_distances, normalize, self_distances_with, DistanceMode, DistanceSummary,
    NormalizedMoments, SelfPairs, DEFAULT_EXACT_LIMIT,
};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Which way the normalized curve is read when integrating for fidelity.
///
/// `Survival` integrates the area above the count of still-alive bars,
/// giving `1 − E[d̃]`: small relative distances mean high fidelity.
/// `Cdf` is the literal mean `E[d̃]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityConvention {
    #[default]
    Survival,
    Cdf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierPosition {
    /// Drop the smallest distances.
    In,
    /// Drop the largest distances.
    Out,
    /// Drop from both ends.
    Both,
}

/// Remove `⌊p·count⌋` distances from the designated end(s) of each multiset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierPolicy {
    pub probability: f64,
    pub position: OutlierPosition,
}

impl OutlierPolicy {
    pub fn new(probability: f64, position: OutlierPosition) -> Result<Self> {
        let policy = Self {
            probability,
            position,
        };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.probability) {
            return Err(Error::Parameter(format!(
                "outlier probability must lie in [0, 0.5), got {}",
                self.probability
            )));
        }
        Ok(())
    }

    /// Removal count per trimmed side.
    pub fn removal_count(&self, count: u64) -> u64 {
        // The nudge keeps products like 0.001 × 999000 from flooring to 998.
        (self.probability * count as f64 + 1e-9).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DegenerateFlags {
    pub pq: bool,
    pub pp: bool,
    pub qq: bool,
}

/// The six base barcode numbers and the two ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarcodeMetrics<T> {
    pub fidelity_pq: T,
    pub fidelity_pp: T,
    pub fidelity_qq: T,
    pub diversity_pq: T,
    pub diversity_pp: T,
    pub diversity_qq: T,
    /// `f(P,Q) / f(P,P)`; `None` when the denominator is zero or degenerate.
    pub relative_fidelity: Option<T>,
    /// `δ(P,Q) / (√δ(P,P) · √δ(Q,Q))`; `None` when either intrinsic diversity vanishes.
    pub relative_diversity: Option<T>,
    pub degenerate: DegenerateFlags,
    pub convention: FidelityConvention,
}

/// Knobs for [`barcode_metrics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarcodeOptions {
    pub policy: Option<OutlierPolicy>,
    pub convention: FidelityConvention,
    pub mode: DistanceMode,
    pub exact_limit: u64,
    pub self_pairs: SelfPairs,
}

impl Default for BarcodeOptions {
    fn default() -> Self {
        Self {
            policy: None,
            convention: FidelityConvention::Survival,
            mode: DistanceMode::Auto,
            exact_limit: DEFAULT_EXACT_LIMIT,
            self_pairs: SelfPairs::Exclude,
        }
    }
}

/// Degenerate moments (all distances zero) give fidelity 1.
pub fn fidelity<T: Real>(moments: &NormalizedMoments<T>, convention: FidelityConvention) -> T {
    if moments.degenerate {
        return T::one();
    }
    match convention {
        FidelityConvention::Survival => T::one() - moments.mean_norm,
        FidelityConvention::Cdf => moments.mean_norm,
    }
}

/// Standard deviation of the normalized distances; 0 when degenerate.
pub fn diversity<T: Real>(moments: &NormalizedMoments<T>) -> T {
    if moments.degenerate {
        return T::zero();
    }
    moments.var_norm.sqrt()
}

pub fn relative_fidelity<T: Real>(fidelity_pq: T, fidelity_pp: T) -> Option<T> {
    (fidelity_pp > T::zero()).then(|| fidelity_pq / fidelity_pp)
}

pub fn relative_diversity<T: Real>(diversity_pq: T, diversity_pp: T, diversity_qq: T) -> Option<T> {
    (diversity_pp > T::zero() && diversity_qq > T::zero())
        .then(|| diversity_pq / (diversity_pp.sqrt() * diversity_qq.sqrt()))
}

/// Trim an exact multiset according to `policy` and recompute its moments.
pub fn remove_outliers<T: Real>(
    summary: &DistanceSummary<T>,
    policy: &OutlierPolicy,
) -> Result<DistanceSummary<T>> {
    policy.validate()?;
    let d = summary.distances.as_ref().ok_or_else(|| {
        Error::Capacity("outlier removal needs the exact multiset; raise the exact-pair limit".into())
    })?;
    let r = policy.removal_count(summary.count) as usize;
    if r == 0 {
        return Ok(summary.clone());
    }
    let (lo, hi) = match policy.position {
        OutlierPosition::In => (r, d.len()),
        OutlierPosition::Out => (0, d.len().saturating_sub(r)),
        OutlierPosition::Both => (r, d.len().saturating_sub(r)),
    };
    if lo >= hi {
        return Err(Error::Data(format!(
            "outlier policy would remove all {} distances",
            d.len()
        )));
    }
    Ok(DistanceSummary::from_sorted(
        d[lo..hi].to_vec(),
        summary.excluded_self_pairs,
    ))
}

fn reduce<T: Real>(
    summary: DistanceSummary<T>,
    policy: Option<&OutlierPolicy>,
) -> Result<NormalizedMoments<T>> {
    let summary = match policy {
        Some(p) => remove_outliers(&summary, p)?,
        None => summary,
    };
    Ok(normalize(&summary))
}

/// Extrinsic, intrinsic and relative fidelity/diversity of `P` (reference) and `Q`.
///
/// Each of the three multisets is normalized by its own maximum.
pub fn barcode_metrics<T: Real>(
    p: &EmbeddingSet<T>,
    q: &EmbeddingSet<T>,
    options: &BarcodeOptions,
) -> Result<BarcodeMetrics<T>> {
    if p.dims() != q.dims() {
        return Err(Error::Shape(format!(
            "dimension mismatch: {} vs {}",
            p.dims(),
            q.dims()
        )));
    }
    for (name, s) in [("reference", p), ("comparison", q)] {
        if s.rows() < 2 {
            return Err(Error::Data(format!(
                "{name} set needs at least 2 rows for intrinsic statistics, got {}",
                s.rows()
            )));
        }
    }
    if let Some(policy) = &options.policy {
        policy.validate()?;
    }
    // Trimming needs the sorted multiset.
    let mode = match (options.policy, options.mode) {
        (Some(_), DistanceMode::Auto) => DistanceMode::Exact,
        (Some(_), DistanceMode::Streaming) => {
            return Err(Error::Capacity(
                "outlier removal needs exact mode, streaming was requested".into(),
            ))
        }
        (_, m) => m,
    };
    let policy = options.policy.as_ref();

    let pq = reduce(cross_distances(p, q, mode, options.exact_limit)?, policy)?;
    let pp = reduce(
        self_distances_with(p, mode, options.exact_limit, options.self_pairs)?,
        policy,
    )?;
    let qq = reduce(
        self_distances_with(q, mode, options.exact_limit, options.self_pairs)?,
        policy,
    )?;
    Ok(metrics_from_moments(&pq, &pp, &qq, options.convention))
}

/// Assemble [`BarcodeMetrics`] from the three normalized multisets.
pub fn metrics_from_moments<T: Real>(
    pq: &NormalizedMoments<T>,
    pp: &NormalizedMoments<T>,
    qq: &NormalizedMoments<T>,
    convention: FidelityConvention,
) -> BarcodeMetrics<T> {
    let fidelity_pq = fidelity(pq, convention);
    let fidelity_pp = fidelity(pp, convention);
    let fidelity_qq = fidelity(qq, convention);
    let diversity_pq = diversity(pq);
    let diversity_pp = diversity(pp);
    let diversity_qq = diversity(qq);
    BarcodeMetrics {
        fidelity_pq,
        fidelity_pp,
        fidelity_qq,
        diversity_pq,
        diversity_pp,
        diversity_qq,
        relative_fidelity: if pp.degenerate {
            None
        } else {
            relative_fidelity(fidelity_pq, fidelity_pp)
        },
        relative_diversity: relative_diversity(diversity_pq, diversity_pp, diversity_qq),
        degenerate: DegenerateFlags {
            pq: pq.degenerate,
            pp: pp.degenerate,
            qq: qq.degenerate,
        },
        convention,
    }
}
