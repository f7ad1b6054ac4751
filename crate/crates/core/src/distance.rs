//! Pairwise L2 distance multisets between embedding sets.
//!
//! Distances are evaluated as `√(‖a‖² + ‖b‖² − 2a·b)` with the dot products
//! produced block-wise by a GEMM kernel. Pairs whose squared distance is tiny
//! relative to `‖a‖² + ‖b‖²` are recomputed directly from the coordinates, so
//! coincident points give exactly zero.
//!
//! Work is split into fixed-size row blocks. Each block reduces its own
//! distances with compensated sums, and block partials are merged in block
//! order, so summaries do not depend on the number of threads.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::accum::{CompensatedSum, MomentAccumulator};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::sampling::rng_for;
use crate::scalar::Real;

/// Default pair budget for exact storage: 2²⁷ pairs, about 1 GiB of f64.
pub const DEFAULT_EXACT_LIMIT: u64 = 1 << 27;

const ROW_BLOCK: usize = 32;
const COL_BLOCK: usize = 256;

/// How the caller wants the multiset held.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMode {
    Exact,
    Streaming,
    #[default]
    Auto,
}

/// How a summary actually holds its multiset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageMode {
    Exact,
    Streaming,
}

/// Whether the `N` zero distances `d(xᵢ, xᵢ)` enter a self multiset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelfPairs {
    #[default]
    Exclude,
    Include,
}

/// Moments of a distance multiset, optionally with the sorted multiset itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary<T> {
    pub count: u64,
    pub sum: T,
    pub sum_sq: T,
    pub max: T,
    pub min: T,
    pub mode: StorageMode,
    /// Sorted ascending; present only in exact mode.
    #[serde(skip)]
    pub distances: Option<Vec<T>>,
    pub excluded_self_pairs: u64,
}

/// Moments of `d̃ = d / max d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedMoments<T> {
    pub mean_norm: T,
    /// Population variance of the normalized distances.
    pub var_norm: T,
    pub max_raw: T,
    /// Set when `max_raw == 0` (all points coincide) or the multiset is empty.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    pub lambda: T,
    /// Fraction of pairs with `d̃ ≤ λ̃`.
    pub below: T,
    /// `1 − below`: bars still alive at `λ̃`.
    pub alive: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarcodeCurve<T> {
    pub points: Vec<CurvePoint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationDiagnostics {
    /// std/mean of raw pair distances.
    pub cv_distance: f64,
    /// Mean `|uᵢ·uⱼ|` of unit directions from the centroid.
    pub mean_abs_cosine: f64,
    /// `√(6 ln N) / √(D − 1)`; infinite for `D = 1`.
    pub orthogonality_bound: f64,
    pub pairs_used: u64,
}

impl<T: Real> DistanceSummary<T> {
    pub fn empty() -> Self {
        Self {
            count: 0,
            sum: T::zero(),
            sum_sq: T::zero(),
            max: T::zero(),
            min: T::zero(),
            mode: StorageMode::Exact,
            distances: Some(Vec::new()),
            excluded_self_pairs: 0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_exact(&self) -> bool {
        self.mode == StorageMode::Exact
    }

    /// Build an exact summary from an arbitrary multiset of distances.
    pub fn from_distances(mut distances: Vec<T>) -> Result<Self> {
        if let Some(bad) = distances.iter().find(|d| !d.is_finite() || **d < T::zero()) {
            return Err(Error::Data(format!(
                "distances must be finite and non-negative, found {bad}"
            )));
        }
        sort_distances(&mut distances);
        Ok(Self::from_sorted(distances, 0))
    }

    pub(crate) fn from_sorted(distances: Vec<T>, excluded_self_pairs: u64) -> Self {
        if distances.is_empty() {
            return Self {
                excluded_self_pairs,
                ..Self::empty()
            };
        }
        let mut sum = CompensatedSum::new();
        let mut sum_sq = CompensatedSum::new();
        for &d in &distances {
            sum.add(d);
            sum_sq.add(d * d);
        }
        Self {
            count: distances.len() as u64,
            sum: sum.value(),
            sum_sq: sum_sq.value(),
            max: *distances.last().unwrap(),
            min: distances[0],
            mode: StorageMode::Exact,
            distances: Some(distances),
            excluded_self_pairs,
        }
    }

    fn from_moments(acc: &MomentAccumulator<T>, excluded_self_pairs: u64) -> Self {
        if acc.count == 0 {
            return Self {
                mode: StorageMode::Streaming,
                distances: None,
                excluded_self_pairs,
                ..Self::empty()
            };
        }
        Self {
            count: acc.count,
            sum: acc.sum.value(),
            sum_sq: acc.sum_sq.value(),
            max: acc.max,
            min: acc.min,
            mode: StorageMode::Streaming,
            distances: None,
            excluded_self_pairs,
        }
    }

    pub fn mean(&self) -> T {
        if self.count == 0 {
            return T::zero();
        }
        self.sum / T::lit(self.count as f64)
    }

    /// Drop the stored multiset, keeping the moments.
    pub fn into_streaming(mut self) -> Self {
        self.distances = None;
        self.mode = StorageMode::Streaming;
        self
    }

    /// Raw dump of the multiset as little-endian f64 values.
    pub fn write_distances_le<W: Write>(&self, w: &mut W) -> Result<()> {
        let d = self.distances.as_ref().ok_or_else(|| {
            Error::Capacity("distance dump needs an exact-mode summary".into())
        })?;
        let mut buf = Vec::with_capacity(d.len() * 8);
        for v in d {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        w.write_all(&buf)
            .map_err(|e| Error::io("<distance dump>", e))
    }

    /// Checks the structural invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.count == 0 {
            return Ok(());
        }
        let n = T::lit(self.count as f64);
        let slack = T::lit(1e-9);
        if self.min < T::zero() || self.min > self.max {
            return Err(format!("min {} / max {} out of order", self.min, self.max));
        }
        if self.sum > n * self.max * (T::one() + slack) {
            return Err("sum exceeds count·max".into());
        }
        if self.sum_sq > n * self.max * self.max * (T::one() + slack) {
            return Err("sum_sq exceeds count·max²".into());
        }
        if let Some(d) = &self.distances {
            if d.len() as u64 != self.count {
                return Err("stored multiset length differs from count".into());
            }
            if d.windows(2).any(|w| w[0] > w[1]) {
                return Err("stored multiset is not sorted".into());
            }
            let s: T = d.iter().copied().sum();
            let s2: T = d.iter().map(|&x| x * x).sum();
            let rel = |a: T, b: T| (a - b).abs() <= slack * a.abs().max(b.abs()).max(T::min_positive_value());
            if !rel(s, self.sum) || !rel(s2, self.sum_sq) || *d.last().unwrap() != self.max {
                return Err("stored multiset disagrees with moments".into());
            }
        }
        Ok(())
    }
}

fn sort_distances<T: Real>(d: &mut [T]) {
    d.par_sort_unstable_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
}

fn resolve_mode(mode: DistanceMode, pairs: u64, exact_limit: u64) -> Result<StorageMode> {
    match mode {
        DistanceMode::Streaming => Ok(StorageMode::Streaming),
        DistanceMode::Exact if pairs > exact_limit => Err(Error::Capacity(format!(
            "{pairs} pairs exceed the exact-mode limit of {exact_limit}; raise the limit or use streaming mode"
        ))),
        DistanceMode::Exact => Ok(StorageMode::Exact),
        DistanceMode::Auto if pairs <= exact_limit => Ok(StorageMode::Exact),
        DistanceMode::Auto => Ok(StorageMode::Streaming),
    }
}

#[inline]
fn direct_distance<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| {
            let t = x - y;
            acc + t * t
        })
        .sqrt()
}

#[inline]
fn finish_distance<T: Real>(sq_a: T, sq_b: T, dot: T, a: &[T], b: &[T]) -> T {
    let scale = sq_a + sq_b;
    let sq = scale - (dot + dot);
    if sq <= scale * T::epsilon().sqrt() {
        direct_distance(a, b)
    } else {
        sq.sqrt()
    }
}

/// The multiset `{‖pᵢ − qⱼ‖ : i < N, j < M}` of all `N·M` cross pairs.
pub fn cross_distances<T: Real>(
    p: &EmbeddingSet<T>,
    q: &EmbeddingSet<T>,
    mode: DistanceMode,
    exact_limit: u64,
) -> Result<DistanceSummary<T>> {
    if p.dims() != q.dims() {
        return Err(Error::Shape(format!(
            "dimension mismatch: {} vs {}",
            p.dims(),
            q.dims()
        )));
    }
    let (n, m, d) = (p.rows(), q.rows(), p.dims());
    let pairs = n as u64 * m as u64;
    let storage = resolve_mode(mode, pairs, exact_limit)?;
    let pn = p.squared_norms();
    let qn = q.squared_norms();
    let (pd, qd) = (p.as_slice(), q.as_slice());

    let block = |b: usize, mut out: Option<&mut [T]>| -> MomentAccumulator<T> {
        let r0 = b * ROW_BLOCK;
        let r1 = (r0 + ROW_BLOCK).min(n);
        let rows = r1 - r0;
        let mut acc = MomentAccumulator::new();
        let mut dots = vec![T::zero(); rows * COL_BLOCK];
        for c0 in (0..m).step_by(COL_BLOCK) {
            let c1 = (c0 + COL_BLOCK).min(m);
            let cols = c1 - c0;
            T::gemm_abt(rows, cols, d, &pd[r0 * d..r1 * d], &qd[c0 * d..c1 * d], &mut dots);
            for i in 0..rows {
                let gi = r0 + i;
                let a = &pd[gi * d..(gi + 1) * d];
                for j in 0..cols {
                    let gj = c0 + j;
                    let dist = finish_distance(
                        pn[gi],
                        qn[gj],
                        dots[i * cols + j],
                        a,
                        &qd[gj * d..(gj + 1) * d],
                    );
                    acc.push(dist);
                    if let Some(o) = out.as_deref_mut() {
                        o[i * m + gj] = dist;
                    }
                }
            }
        }
        acc
    };

    let blocks = n.div_ceil(ROW_BLOCK);
    match storage {
        StorageMode::Streaming => {
            let partials: Vec<_> = (0..blocks).into_par_iter().map(|b| block(b, None)).collect();
            Ok(DistanceSummary::from_moments(&merge_in_order(&partials), 0))
        }
        StorageMode::Exact => {
            let mut out = vec![T::zero(); n * m];
            out.par_chunks_mut(ROW_BLOCK * m)
                .enumerate()
                .for_each(|(b, chunk)| {
                    block(b, Some(chunk));
                });
            sort_distances(&mut out);
            Ok(DistanceSummary::from_sorted(out, 0))
        }
    }
}

fn merge_in_order<T: Real>(partials: &[MomentAccumulator<T>]) -> MomentAccumulator<T> {
    let mut total = MomentAccumulator::new();
    for p in partials {
        total.merge(p);
    }
    total
}

/// Offset of row `i` in the packed strict upper triangle of an `n×n` matrix.
#[inline]
fn tri_offset(i: usize, n: usize) -> usize {
    i * n - i * (i + 1) / 2
}

/// Ordered pairs `(i, j)`, `i ≠ j`: `N(N−1)` distances, self pairs excluded.
pub fn self_distances<T: Real>(
    p: &EmbeddingSet<T>,
    mode: DistanceMode,
    exact_limit: u64,
) -> Result<DistanceSummary<T>> {
    self_distances_with(p, mode, exact_limit, SelfPairs::Exclude)
}

/// As [`self_distances`], optionally keeping the `N` self-pair zeros.
pub fn self_distances_with<T: Real>(
    p: &EmbeddingSet<T>,
    mode: DistanceMode,
    exact_limit: u64,
    self_pairs: SelfPairs,
) -> Result<DistanceSummary<T>> {
    let (n, d) = (p.rows(), p.dims());
    if n < 2 {
        return Err(Error::Data(format!(
            "self distances need at least 2 rows, got {n}"
        )));
    }
    let include = self_pairs == SelfPairs::Include;
    let ordered = n as u64 * (n as u64 - 1);
    let pairs = ordered + if include { n as u64 } else { 0 };
    let storage = resolve_mode(mode, pairs, exact_limit)?;
    let pn = p.squared_norms();
    let pd = p.as_slice();

    // Upper triangle only; each unordered distance stands for two ordered pairs.
    let block = |b: usize, mut out: Option<&mut [T]>| -> MomentAccumulator<T> {
        let r0 = b * ROW_BLOCK;
        let r1 = (r0 + ROW_BLOCK).min(n);
        let rows = r1 - r0;
        let base = tri_offset(r0, n);
        let mut acc = MomentAccumulator::new();
        let mut dots = vec![T::zero(); rows * COL_BLOCK];
        for c0 in (r0..n).step_by(COL_BLOCK) {
            let c1 = (c0 + COL_BLOCK).min(n);
            let cols = c1 - c0;
            T::gemm_abt(rows, cols, d, &pd[r0 * d..r1 * d], &pd[c0 * d..c1 * d], &mut dots);
            for i in 0..rows {
                let gi = r0 + i;
                let a = &pd[gi * d..(gi + 1) * d];
                let row_off = tri_offset(gi, n) - base;
                for j in 0..cols {
                    let gj = c0 + j;
                    if gj <= gi {
                        continue;
                    }
                    let dist = finish_distance(
                        pn[gi],
                        pn[gj],
                        dots[i * cols + j],
                        a,
                        &pd[gj * d..(gj + 1) * d],
                    );
                    acc.push(dist);
                    if let Some(o) = out.as_deref_mut() {
                        o[row_off + gj - gi - 1] = dist;
                    }
                }
            }
        }
        acc
    };

    let blocks = n.div_ceil(ROW_BLOCK);
    let excluded = if include { 0 } else { n as u64 };
    match storage {
        StorageMode::Streaming => {
            let partials: Vec<_> = (0..blocks).into_par_iter().map(|b| block(b, None)).collect();
            let mut acc = merge_in_order(&partials).scaled(2);
            if include {
                acc.count += n as u64;
                acc.min = T::zero();
            }
            Ok(DistanceSummary::from_moments(&acc, excluded))
        }
        StorageMode::Exact => {
            let half = (ordered / 2) as usize;
            let mut out = Vec::with_capacity(pairs as usize);
            out.resize(half, T::zero());
            let mut chunks = Vec::with_capacity(blocks);
            let mut rest = out.as_mut_slice();
            for b in 0..blocks {
                let r0 = b * ROW_BLOCK;
                let r1 = (r0 + ROW_BLOCK).min(n);
                let len = tri_offset(r1, n) - tri_offset(r0, n);
                let (head, tail) = rest.split_at_mut(len);
                chunks.push(head);
                rest = tail;
            }
            chunks.into_par_iter().enumerate().for_each(|(b, chunk)| {
                block(b, Some(chunk));
            });
            out.extend_from_within(..);
            if include {
                out.resize(pairs as usize, T::zero());
            }
            sort_distances(&mut out);
            Ok(DistanceSummary::from_sorted(out, excluded))
        }
    }
}

/// Moments of the max-normalized multiset. Population variance.
pub fn normalize<T: Real>(summary: &DistanceSummary<T>) -> NormalizedMoments<T> {
    if summary.count == 0 || summary.max <= T::zero() {
        return NormalizedMoments {
            mean_norm: T::zero(),
            var_norm: T::zero(),
            max_raw: if summary.count == 0 { T::zero() } else { summary.max },
            degenerate: true,
        };
    }
    let n = T::lit(summary.count as f64);
    let mean = summary.sum / n;
    let var = (summary.sum_sq / n - mean * mean).max(T::zero());
    NormalizedMoments {
        mean_norm: mean / summary.max,
        var_norm: var / (summary.max * summary.max),
        max_raw: summary.max,
        degenerate: false,
    }
}

/// The normalized barcode curve at `resolution` evenly spaced thresholds in `[0, 1]`.
pub fn barcode_curve<T: Real>(summary: &DistanceSummary<T>, resolution: usize) -> Result<BarcodeCurve<T>> {
    let d = summary.distances.as_ref().ok_or_else(|| {
        Error::Capacity(
            "the barcode curve needs the exact multiset; raise the exact-pair limit or subsample".into(),
        )
    })?;
    if resolution < 2 {
        return Err(Error::Parameter(format!(
            "curve resolution must be at least 2, got {resolution}"
        )));
    }
    if d.is_empty() {
        return Err(Error::Data("empty distance multiset".into()));
    }
    let count = T::lit(d.len() as f64);
    let max = summary.max;
    let last = (resolution - 1) as f64;
    let points = (0..resolution)
        .map(|k| {
            let lambda = if k + 1 == resolution {
                T::one()
            } else {
                T::lit(k as f64 / last)
            };
            let below_n = if max <= T::zero() {
                d.len()
            } else {
                d.partition_point(|&x| x / max <= lambda)
            };
            let below = T::lit(below_n as f64) / count;
            CurvePoint {
                lambda,
                below,
                alive: T::one() - below,
            }
        })
        .collect();
    Ok(BarcodeCurve { points })
}

/// Distance-concentration and near-orthogonality statistics over sampled pairs.
pub fn concentration_diagnostics<T: Real>(
    p: &EmbeddingSet<T>,
    pair_budget: u64,
    seed: u64,
) -> Result<ConcentrationDiagnostics> {
    let (n, d) = (p.rows(), p.dims());
    if n < 2 {
        return Err(Error::Data(format!(
            "concentration diagnostics need at least 2 rows, got {n}"
        )));
    }
    let x: Vec<f64> = p.as_slice().iter().map(|v| v.as_f64()).collect();
    let mut centroid = vec![0.0; d];
    for r in x.chunks_exact(d) {
        centroid.iter_mut().zip(r).for_each(|(c, v)| *c += v);
    }
    centroid.iter_mut().for_each(|c| *c /= n as f64);
    let dirs: Vec<Option<Vec<f64>>> = x
        .chunks_exact(d)
        .map(|r| {
            let v: Vec<f64> = r.iter().zip(&centroid).map(|(a, c)| a - c).collect();
            let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
            (norm > 0.0).then(|| v.iter().map(|t| t / norm).collect())
        })
        .collect();

    let total = n as u64 * (n as u64 - 1) / 2;
    let pairs: Vec<(usize, usize)> = if total <= pair_budget.max(1) {
        (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
    } else {
        let mut rng = rng_for(seed, 0);
        (0..pair_budget.max(1))
            .map(|_| {
                let i = rng.random_range(0..n);
                let mut j = rng.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            })
            .collect()
    };

    let per_pair: Vec<(f64, Option<f64>)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let a = &x[i * d..(i + 1) * d];
            let b = &x[j * d..(j + 1) * d];
            let dist = a
                .iter()
                .zip(b)
                .map(|(u, v)| (u - v) * (u - v))
                .sum::<f64>()
                .sqrt();
            let cos = match (&dirs[i], &dirs[j]) {
                (Some(u), Some(v)) => Some(u.iter().zip(v).map(|(s, t)| s * t).sum::<f64>().abs()),
                _ => None,
            };
            (dist, cos)
        })
        .collect();

    let mut s = CompensatedSum::<f64>::new();
    let mut s2 = CompensatedSum::<f64>::new();
    let mut cs = CompensatedSum::<f64>::new();
    let mut cos_n = 0u64;
    for &(dist, cos) in &per_pair {
        s.add(dist);
        s2.add(dist * dist);
        if let Some(c) = cos {
            cs.add(c);
            cos_n += 1;
        }
    }
    let m = per_pair.len() as f64;
    let mean = s.value() / m;
    let var = (s2.value() / m - mean * mean).max(0.0);
    let cv_distance = if mean > 0.0 { var.sqrt() / mean } else { 0.0 };
    let mean_abs_cosine = if cos_n > 0 { cs.value() / cos_n as f64 } else { 0.0 };
    let orthogonality_bound = if d > 1 {
        (6.0 * (n as f64).ln()).sqrt() / ((d - 1) as f64).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(ConcentrationDiagnostics {
        cv_distance,
        mean_abs_cosine,
        orthogonality_bound,
        pairs_used: per_pair.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_gaussian;

    fn set(rows: &[&[f64]]) -> EmbeddingSet<f64> {
        EmbeddingSet::from_rows(rows).unwrap()
    }

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn cross_toy_multiset() {
        let p = set(&[&[0.0, 0.0], &[1.0, 0.0]]);
        let q = set(&[&[0.0, 1.0]]);
        let s = cross_distances(&p, &q, DistanceMode::Exact, 100).unwrap();
        assert_eq!(s.count, 2);
        let d = s.distances.as_ref().unwrap();
        assert_eq!(d[0], 1.0);
        assert!((d[1] - SQRT2).abs() < 1e-15);
        assert!((s.max - SQRT2).abs() < 1e-15);
        s.check_invariants().unwrap();
    }

    #[test]
    fn identical_single_points_give_zero() {
        let p = set(&[&[0.0, 0.0]]);
        let s = cross_distances(&p, &p, DistanceMode::Auto, 100).unwrap();
        assert_eq!(s.count, 1);
        assert_eq!(s.max, 0.0);
        assert!(normalize(&s).degenerate);
    }

    #[test]
    fn coincident_rows_are_exactly_zero() {
        let row: Vec<f64> = (0..300).map(|i| (i as f64 * 0.731).sin() * 17.3).collect();
        let p = EmbeddingSet::from_rows(&[row.clone(), row]).unwrap();
        let s = cross_distances(&p, &p, DistanceMode::Exact, 100).unwrap();
        assert_eq!(s.distances.unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn self_toy_multisets() {
        let s = self_distances(&set(&[&[0.0, 0.0], &[3.0, 4.0]]), DistanceMode::Exact, 100).unwrap();
        assert_eq!(s.distances.as_deref(), Some(&[5.0, 5.0][..]));
        assert_eq!(s.excluded_self_pairs, 2);

        let dup = self_distances(&set(&[&[1.0, 1.0], &[1.0, 1.0]]), DistanceMode::Exact, 100).unwrap();
        assert_eq!(dup.distances.as_deref(), Some(&[0.0, 0.0][..]));
        assert_eq!(dup.max, 0.0);
        assert!(normalize(&dup).degenerate);

        let tri = self_distances(
            &set(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]),
            DistanceMode::Exact,
            100,
        )
        .unwrap();
        let d = tri.distances.unwrap();
        assert_eq!(&d[..4], &[1.0; 4]);
        assert!(d[4..].iter().all(|x| (x - SQRT2).abs() < 1e-15));
        assert_eq!(tri.count, 6);
    }

    #[test]
    fn self_pairs_can_be_included() {
        let p = set(&[&[0.0, 0.0], &[3.0, 4.0]]);
        let s = self_distances_with(&p, DistanceMode::Exact, 100, SelfPairs::Include).unwrap();
        assert_eq!(s.distances.as_deref(), Some(&[0.0, 0.0, 5.0, 5.0][..]));
        assert_eq!(s.excluded_self_pairs, 0);
        let st = self_distances_with(&p, DistanceMode::Streaming, 100, SelfPairs::Include).unwrap();
        assert_eq!((st.count, st.min, st.sum), (4, 0.0, 10.0));
    }

    #[test]
    fn self_needs_two_rows() {
        let err = self_distances(&set(&[&[1.0]]), DistanceMode::Auto, 100).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn shape_and_capacity_errors() {
        let a = set(&[&[1.0, 2.0]]);
        let b = set(&[&[1.0]]);
        assert!(matches!(
            cross_distances(&a, &b, DistanceMode::Auto, 10),
            Err(Error::Shape(_))
        ));
        let c = set(&[&[1.0], &[2.0], &[3.0]]);
        assert!(matches!(
            cross_distances(&c, &c, DistanceMode::Exact, 8),
            Err(Error::Capacity(_))
        ));
        let auto = cross_distances(&c, &c, DistanceMode::Auto, 8).unwrap();
        assert_eq!(auto.mode, StorageMode::Streaming);
        assert!(matches!(barcode_curve(&auto, 3), Err(Error::Capacity(_))));
    }

    #[test]
    fn normalize_toy_values() {
        let s = DistanceSummary::from_distances(vec![1.0, SQRT2]).unwrap();
        let m = normalize(&s);
        // d̃ = {1/√2, 1}; mean = (1/√2 + 1)/2, var = ((1 − 1/√2)/2)².
        let mean = (1.0 / SQRT2 + 1.0) / 2.0;
        let var = ((1.0 - 1.0 / SQRT2) / 2.0).powi(2);
        assert!((m.mean_norm - mean).abs() < 1e-15);
        assert!((m.var_norm - var).abs() < 1e-15);
        assert!((m.mean_norm - 0.85355).abs() < 1e-5);
        assert!((m.var_norm - 0.02145).abs() < 1e-5);

        let c = normalize(&DistanceSummary::from_distances(vec![2.5; 7]).unwrap());
        assert_eq!((c.mean_norm, c.var_norm, c.degenerate), (1.0, 0.0, false));

        let z = normalize(&DistanceSummary::from_distances(vec![0.0; 3]).unwrap());
        assert_eq!((z.mean_norm, z.var_norm, z.degenerate), (0.0, 0.0, true));
    }

    #[test]
    fn curve_toy_and_constant() {
        let s = DistanceSummary::from_distances(vec![1.0, SQRT2]).unwrap();
        let c = barcode_curve(&s, 3).unwrap();
        let lam: Vec<f64> = c.points.iter().map(|p| p.lambda).collect();
        let below: Vec<f64> = c.points.iter().map(|p| p.below).collect();
        assert_eq!(lam, vec![0.0, 0.5, 1.0]);
        assert_eq!(below, vec![0.0, 0.0, 1.0]);

        let k = barcode_curve(&DistanceSummary::from_distances(vec![3.0; 4]).unwrap(), 5).unwrap();
        let below: Vec<f64> = k.points.iter().map(|p| p.below).collect();
        assert_eq!(below, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(k.points.iter().all(|p| p.below + p.alive == 1.0));
        assert!(matches!(barcode_curve(&s, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn dump_is_little_endian_f64() {
        let s = DistanceSummary::from_distances(vec![2.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        s.write_distances_le(&mut buf).unwrap();
        assert_eq!(&buf[..8], &1.0f64.to_le_bytes());
        assert_eq!(&buf[8..], &2.0f64.to_le_bytes());
    }

    #[test]
    fn concentration_low_and_high_dimension() {
        let low: EmbeddingSet<f64> = sample_gaussian(500, 2, 0.0, 1).unwrap();
        let dl = concentration_diagnostics(&low, 50_000, 1).unwrap();
        assert!(dl.cv_distance > 0.3, "{dl:?}");
        assert!(dl.orthogonality_bound.is_finite());
        let one: EmbeddingSet<f64> = sample_gaussian(10, 1, 0.0, 1).unwrap();
        let d1 = concentration_diagnostics(&one, 1000, 1).unwrap();
        assert!(d1.orthogonality_bound.is_infinite());
        assert_eq!(d1.pairs_used, 45);
    }

    #[test]
    fn blocked_kernel_matches_direct_computation() {
        // Sizes straddle the row and column block edges.
        let p: EmbeddingSet<f64> = sample_gaussian(70, 13, 0.3, 4).unwrap();
        let q: EmbeddingSet<f64> = sample_gaussian(300, 13, -0.2, 5).unwrap();
        let s = cross_distances(&p, &q, DistanceMode::Exact, u64::MAX).unwrap();
        let mut naive: Vec<f64> = p
            .iter_rows()
            .flat_map(|a| q.iter_rows().map(move |b| direct_distance(a, b)))
            .collect();
        naive.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in s.distances.as_ref().unwrap().iter().zip(&naive) {
            assert!((x - y).abs() < 1e-12);
        }
        let selfs = self_distances(&q, DistanceMode::Exact, u64::MAX).unwrap();
        let mut naive_self = Vec::new();
        for i in 0..q.rows() {
            for j in 0..q.rows() {
                if i != j {
                    naive_self.push(direct_distance(q.row(i), q.row(j)));
                }
            }
        }
        naive_self.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (x, y) in selfs.distances.as_ref().unwrap().iter().zip(&naive_self) {
            assert!((x - y).abs() < 1e-12);
        }
        selfs.check_invariants().unwrap();
    }
}
