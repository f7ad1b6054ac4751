use rayon::prelude::*;

use super::{ExperimentResult, IndexLog, Metric, RunOptions};
use crate::barcode::{barcode_metrics, BarcodeOptions};
use crate::baseline::{frechet_distance, prdc};
use crate::distance::{concentration_diagnostics, DistanceMode, SelfPairs};
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::sampling::{choose_indices, rng_for, sample_gaussian_stream};

const CONCENTRATION_PAIR_BUDGET: u64 = 500_000;

/// Modified copies of both sets and the row indices exchanged.
type Swapped = (EmbeddingSet<f64>, EmbeddingSet<f64>, Vec<usize>, Vec<usize>);

/// Requested metrics for reference `p` against comparison `q`, in a fixed order.
pub fn evaluate(
    p: &EmbeddingSet<f64>,
    q: &EmbeddingSet<f64>,
    seed: u64,
    opts: &RunOptions,
) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    if opts.wants(Metric::Barcode) {
        let m = barcode_metrics(
            p,
            q,
            &BarcodeOptions {
                policy: opts.policy,
                convention: opts.convention,
                mode: DistanceMode::Auto,
                exact_limit: opts.exact_limit,
                self_pairs: SelfPairs::Exclude,
            },
        )?;
        out.extend([
            ("fidelity_pq", m.fidelity_pq),
            ("fidelity_pp", m.fidelity_pp),
            ("fidelity_qq", m.fidelity_qq),
            ("diversity_pq", m.diversity_pq),
            ("diversity_pp", m.diversity_pp),
            ("diversity_qq", m.diversity_qq),
        ]
        .map(|(k, v)| (k.to_string(), v)));
        if let Some(v) = m.relative_fidelity {
            out.push(("relative_fidelity".into(), v));
        }
        if let Some(v) = m.relative_diversity {
            out.push(("relative_diversity".into(), v));
        }
    }
    if opts.wants(Metric::Prdc) {
        let s = prdc(p, q, opts.k)?;
        out.extend([
            ("precision", s.precision),
            ("recall", s.recall),
            ("density", s.density),
            ("coverage", s.coverage),
        ]
        .map(|(k, v)| (k.to_string(), v)));
    }
    if opts.wants(Metric::Fid) {
        out.push(("fid".into(), frechet_distance(p, q)?));
    }
    if opts.wants(Metric::Concentration) {
        let c = concentration_diagnostics(p, CONCENTRATION_PAIR_BUDGET, seed)?;
        out.extend([
            ("cv_distance", c.cv_distance),
            ("mean_abs_cosine", c.mean_abs_cosine),
            ("orthogonality_bound", c.orthogonality_bound),
        ]
        .map(|(k, v)| (k.to_string(), v)));
    }
    Ok(out)
}

/// Two independent `N(0, I_d)` samples of `n` rows.
pub fn run_gaussian_pair(n: usize, d: usize, seed: u64, opts: &RunOptions) -> Result<ExperimentResult> {
    let p = sample_gaussian_stream(n, d, 0.0, seed, 0)?;
    let q = sample_gaussian_stream(n, d, 0.0, seed, 1)?;
    let mut out = ExperimentResult::new(seed);
    out.push_all("pair", seed, evaluate(&p, &q, seed, opts)?);
    Ok(out)
}

/// Clean reference against a clean comparison, then against the comparison plus
/// one constant row `outlier_value·𝟙`, then (if a policy is set) the same with
/// trimming.
///
/// Sweep points: `clean`, `injected`, `injected_trimmed`.
pub fn run_outlier_injection(
    n_clean: usize,
    d: usize,
    outlier_value: f64,
    seed: u64,
    opts: &RunOptions,
) -> Result<ExperimentResult> {
    let p = sample_gaussian_stream(n_clean, d, 0.0, seed, 0)?;
    let clean = sample_gaussian_stream(n_clean, d, 0.0, seed, 1)?;
    let outlier = EmbeddingSet::from_flat(1, d, vec![outlier_value; d])?;
    let injected = clean.stack(&outlier)?;

    let untrimmed = RunOptions {
        policy: None,
        ..opts.clone()
    };
    let mut out = ExperimentResult::new(seed);
    out.push_all("clean", seed, evaluate(&p, &clean, seed, &untrimmed)?);
    let mut injected_rows = evaluate(&p, &injected, seed, &untrimmed)?;
    let norm = outlier.row(0).iter().map(|v| v * v).sum::<f64>().sqrt();
    injected_rows.push(("outlier_norm".into(), norm));
    out.push_all("injected", seed, injected_rows);
    if opts.policy.is_some() && opts.wants(Metric::Barcode) {
        // Only the distance statistics depend on the policy.
        let barcode_only = RunOptions {
            metrics: vec![Metric::Barcode],
            ..opts.clone()
        };
        out.push_all(
            "injected_trimmed",
            seed,
            evaluate(&p, &injected, seed, &barcode_only)?,
        );
    }
    Ok(out)
}

/// Reference `N(0, I)` against `N(μ𝟙, I)` for each `μ`. Every sweep point
/// shifts the same noise draw, so differences between points come from the
/// mean alone.
pub fn run_mean_sweep(
    n: usize,
    d: usize,
    means: &[f64],
    seed: u64,
    opts: &RunOptions,
) -> Result<ExperimentResult> {
    if means.is_empty() {
        return Err(Error::Parameter("mean sweep grid is empty".into()));
    }
    let p = sample_gaussian_stream(n, d, 0.0, seed, 0)?;
    let noise = sample_gaussian_stream(n, d, 0.0, seed, 1)?;
    let points: Vec<(String, Vec<(String, f64)>)> = means
        .par_iter()
        .map(|&mu| {
            let q = noise.map(|v| v + mu)?;
            Ok((format!("{mu}"), evaluate(&p, &q, seed, opts)?))
        })
        .collect::<Result<_>>()?;
    let mut out = ExperimentResult::new(seed);
    for (point, values) in points {
        out.push_all(&point, seed, values);
    }
    Ok(out)
}

/// Exchange `2^e` randomly chosen rows between `a` and `b` for each exponent.
///
/// Sweep points are the number of swapped rows; `0` is the unperturbed pair.
/// With barcode metrics each point also carries `diversity_ratio`, the
/// intrinsic diversity of the modified `a` over that of the modified `b`.
pub fn run_swap_stress(
    a: &EmbeddingSet<f64>,
    b: &EmbeddingSet<f64>,
    exponents: &[u32],
    seed: u64,
    opts: &RunOptions,
) -> Result<ExperimentResult> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!(
            "dimension mismatch: {} vs {}",
            a.dims(),
            b.dims()
        )));
    }
    let limit = a.rows().min(b.rows());
    for &e in exponents {
        let count = 1usize.checked_shl(e).unwrap_or(usize::MAX);
        if count > limit {
            return Err(Error::Parameter(format!(
                "cannot swap 2^{e} rows between sets of {} and {} rows",
                a.rows(),
                b.rows()
            )));
        }
    }

    let swapped = |count: usize, stream: u64| -> Result<Swapped> {
        let mut rng = rng_for(seed, stream);
        let ia = choose_indices(&mut rng, a.rows(), count)?;
        let ib = choose_indices(&mut rng, b.rows(), count)?;
        let (mut a2, mut b2) = (a.clone(), b.clone());
        for (&i, &j) in ia.iter().zip(&ib) {
            a2.set_row(i, b.row(j))?;
            b2.set_row(j, a.row(i))?;
        }
        Ok((a2, b2, ia, ib))
    };

    let mut plan: Vec<(usize, u64)> = vec![(0, 0)];
    for (i, &e) in exponents.iter().enumerate() {
        if !plan.iter().any(|&(c, _)| c == 1usize << e) {
            plan.push((1usize << e, 100 + i as u64));
        }
    }
    let points: Vec<_> = plan
        .par_iter()
        .map(|&(count, stream)| {
            let (a2, b2, ia, ib) = swapped(count, stream)?;
            let mut values = evaluate(&a2, &b2, seed, opts)?;
            let div = |name: &str| values.iter().find(|(k, _)| k == name).map(|(_, v)| *v);
            if let (Some(pp), Some(qq)) = (div("diversity_pp"), div("diversity_qq")) {
                if qq > 0.0 {
                    values.push(("diversity_ratio".into(), pp / qq));
                }
            }
            Ok((count.to_string(), values, ia, ib))
        })
        .collect::<Result<_>>()?;

    let mut out = ExperimentResult::new(seed);
    for (point, values, ia, ib) in points {
        out.push_all(&point, seed, values);
        if !ia.is_empty() {
            out.index_log.push(IndexLog {
                sweep_point: point.clone(),
                rep: 0,
                role: "a".into(),
                indices: ia,
            });
            out.index_log.push(IndexLog {
                sweep_point: point,
                rep: 0,
                role: "b".into(),
                indices: ib,
            });
        }
    }
    Ok(out)
}

/// Replace `min(2^e, N)` randomly chosen rows of `base` with rows of `foreign`
/// and compare the unmodified `base` (reference) against the result.
///
/// When `foreign` has at least as many rows as `base`, base row `i` is replaced
/// by foreign row `i`; otherwise the foreign rows are drawn independently.
/// Sweep points are the number of replaced rows; `0` is the unmodified base.
pub fn run_contamination(
    base: &EmbeddingSet<f64>,
    foreign: &EmbeddingSet<f64>,
    exponents: &[u32],
    seed: u64,
    opts: &RunOptions,
) -> Result<ExperimentResult> {
    if base.dims() != foreign.dims() {
        return Err(Error::Shape(format!(
            "dimension mismatch: {} vs {}",
            base.dims(),
            foreign.dims()
        )));
    }
    let n = base.rows();
    let aligned = foreign.rows() >= n;
    // Exponents past the cap all mean full replacement; keep one point per count.
    let mut counts: Vec<usize> = Vec::new();
    for &e in exponents {
        let c = 1usize.checked_shl(e).unwrap_or(usize::MAX).min(n);
        if !counts.contains(&c) {
            counts.push(c);
        }
    }
    if let Some(&c) = counts.iter().find(|&&c| c > foreign.rows()) {
        return Err(Error::Parameter(format!(
            "cannot draw {c} replacement rows from a foreign set of {}",
            foreign.rows()
        )));
    }

    let mut plan: Vec<(usize, u64)> = vec![(0, 0)];
    plan.extend(counts.iter().enumerate().map(|(i, &c)| (c, 100 + i as u64)));
    let points: Vec<_> = plan
        .par_iter()
        .map(|&(count, stream)| {
            let mut rng = rng_for(seed, stream);
            let ib = choose_indices(&mut rng, n, count)?;
            let jf = if aligned {
                ib.clone()
            } else {
                choose_indices(&mut rng, foreign.rows(), count)?
            };
            let mut modified = base.clone();
            for (&i, &j) in ib.iter().zip(&jf) {
                modified.set_row(i, foreign.row(j))?;
            }
            Ok((count.to_string(), evaluate(base, &modified, seed, opts)?, ib, jf))
        })
        .collect::<Result<_>>()?;

    let mut out = ExperimentResult::new(seed);
    for (point, values, ib, jf) in points {
        out.push_all(&point, seed, values);
        if !ib.is_empty() {
            out.index_log.push(IndexLog {
                sweep_point: point.clone(),
                rep: 0,
                role: "base".into(),
                indices: ib,
            });
            out.index_log.push(IndexLog {
                sweep_point: point,
                rep: 0,
                role: "foreign".into(),
                indices: jf,
            });
        }
    }
    Ok(out)
}
