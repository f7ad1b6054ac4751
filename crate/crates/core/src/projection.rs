//! Joint SVD projection of two embedding sets with explainability accounting.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::io::{read_npy, write_npy};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionTarget {
    /// Keep exactly this many leading right singular vectors.
    Dims(usize),
    /// Keep the fewest vectors whose squared singular values reach this share.
    MinExplainability(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel<T> {
    /// `D′×D`, row `k` is the `k`-th right singular vector.
    components: Vec<T>,
    input_dims: usize,
    output_dims: usize,
    /// All `D` singular values, non-increasing, zero-padded past the rank.
    singular_values: Vec<T>,
    explainability: T,
    center: Option<Vec<T>>,
}

impl<T: Real> ProjectionModel<T> {
    pub fn input_dims(&self) -> usize {
        self.input_dims
    }

    pub fn output_dims(&self) -> usize {
        self.output_dims
    }

    pub fn singular_values(&self) -> &[T] {
        &self.singular_values
    }

    pub fn explainability(&self) -> T {
        self.explainability
    }

    pub fn is_centered(&self) -> bool {
        self.center.is_some()
    }

    /// The `D×D′` column-orthonormal basis, row-major.
    pub fn basis(&self) -> Vec<T> {
        let (d, k) = (self.input_dims, self.output_dims);
        let mut out = vec![T::zero(); d * k];
        for c in 0..k {
            for r in 0..d {
                out[r * k + c] = self.components[c * d + r];
            }
        }
        out
    }

    /// Write `<prefix>.basis.npy` (D×D′), `<prefix>.singular_values.npy` (1×D)
    /// and, for centered models, `<prefix>.center.npy` (1×D).
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let write = |path: PathBuf, rows: usize, cols: usize, data: &[T]| -> Result<()> {
            let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
            let mut w = BufWriter::new(file);
            write_npy(&mut w, rows, cols, data)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(&path, e))
        };
        write(
            with_suffix(prefix, "basis.npy"),
            self.input_dims,
            self.output_dims,
            &self.basis(),
        )?;
        write(
            with_suffix(prefix, "singular_values.npy"),
            1,
            self.input_dims,
            &self.singular_values,
        )?;
        if let Some(c) = &self.center {
            write(with_suffix(prefix, "center.npy"), 1, self.input_dims, c)?;
        }
        Ok(())
    }

    pub fn load(prefix: &Path) -> Result<Self> {
        let read = |path: PathBuf| -> Result<EmbeddingSet<T>> {
            let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
            read_npy(&mut BufReader::new(file))
        };
        let basis = read(with_suffix(prefix, "basis.npy"))?;
        let sv = read(with_suffix(prefix, "singular_values.npy"))?;
        let (d, k) = (basis.rows(), basis.dims());
        if sv.rows() != 1 || sv.dims() != d {
            return Err(Error::Shape(format!(
                "singular values must be 1x{d}, found {}x{}",
                sv.rows(),
                sv.dims()
            )));
        }
        let center_path = with_suffix(prefix, "center.npy");
        let center = if center_path.exists() {
            Some(read(center_path)?.into_flat())
        } else {
            None
        };
        let mut components = vec![T::zero(); d * k];
        for r in 0..d {
            for c in 0..k {
                components[c * d + r] = basis.as_slice()[r * k + c];
            }
        }
        let singular_values = sv.into_flat();
        let explainability = T::lit(explained_share(&singular_values, k));
        Ok(Self {
            components,
            input_dims: d,
            output_dims: k,
            singular_values,
            explainability,
            center,
        })
    }
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Share of `Σλ²` carried by the first `k` values.
fn explained_share<T: Real>(sv: &[T], k: usize) -> f64 {
    let total: f64 = sv.iter().map(|s| s.as_f64().powi(2)).sum();
    if total <= 0.0 {
        return 1.0;
    }
    let kept: f64 = sv[..k].iter().map(|s| s.as_f64().powi(2)).sum();
    (kept / total).min(1.0)
}

/// Fit on the row-stacked `(N+M)×D` matrix of both sets.
pub fn fit_projection<T: Real>(
    p: &EmbeddingSet<T>,
    q: &EmbeddingSet<T>,
    target: ProjectionTarget,
    center: bool,
) -> Result<ProjectionModel<T>> {
    if p.dims() != q.dims() {
        return Err(Error::Shape(format!(
            "dimension mismatch: {} vs {}",
            p.dims(),
            q.dims()
        )));
    }
    let d = p.dims();
    match target {
        ProjectionTarget::Dims(k) if k == 0 || k > d => {
            return Err(Error::Parameter(format!(
                "target dimension must be in 1..={d}, got {k}"
            )))
        }
        ProjectionTarget::MinExplainability(e) if !(e > 0.0 && e <= 1.0) => {
            return Err(Error::Parameter(format!(
                "minimum explainability must be in (0, 1], got {e}"
            )))
        }
        _ => {}
    }

    let stacked = p.stack(q)?;
    let rows = stacked.rows();
    let mut e = DMatrix::from_row_iterator(rows, d, stacked.as_slice().iter().map(|v| v.as_f64()));
    let center_vec = if center {
        let mean = e.row_mean();
        for mut r in e.row_iter_mut() {
            r -= &mean;
        }
        Some(mean.iter().map(|&v| T::lit(v)).collect::<Vec<T>>())
    } else {
        None
    };

    let svd = nalgebra::linalg::SVD::try_new(e, false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::Numerical("SVD returned no right singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i].max(0.0)).collect();
    singular_values.resize(d, 0.0);
    let sv_t: Vec<T> = singular_values.iter().map(|&s| T::lit(s)).collect();

    let k = match target {
        ProjectionTarget::Dims(k) => k,
        ProjectionTarget::MinExplainability(min) => (1..=d)
            .find(|&k| explained_share(&sv_t, k) >= min - 1e-12)
            .unwrap_or(d),
    };

    let mut vectors: Vec<Vec<f64>> = order
        .iter()
        .take(k)
        .map(|&i| v_t.row(i).iter().copied().collect())
        .collect();
    if vectors.len() < k {
        complete_basis(&mut vectors, d, k);
    }
    let components = vectors.into_iter().flatten().map(T::lit).collect();

    Ok(ProjectionModel {
        components,
        input_dims: d,
        output_dims: k,
        explainability: T::lit(explained_share(&sv_t, k)),
        singular_values: sv_t,
        center: center_vec,
    })
}

/// Extend orthonormal `vectors` to `k` vectors with Gram-Schmidt over the standard basis.
fn complete_basis(vectors: &mut Vec<Vec<f64>>, d: usize, k: usize) {
    for axis in 0..d {
        if vectors.len() == k {
            break;
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        for _ in 0..2 {
            for u in vectors.iter() {
                let dot: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            vectors.push(v);
        }
    }
}

/// `X · basis`, an `N×D′` set.
pub fn project<T: Real>(model: &ProjectionModel<T>, x: &EmbeddingSet<T>) -> Result<EmbeddingSet<T>> {
    if x.dims() != model.input_dims {
        return Err(Error::Shape(format!(
            "model expects {}-d input, got {}-d",
            model.input_dims,
            x.dims()
        )));
    }
    let centered;
    let input = match &model.center {
        Some(c) => {
            let d = model.input_dims;
            centered = EmbeddingSet::from_flat(
                x.rows(),
                d,
                x.as_slice()
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| v - c[i % d])
                    .collect(),
            )?;
            &centered
        }
        None => x,
    };
    let (n, k) = (x.rows(), model.output_dims);
    let mut out = vec![T::zero(); n * k];
    T::gemm_abt(n, k, model.input_dims, input.as_slice(), &model.components, &mut out);
    Ok(EmbeddingSet::from_flat(n, k, out)?
        .with_label(x.label().to_string())
        .with_source(format!("{} projected to {k} dims", x.source())))
}
