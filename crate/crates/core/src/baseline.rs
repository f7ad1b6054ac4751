//! Reference metrics: improved precision/recall, density/coverage and the
//! Fréchet distance between Gaussian fits.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrdcScores {
    pub precision: f64,
    pub recall: f64,
    pub density: f64,
    pub coverage: f64,
    pub k: usize,
}

/// Mean vector and unbiased covariance of an embedding set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSurrogate {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

fn euclidean<T: Real>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let t = x.as_f64() - y.as_f64();
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// Row-major `N×M` matrix of direct Euclidean distances.
fn distance_matrix<T: Real>(a: &EmbeddingSet<T>, b: &EmbeddingSet<T>) -> Vec<f64> {
    let m = b.rows();
    let mut out = vec![0.0; a.rows() * m];
    out.par_chunks_mut(m.max(1)).enumerate().for_each(|(i, row)| {
        let x = a.row(i);
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = euclidean(x, b.row(j));
        }
    });
    out
}

fn check_k(k: usize, rows: usize, what: &str) -> Result<()> {
    if k == 0 || k >= rows {
        return Err(Error::Parameter(format!(
            "k must satisfy 1 <= k <= N-1 for the {what} set (N = {rows}), got {k}"
        )));
    }
    Ok(())
}

fn radii_from_self_matrix(dist: &[f64], n: usize, k: usize) -> Vec<f64> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut others: Vec<f64> = dist[i * n..(i + 1) * n]
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &d)| d)
                .collect();
            let (_, kth, _) =
                others.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).unwrap());
            *kth
        })
        .collect()
}

/// Distance from each row to its `k`-th nearest other row.
pub fn knn_radius<T: Real>(x: &EmbeddingSet<T>, k: usize) -> Result<Vec<f64>> {
    check_k(k, x.rows(), "input")?;
    let dist = distance_matrix(x, x);
    Ok(radii_from_self_matrix(&dist, x.rows(), k))
}

/// Precision, recall, density and coverage of `fake` against `real`, with closed kNN balls.
pub fn prdc<T: Real>(real: &EmbeddingSet<T>, fake: &EmbeddingSet<T>, k: usize) -> Result<PrdcScores> {
    if real.dims() != fake.dims() {
        return Err(Error::Shape(format!(
            "dimension mismatch: {} vs {}",
            real.dims(),
            fake.dims()
        )));
    }
    check_k(k, real.rows(), "real")?;
    check_k(k, fake.rows(), "fake")?;
    let (n, m) = (real.rows(), fake.rows());
    let real_radii = radii_from_self_matrix(&distance_matrix(real, real), n, k);
    let fake_radii = radii_from_self_matrix(&distance_matrix(fake, fake), m, k);
    let cross = distance_matrix(real, fake); // cross[i*m + j] = d(Xᵢ, Yⱼ)

    // Per fake sample: number of real balls containing it.
    let containing: Vec<usize> = (0..m)
        .into_par_iter()
        .map(|j| (0..n).filter(|&i| cross[i * m + j] <= real_radii[i]).count())
        .collect();
    let precision_hits = containing.iter().filter(|&&c| c > 0).count();
    let density_hits: usize = containing.iter().sum();

    let per_real: Vec<(bool, bool)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = &cross[i * m..(i + 1) * m];
            let recalled = row.iter().zip(&fake_radii).any(|(&d, &r)| d <= r);
            let covered = row.iter().any(|&d| d <= real_radii[i]);
            (recalled, covered)
        })
        .collect();
    let recall_hits = per_real.iter().filter(|p| p.0).count();
    let coverage_hits = per_real.iter().filter(|p| p.1).count();

    Ok(PrdcScores {
        precision: precision_hits as f64 / m as f64,
        recall: recall_hits as f64 / n as f64,
        density: density_hits as f64 / (k * m) as f64,
        coverage: coverage_hits as f64 / n as f64,
        k,
    })
}

impl GaussianSurrogate {
    pub fn fit<T: Real>(x: &EmbeddingSet<T>) -> Result<Self> {
        let (n, d) = (x.rows(), x.dims());
        if n < 2 {
            return Err(Error::Data(format!(
                "covariance needs at least 2 rows, got {n}"
            )));
        }
        let data = DMatrix::from_row_iterator(n, d, x.as_slice().iter().map(|v| v.as_f64()));
        let mean = data.row_mean().transpose();
        let mut centered = data;
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let mut covariance = centered.transpose() * &centered / (n as f64 - 1.0);
        covariance = (&covariance + covariance.transpose()) * 0.5;
        Ok(Self { mean, covariance })
    }

    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::Shape(format!(
                "covariance must be {d}x{d}, got {}x{}",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        if (&covariance - covariance.transpose()).amax() > 1e-12 {
            return Err(Error::Numerical("covariance is not symmetric".into()));
        }
        Ok(Self { mean, covariance })
    }
}

const EIGEN_CLAMP: f64 = 1e-10;

fn symmetric_eigen(m: DMatrix<f64>) -> Result<nalgebra::SymmetricEigen<f64, nalgebra::Dyn>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    nalgebra::SymmetricEigen::try_new(m, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))
}

fn clamp_eigenvalue(l: f64) -> Result<f64> {
    if l < -EIGEN_CLAMP {
        Err(Error::Numerical(format!(
            "matrix is not positive semidefinite (eigenvalue {l:e})"
        )))
    } else {
        Ok(l.max(0.0))
    }
}

/// `‖m − m_w‖² + Tr Σ + Tr Σ_w − 2 Tr (Σ^{1/2} Σ_w Σ^{1/2})^{1/2}`.
pub fn frechet_from_surrogates(a: &GaussianSurrogate, b: &GaussianSurrogate) -> Result<f64> {
    if a.mean.len() != b.mean.len() {
        return Err(Error::Shape(format!(
            "dimension mismatch: {} vs {}",
            a.mean.len(),
            b.mean.len()
        )));
    }
    let eig = symmetric_eigen(a.covariance.clone())?;
    let roots = eig
        .eigenvalues
        .iter()
        .map(|&l| clamp_eigenvalue(l).map(f64::sqrt))
        .collect::<Result<Vec<_>>>()?;
    let v = &eig.eigenvectors;
    let sqrt_a = v * DMatrix::from_diagonal(&DVector::from_vec(roots)) * v.transpose();
    let mut inner = &sqrt_a * &b.covariance * &sqrt_a;
    inner = (&inner + inner.transpose()) * 0.5;
    let trace_sqrt: f64 = symmetric_eigen(inner)?
        .eigenvalues
        .iter()
        .map(|&l| clamp_eigenvalue(l).map(f64::sqrt))
        .sum::<Result<f64>>()?;
    let mean_term = (&a.mean - &b.mean).norm_squared();
    Ok(mean_term + a.covariance.trace() + b.covariance.trace() - 2.0 * trace_sqrt)
}

pub fn frechet_distance<T: Real>(p: &EmbeddingSet<T>, q: &EmbeddingSet<T>) -> Result<f64> {
    if p.dims() != q.dims() {
        return Err(Error::Shape(format!(
            "dimension mismatch: {} vs {}",
            p.dims(),
            q.dims()
        )));
    }
    frechet_from_surrogates(&GaussianSurrogate::fit(p)?, &GaussianSurrogate::fit(q)?)
}
