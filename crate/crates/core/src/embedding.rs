//! Embedding sets: validated `N×D` feature matrices with a label.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{self, FileFormat};
use crate::scalar::Real;

/// A finite point set `V ⊂ ℝᴰ` stored row-major.
///
/// Construction validates that the matrix is non-empty, rectangular and
/// finite, so every other module can rely on those facts.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet<T> {
    data: Vec<T>,
    rows: usize,
    dims: usize,
    label: String,
    source: String,
}

impl<T: Real> EmbeddingSet<T> {
    /// Build from a flat row-major buffer.
    pub fn from_flat(rows: usize, dims: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || dims == 0 {
            return Err(Error::Shape(format!(
                "embedding set must have at least one row and one column, got {rows}x{dims}"
            )));
        }
        if data.len() != rows * dims {
            return Err(Error::Shape(format!(
                "buffer holds {} values, expected {rows}x{dims} = {}",
                data.len(),
                rows * dims
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / dims,
                col: pos % dims,
            });
        }
        Ok(Self {
            data,
            rows,
            dims,
            label: String::new(),
            source: String::new(),
        })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::Shape(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::from_flat(n, d, data)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source = source.into();
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dims..(i + 1) * self.dims]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[T]> + '_ {
        self.data.chunks_exact(self.dims)
    }

    pub fn into_flat(self) -> Vec<T> {
        self.data
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn stack(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::Shape(format!(
                "cannot stack {}-d and {}-d sets",
                self.dims, other.dims
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self {
            data,
            rows: self.rows + other.rows,
            dims: self.dims,
            label: self.label.clone(),
            source: self.source.clone(),
        })
    }

    /// Copy of the rows at `indices`, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.dims);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::Parameter(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Self::from_flat(indices.len(), self.dims, data)?
            .with_label(self.label.clone())
            .with_source(self.source.clone()))
    }

    /// Overwrite row `i` with `values`. Keeps the finiteness invariant.
    pub fn set_row(&mut self, i: usize, values: &[T]) -> Result<()> {
        if values.len() != self.dims {
            return Err(Error::Shape(format!(
                "replacement row has {} columns, expected {}",
                values.len(),
                self.dims
            )));
        }
        if let Some(col) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col });
        }
        self.data[i * self.dims..(i + 1) * self.dims].copy_from_slice(values);
        Ok(())
    }

    /// Apply `f` to every coordinate. Fails if the result is not finite.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Ok(
            Self::from_flat(self.rows, self.dims, self.data.iter().map(|&v| f(v)).collect())?
                .with_label(self.label.clone())
                .with_source(self.source.clone()),
        )
    }

    /// Widen or narrow to another scalar type.
    pub fn cast<U: Real>(&self) -> Result<EmbeddingSet<U>> {
        let data = self
            .data
            .iter()
            .map(|&v| U::from_f64(v.as_f64()).unwrap_or_else(U::nan))
            .collect();
        Ok(EmbeddingSet::from_flat(self.rows, self.dims, data)?
            .with_label(self.label.clone())
            .with_source(self.source.clone()))
    }

    /// Squared Euclidean norm of every row.
    pub fn squared_norms(&self) -> Vec<T> {
        self.iter_rows()
            .map(|r| r.iter().fold(T::zero(), |acc, &v| acc + v * v))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub path: PathBuf,
    #[serde(default)]
    pub expected_rows: Option<usize>,
    #[serde(default)]
    pub expected_dims: Option<usize>,
}

/// A list of labelled embedding files plus the seed for any sampling done on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default)]
    pub seed: u64,
    #[serde(rename = "entry", default)]
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text)
            .map_err(|e| Error::config("<manifest>", e.to_string()))?;
        let manifest: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(key, e.into_inner().to_string())
        })?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if !seen.insert(e.label.as_str()) {
                return Err(Error::config(
                    format!("entry[{i}].label"),
                    format!("duplicate label {:?}", e.label),
                ));
            }
        }
        Ok(())
    }

    /// Load every entry, resolving relative paths against `base_dir` and
    /// checking the expected shapes.
    pub fn load_all<T: Real>(&self, base_dir: &Path) -> Result<Vec<EmbeddingSet<T>>> {
        self.entries
            .iter()
            .map(|e| {
                let path = base_dir.join(&e.path);
                let set = io::load_embeddings::<T>(&path, FileFormat::from_path(&path)?)?
                    .with_label(e.label.clone());
                if let Some(rows) = e.expected_rows {
                    if rows != set.rows() {
                        return Err(Error::Shape(format!(
                            "{}: expected {rows} rows, found {}",
                            e.label,
                            set.rows()
                        )));
                    }
                }
                if let Some(dims) = e.expected_dims {
                    if dims != set.dims() {
                        return Err(Error::Shape(format!(
                            "{}: expected {dims} columns, found {}",
                            e.label,
                            set.dims()
                        )));
                    }
                }
                Ok(set)
            })
            .collect()
    }
}
