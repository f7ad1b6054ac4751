//! Barcode fidelity and diversity for comparing two sets of embedding vectors.
//!
//! All pairwise L2 distances between (or within) the sets are collected,
//! normalized by their maximum, and summarized: fidelity is one minus the
//! mean normalized distance, diversity its standard deviation. Relative
//! forms compare the cross-set statistics against each set's own.
//!
//! Precision/recall/density/coverage and the Fréchet distance are provided
//! as baselines, together with a joint SVD projection and an experiment
//! harness for seeded synthetic studies.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the working precision to `f64`.

pub mod accum;
pub mod barcode;
pub mod baseline;
pub mod distance;
pub mod embedding;
pub mod error;
pub mod experiment;
pub mod io;
pub mod projection;
pub mod report;
pub mod sampling;
pub mod scalar;

pub use barcode::{
    barcode_metrics, diversity, fidelity, relative_diversity, relative_fidelity, remove_outliers,
    BarcodeOptions, DegenerateFlags, FidelityConvention, OutlierPolicy, OutlierPosition,
};
pub use baseline::{frechet_distance, knn_radius, prdc, GaussianSurrogate, PrdcScores, DEFAULT_K};
pub use distance::{
    barcode_curve, concentration_diagnostics, cross_distances, normalize, self_distances,
    self_distances_with, ConcentrationDiagnostics, DistanceMode, SelfPairs, StorageMode,
    DEFAULT_EXACT_LIMIT,
};
pub use embedding::{DatasetManifest, ManifestEntry};
pub use error::{Error, ErrorCategory, Result};
pub use io::{load_embeddings, save_embeddings, FileFormat};
pub use projection::{fit_projection, project, ProjectionTarget};
pub use sampling::{sample_gaussian, SAMPLER_NAME};
pub use scalar::Real;

/// Engine version recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type EmbeddingSet = embedding::EmbeddingSet<f64>;
pub type EmbeddingSet32 = embedding::EmbeddingSet<f32>;
pub type DistanceSummary = distance::DistanceSummary<f64>;
pub type NormalizedMoments = distance::NormalizedMoments<f64>;
pub type BarcodeCurve = distance::BarcodeCurve<f64>;
pub type CurvePoint = distance::CurvePoint<f64>;
pub type BarcodeMetrics = barcode::BarcodeMetrics<f64>;
pub type ProjectionModel = projection::ProjectionModel<f64>;
