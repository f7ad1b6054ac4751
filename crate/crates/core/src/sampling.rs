//! Seeded isotropic Gaussian sampling.
//!
//! Draws come from ChaCha20 (counter-based, with independent streams) pushed
//! through the ziggurat standard-normal sampler of `rand_distr`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Recorded in reports so a run can be reproduced.
pub const SAMPLER_NAME: &str = "chacha20+ziggurat";

/// Generator for `(seed, stream)`; distinct streams are independent.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` i.i.d. draws from `N(mean·𝟙, I_d)`.
pub fn sample_gaussian<T: Real>(n: usize, d: usize, mean: f64, seed: u64) -> Result<EmbeddingSet<T>> {
    sample_gaussian_stream(n, d, mean, seed, 0)
}

pub fn sample_gaussian_stream<T: Real>(
    n: usize,
    d: usize,
    mean: f64,
    seed: u64,
    stream: u64,
) -> Result<EmbeddingSet<T>> {
    if n == 0 || d == 0 {
        return Err(Error::Parameter(format!(
            "gaussian sample needs n >= 1 and d >= 1, got n={n}, d={d}"
        )));
    }
    if !mean.is_finite() {
        return Err(Error::Parameter("gaussian mean must be finite".into()));
    }
    let mut rng = rng_for(seed, stream);
    let data = (0..n * d)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            T::lit(z + mean)
        })
        .collect();
    Ok(EmbeddingSet::from_flat(n, d, data)?
        .with_label(format!("gaussian(mean={mean})"))
        .with_source(format!(
            "{SAMPLER_NAME} n={n} d={d} mean={mean} seed={seed} stream={stream}"
        )))
}

/// `count` distinct indices from `0..n`, in random order.
pub fn choose_indices(rng: &mut impl Rng, n: usize, count: usize) -> Result<Vec<usize>> {
    if count > n {
        return Err(Error::Parameter(format!(
            "cannot choose {count} distinct rows out of {n}"
        )));
    }
    Ok(rand::seq::index::sample(rng, n, count).into_vec())
}
