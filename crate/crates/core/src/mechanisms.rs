//! Norm clipping and Gaussian perturbation of public blocks.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::{self, Purpose, StreamId};

/// Parameters of one Gaussian perturbation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    sigma_squared: f64,
    dimension: usize,
    stream_id: StreamId,
}

impl NoiseSpec {
    pub fn new(sigma_squared: f64, dimension: usize, stream_id: StreamId) -> Result<Self> {
        if !(sigma_squared > 0.0 && sigma_squared.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be positive, got {sigma_squared}"
            )));
        }
        Self::with_dimension(sigma_squared, dimension, stream_id)
    }

    /// Zero-variance sentinel used by noiseless reference runs.
    pub fn noiseless(dimension: usize, stream_id: StreamId) -> Result<Self> {
        Self::with_dimension(0.0, dimension, stream_id)
    }

    fn with_dimension(sigma_squared: f64, dimension: usize, stream_id: StreamId) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("noise dimension must be >= 1".into()));
        }
        Ok(Self {
            sigma_squared,
            dimension,
            stream_id,
        })
    }

    pub fn sigma_squared(&self) -> f64 {
        self.sigma_squared
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn stream_id(&self) -> StreamId {
        self.stream_id
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `vector` to norm at most `threshold`: `v / max(1, ‖v‖/C)`.
pub fn clip(vector: &[f64], threshold: f64) -> Vec<f64> {
    assert!(threshold > 0.0, "clip threshold must be positive");
    let factor = (l2_norm(vector) / threshold).max(1.0);
    if factor == 1.0 {
        return vector.to_vec();
    }
    vector.iter().map(|x| x / factor).collect()
}

/// Adds `N(0, σ² I)` noise drawn from the `(seed, client, round)` noise stream.
pub fn perturb(vector: &[f64], spec: &NoiseSpec, seed: u64) -> Result<Vec<f64>> {
    if vector.len() != spec.dimension {
        return Err(Error::DimensionMismatch {
            expected: spec.dimension,
            actual: vector.len(),
        });
    }
    if spec.sigma_squared == 0.0 {
        return Ok(vector.to_vec());
    }
    let sigma = spec.sigma_squared.sqrt();
    let mut rng = rng::stream(seed, Purpose::Noise, spec.stream_id);
    Ok(vector
        .iter()
        .map(|x| {
            let z: f64 = StandardNormal.sample(&mut rng);
            x + sigma * z
        })
        .collect())
}
