//! Regularized logistic regression on a parameter vector split into a
//! locally retained private block and a shared public block.
//!
//! The weight vector `w` has one entry per feature. A sample `(x, y)` with
//! `y ∈ {-1, +1}` contributes `ln(1 + exp(-y xᵀw))`, which is the trace form
//! `ln(1 + exp(-Tr(Wᵀ x yᵀ)))` for a single label column.

use std::fmt;
use std::str::FromStr;

use crate::data::Sample;
use crate::error::{Error, Result};
use crate::mechanisms::l2_norm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Regularizer {
    /// `γ ‖w‖₂`
    #[default]
    Norm,
    /// `γ ‖w‖₂²`
    SquaredNorm,
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regularizer::Norm => "norm",
            Regularizer::SquaredNorm => "squared",
        })
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "norm" => Ok(Regularizer::Norm),
            "squared" => Ok(Regularizer::SquaredNorm),
            other => Err(Error::InvalidParameter(format!(
                "unknown regularizer {other:?} (expected norm or squared)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub regularization: f64,
    pub feature_dim: usize,
    pub regularizer: Regularizer,
}

impl LossSpec {
    pub fn new(regularization: f64, feature_dim: usize) -> Result<Self> {
        if regularization.is_nan() || regularization < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "regularization must be nonnegative, got {regularization}"
            )));
        }
        if feature_dim == 0 {
            return Err(Error::InvalidParameter("feature_dim must be >= 1".into()));
        }
        Ok(Self {
            regularization,
            feature_dim,
            regularizer: Regularizer::Norm,
        })
    }

    pub fn with_regularizer(mut self, regularizer: Regularizer) -> Self {
        self.regularizer = regularizer;
        self
    }
}

/// Model parameters as `(private, public)`, private block leading.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitModel {
    private_block: Vec<f64>,
    public_block: Vec<f64>,
}

/// Length of the private block for a `dim`-parameter model.
///
/// `round(fraction * dim)` with ties to even; both blocks must be nonempty.
pub fn split_point(dim: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidFraction { fraction, dim });
    }
    let boundary = (fraction * dim as f64).round_ties_even() as usize;
    if boundary == 0 || boundary >= dim {
        return Err(Error::InvalidFraction { fraction, dim });
    }
    Ok(boundary)
}

impl SplitModel {
    pub fn split(flat: &[f64], fraction: f64) -> Result<Self> {
        let boundary = split_point(flat.len(), fraction)?;
        Ok(Self {
            private_block: flat[..boundary].to_vec(),
            public_block: flat[boundary..].to_vec(),
        })
    }

    /// Every coordinate public; used to reduce the protocol to plain FedAvg.
    pub fn public_only(flat: &[f64]) -> Self {
        Self {
            private_block: Vec::new(),
            public_block: flat.to_vec(),
        }
    }

    pub fn from_blocks(private_block: Vec<f64>, public_block: Vec<f64>) -> Self {
        Self {
            private_block,
            public_block,
        }
    }

    pub fn private_block(&self) -> &[f64] {
        &self.private_block
    }

    pub fn public_block(&self) -> &[f64] {
        &self.public_block
    }

    pub fn into_blocks(self) -> (Vec<f64>, Vec<f64>) {
        (self.private_block, self.public_block)
    }

    pub fn dim(&self) -> usize {
        self.private_block.len() + self.public_block.len()
    }

    pub fn recombine(&self) -> Vec<f64> {
        recombine(&self.private_block, &self.public_block)
    }
}

pub fn recombine(private_block: &[f64], public_block: &[f64]) -> Vec<f64> {
    let mut flat = Vec::with_capacity(private_block.len() + public_block.len());
    flat.extend_from_slice(private_block);
    flat.extend_from_slice(public_block);
    flat
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `ln(1 + e^{-m})` without overflow.
fn softplus_neg(margin: f64) -> f64 {
    (-margin).max(0.0) + (-margin.abs()).exp().ln_1p()
}

/// `1 / (1 + e^{m})`, the derivative of `softplus_neg` up to sign.
fn logistic_neg(margin: f64) -> f64 {
    if margin >= 0.0 {
        let e = (-margin).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + margin.exp())
    }
}

fn check_batch(weights: &[f64], batch: &[&Sample], spec: &LossSpec) -> Result<()> {
    if weights.len() != spec.feature_dim {
        return Err(Error::DimensionMismatch {
            expected: spec.feature_dim,
            actual: weights.len(),
        });
    }
    if batch.is_empty() {
        return Err(Error::InvalidParameter("batch must be nonempty".into()));
    }
    for s in batch {
        if s.features.len() != spec.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.feature_dim,
                actual: s.features.len(),
            });
        }
    }
    Ok(())
}

fn regularizer_value(weights: &[f64], spec: &LossSpec) -> f64 {
    match spec.regularizer {
        Regularizer::Norm => spec.regularization * l2_norm(weights),
        Regularizer::SquaredNorm => spec.regularization * dot(weights, weights),
    }
}

/// Mean logistic loss over `batch` plus the regularizer.
pub fn loss(weights: &[f64], batch: &[&Sample], spec: &LossSpec) -> Result<f64> {
    check_batch(weights, batch, spec)?;
    let data: f64 = batch
        .iter()
        .map(|s| softplus_neg(s.label * dot(weights, &s.features)))
        .sum::<f64>()
        / batch.len() as f64;
    Ok(data + regularizer_value(weights, spec))
}

/// Gradient of [`loss`] with respect to every coordinate.
///
/// For the unsquared norm the subgradient 0 is used at `w = 0`.
pub fn gradient(weights: &[f64], batch: &[&Sample], spec: &LossSpec) -> Result<Vec<f64>> {
    check_batch(weights, batch, spec)?;
    let mut grad = vec![0.0; weights.len()];
    let scale = 1.0 / batch.len() as f64;
    for s in batch {
        let coeff = -s.label * logistic_neg(s.label * dot(weights, &s.features)) * scale;
        for (g, x) in grad.iter_mut().zip(&s.features) {
            *g += coeff * x;
        }
    }
    if spec.regularization > 0.0 {
        let factor = match spec.regularizer {
            Regularizer::Norm => {
                let norm = l2_norm(weights);
                if norm > 0.0 {
                    spec.regularization / norm
                } else {
                    0.0
                }
            }
            Regularizer::SquaredNorm => 2.0 * spec.regularization,
        };
        for (g, w) in grad.iter_mut().zip(weights) {
            *g += factor * w;
        }
    }
    Ok(grad)
}

/// Runs one SGD step per batch over the whole parameter vector.
pub fn local_update(
    model: &SplitModel,
    batches: &[Vec<&Sample>],
    learning_rate: f64,
    spec: &LossSpec,
) -> Result<SplitModel> {
    if batches.is_empty() {
        return Err(Error::InvalidParameter("local update needs at least one batch".into()));
    }
    let mut weights = model.recombine();
    for batch in batches {
        let grad = gradient(&weights, batch, spec)?;
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= learning_rate * g;
        }
    }
    let boundary = model.private_block.len();
    let public_block = weights.split_off(boundary);
    Ok(SplitModel::from_blocks(weights, public_block))
}

/// Predicted label: `+1` when `xᵀw > 0`, otherwise `-1`.
pub fn predict(weights: &[f64], features: &[f64]) -> f64 {
    if dot(weights, features) > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Fraction of `samples` classified correctly.
pub fn accuracy<'a>(weights: &[f64], samples: impl IntoIterator<Item = &'a Sample>) -> f64 {
    let (mut hits, mut total) = (0usize, 0usize);
    for s in samples {
        total += 1;
        if predict(weights, &s.features) == s.label {
            hits += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}
