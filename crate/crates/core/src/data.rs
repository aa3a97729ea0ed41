//! Dataset loading, client partitioning and mini-batch plans.

use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::accountant::SubsampleMode;
use crate::error::{Error, Result};
use crate::rng::{self, Purpose, StreamId};

/// One labelled example; `label` is `-1.0` or `+1.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: f64,
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvSchema {
    /// Rescale every feature column to mean 0 and variance 1.
    pub standardize: bool,
    /// Reject files whose feature count differs.
    pub feature_count: Option<usize>,
}

/// Reads a header-first CSV whose last column is a `{0, 1}` label.
///
/// Labels are mapped to `{-1, +1}`.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Vec<Sample>> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, schema)
}

/// [`load_csv`] on in-memory text.
pub fn parse_csv(text: &str, schema: &CsvSchema) -> Result<Vec<Sample>> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((_, l)) => break l,
            None => return Err(Error::Schema("empty file".into())),
        }
    };
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns.len() < 2 {
        return Err(Error::Schema("need at least one feature column and a label column".into()));
    }
    if columns.last() != Some(&"label") {
        return Err(Error::Schema(format!(
            "last column must be named `label`, found {:?}",
            columns.last().unwrap()
        )));
    }
    let n_features = columns.len() - 1;
    if let Some(expected) = schema.feature_count {
        if expected != n_features {
            return Err(Error::Schema(format!(
                "expected {expected} feature columns, found {n_features}"
            )));
        }
    }

    let mut samples = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(Error::Parse {
                line,
                message: format!("expected {} fields, found {}", columns.len(), fields.len()),
            });
        }
        let mut features = Vec::with_capacity(n_features);
        for (col, field) in fields[..n_features].iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column `{}`: {field:?} is not a number", columns[col]),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column `{}`: non-finite value", columns[col]),
                });
            }
            features.push(value);
        }
        let label = match fields[n_features] {
            "0" => -1.0,
            "1" => 1.0,
            other => {
                return Err(Error::Schema(format!(
                    "line {line}: label must be 0 or 1, found {other:?}"
                )))
            }
        };
        samples.push(Sample { features, label });
    }
    if samples.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }
    if schema.standardize {
        standardize(&mut samples);
    }
    Ok(samples)
}

/// Centers each feature and scales it to unit (population) variance.
/// Constant columns are only centered.
pub fn standardize(samples: &mut [Sample]) {
    let Some(first) = samples.first() else { return };
    let dim = first.features.len();
    let n = samples.len() as f64;
    for j in 0..dim {
        let mean = samples.iter().map(|s| s.features[j]).sum::<f64>() / n;
        let var = samples.iter().map(|s| (s.features[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for s in samples.iter_mut() {
            s.features[j] -= mean;
            if sd > 0.0 {
                s.features[j] /= sd;
            }
        }
    }
}

/// Seeded split into `(train, test)` with `round(test_fraction * n)` test samples.
pub fn train_test_split(
    mut samples: Vec<Sample>,
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<Sample>, Vec<Sample>)> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParameter(format!(
            "test_fraction must lie in [0, 1), got {test_fraction}"
        )));
    }
    let mut rng = rng::stream(seed, Purpose::HoldOut, StreamId::default());
    samples.shuffle(&mut rng);
    let n_test = (test_fraction * samples.len() as f64).round() as usize;
    let test = samples.split_off(samples.len() - n_test);
    if samples.is_empty() {
        return Err(Error::InvalidParameter("test split leaves no training data".into()));
    }
    Ok((samples, test))
}

/// One client's local data.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientDataset {
    pub client_id: usize,
    pub samples: Vec<Sample>,
}

impl ClientDataset {
    pub fn size(&self) -> usize {
        self.samples.len()
    }
}

/// Shuffles `samples` and deals contiguous near-equal chunks to `num_clients` clients.
///
/// The first `len % num_clients` clients get one extra sample.
pub fn partition(mut samples: Vec<Sample>, num_clients: usize, seed: u64) -> Result<Vec<ClientDataset>> {
    if num_clients == 0 {
        return Err(Error::InvalidParameter("num_clients must be >= 1".into()));
    }
    if samples.len() < num_clients {
        return Err(Error::TooManyClients {
            clients: num_clients,
            samples: samples.len(),
        });
    }
    let mut rng = rng::stream(seed, Purpose::Partition, StreamId::default());
    samples.shuffle(&mut rng);
    let base = samples.len() / num_clients;
    let extra = samples.len() % num_clients;
    let mut rest = samples.into_iter();
    Ok((0..num_clients)
        .map(|client_id| {
            let size = base + usize::from(client_id < extra);
            ClientDataset {
                client_id,
                samples: rest.by_ref().take(size).collect(),
            }
        })
        .collect())
}

/// Sample indices for the `Q` local steps of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    pub mode: SubsampleMode,
    pub batches: Vec<Vec<usize>>,
}

impl BatchPlan {
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.batches.iter().flatten().copied()
    }

    /// Resolves the indices against the dataset they were drawn for.
    pub fn resolve<'a>(&self, dataset: &'a ClientDataset) -> Vec<Vec<&'a Sample>> {
        self.batches
            .iter()
            .map(|b| b.iter().map(|&i| &dataset.samples[i]).collect())
            .collect()
    }
}

/// Draws `Q * b` indices for `client_id` in `round` and deals them into `Q` batches of `b`.
///
/// WOR draws one subset of distinct indices; WR draws every index
/// independently and uniformly.
pub fn make_batch_plan(
    dataset_size: usize,
    local_steps: usize,
    batch_size: usize,
    mode: SubsampleMode,
    seed: u64,
    client_id: usize,
    round: usize,
) -> Result<BatchPlan> {
    if local_steps == 0 || batch_size == 0 || dataset_size == 0 {
        return Err(Error::InvalidParameter(
            "local_steps, batch_size and dataset size must be positive".into(),
        ));
    }
    let draws = local_steps * batch_size;
    let mut rng = rng::stream(seed, Purpose::BatchPlan, StreamId::new(client_id, round));
    let flat: Vec<usize> = match mode {
        SubsampleMode::Wor => {
            if draws > dataset_size {
                return Err(Error::InvalidParameter(format!(
                    "WOR plan needs {draws} distinct samples but the client holds {dataset_size}"
                )));
            }
            index::sample(&mut rng, dataset_size, draws).into_vec()
        }
        SubsampleMode::Wr => (0..draws).map(|_| rng.random_range(0..dataset_size)).collect(),
    };
    Ok(BatchPlan {
        mode,
        batches: flat.chunks(batch_size).map(<[usize]>::to_vec).collect(),
    })
}
