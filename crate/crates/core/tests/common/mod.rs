#![allow(dead_code)]

use std::path::PathBuf;

use fedsplit::data::{self, CsvSchema, Sample};
use fedsplit::engine::ExperimentConfig;
use fedsplit::model::{self, LossSpec};

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini.csv")
}

pub fn adult_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/adult.csv")
}

pub fn standardized(path: PathBuf) -> Vec<Sample> {
    data::load_csv(
        path,
        &CsvSchema {
            standardize: true,
            feature_count: None,
        },
    )
    .unwrap()
}

/// Plain FedAvg with every client in every round. Returns the global model after each round.
pub fn fedavg_reference(cfg: &ExperimentConfig, samples: Vec<Sample>) -> Vec<Vec<f64>> {
    let seed = cfg.master_seed;
    let (train, _) = data::train_test_split(samples, cfg.test_fraction, seed).unwrap();
    let dim = train[0].features.len();
    let clients = data::partition(train, cfg.num_clients, seed).unwrap();
    let spec = LossSpec::new(cfg.regularization, dim).unwrap().with_regularizer(cfg.regularizer);
    let mut w = vec![0.0; dim];
    let mut history = Vec::new();
    for t in 0..cfg.rounds {
        let mut locals = Vec::new();
        for (i, client) in clients.iter().enumerate() {
            let plan = data::make_batch_plan(
                client.size(),
                cfg.local_steps,
                cfg.batch_size,
                cfg.subsample_mode,
                seed,
                i,
                t,
            )
            .unwrap();
            let mut wi = w.clone();
            for batch in plan.resolve(client) {
                let g = model::gradient(&wi, &batch, &spec).unwrap();
                for (x, gx) in wi.iter_mut().zip(&g) {
                    *x -= cfg.learning_rate * gx;
                }
            }
            locals.push(wi);
        }
        let mut sum = locals[0].clone();
        for wi in &locals[1..] {
            for (s, x) in sum.iter_mut().zip(wi) {
                *s += x;
            }
        }
        w = sum.iter().map(|s| s / cfg.num_clients as f64).collect();
        history.push(w.clone());
    }
    history
}
