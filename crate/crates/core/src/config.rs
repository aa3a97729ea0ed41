//! `key = value` experiment files.
//!
//! Blank lines and lines starting with `#` are ignored. `dataset` is resolved
//! relative to the directory holding the file.

use std::path::{Path, PathBuf};

use crate::engine::{CheckInProbs, ExperimentConfig};
use crate::error::{Error, Result};

pub const KEYS: &[&str] = &[
    "dataset",
    "standardize",
    "num_clients",
    "rounds",
    "check_in_prob",
    "local_steps",
    "batch_size",
    "subsample_mode",
    "eps_local",
    "delta_local",
    "clip",
    "sensitivity",
    "learning_rate",
    "regularization",
    "regularizer",
    "split_fraction",
    "hoeffding_beta",
    "composition_delta",
    "seed",
    "algorithm",
    "baseline_clients",
    "noise",
    "test_fraction",
    "allow_extrapolation",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    pub dataset: Option<PathBuf>,
    pub standardize: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            dataset: None,
            standardize: true,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("{key}: cannot parse {value:?}"))
}

fn parse_with<T>(key: &str, value: &str, f: impl FnOnce(&str) -> Result<T>) -> std::result::Result<T, String> {
    f(value).map_err(|e| format!("{key}: {e}"))
}

impl RunConfig {
    /// Sets one key. `base_dir` anchors a relative `dataset` path.
    pub fn set(&mut self, key: &str, value: &str, base_dir: Option<&Path>) -> std::result::Result<(), String> {
        let e = &mut self.experiment;
        let value = value.trim();
        match key {
            "dataset" => {
                let p = PathBuf::from(value);
                self.dataset = Some(match base_dir {
                    Some(dir) if p.is_relative() => dir.join(p),
                    _ => p,
                });
            }
            "standardize" => self.standardize = parse_value(key, value)?,
            "num_clients" => e.num_clients = parse_value(key, value)?,
            "rounds" => e.rounds = parse_value(key, value)?,
            "check_in_prob" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|v| parse_value(key, v.trim()))
                    .collect::<std::result::Result<_, _>>()?;
                e.check_in_prob = if parts.len() == 1 {
                    CheckInProbs::Uniform(parts[0])
                } else {
                    CheckInProbs::PerClient(parts)
                };
            }
            "local_steps" => e.local_steps = parse_value(key, value)?,
            "batch_size" => e.batch_size = parse_value(key, value)?,
            "subsample_mode" => e.subsample_mode = parse_with(key, value, str::parse)?,
            "eps_local" => e.eps_local = parse_value(key, value)?,
            "delta_local" => e.delta_local = parse_value(key, value)?,
            "clip" => e.clip = parse_value(key, value)?,
            "sensitivity" => e.sensitivity = Some(parse_value(key, value)?),
            "learning_rate" => e.learning_rate = parse_value(key, value)?,
            "regularization" => e.regularization = parse_value(key, value)?,
            "regularizer" => e.regularizer = parse_with(key, value, str::parse)?,
            "split_fraction" => e.split = parse_with(key, value, str::parse)?,
            "hoeffding_beta" => e.hoeffding_beta = parse_value(key, value)?,
            "composition_delta" => e.composition_delta = parse_value(key, value)?,
            "seed" => e.master_seed = parse_value(key, value)?,
            "algorithm" => e.algorithm = parse_with(key, value, str::parse)?,
            "baseline_clients" => e.baseline_clients = Some(parse_value(key, value)?),
            "noise" => e.noise = parse_with(key, value, str::parse)?,
            "test_fraction" => e.test_fraction = parse_value(key, value)?,
            "allow_extrapolation" => e.allow_extrapolation = parse_value(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Parses a whole file body. Every bad line and every failed constraint is reported.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg = Self::default();
        let mut problems = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                problems.push(format!("line {}: expected key = value", i + 1));
                continue;
            };
            if let Err(msg) = cfg.set(key.trim(), value, base_dir) {
                problems.push(format!("line {}: {msg}", i + 1));
            }
        }
        if problems.is_empty() {
            if let Err(Error::Config(more)) = cfg.experiment.validate() {
                problems.extend(more);
            }
        }
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(problems))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent())
    }

    /// Renders the configuration back into the file format.
    pub fn to_text(&self) -> String {
        let e = &self.experiment;
        let mut lines = Vec::new();
        if let Some(d) = &self.dataset {
            lines.push(format!("dataset = {}", d.display()));
        }
        lines.push(format!("standardize = {}", self.standardize));
        lines.push(format!("num_clients = {}", e.num_clients));
        lines.push(format!("rounds = {}", e.rounds));
        lines.push(format!("check_in_prob = {}", e.check_in_prob));
        lines.push(format!("local_steps = {}", e.local_steps));
        lines.push(format!("batch_size = {}", e.batch_size));
        lines.push(format!("subsample_mode = {}", e.subsample_mode));
        lines.push(format!("eps_local = {}", e.eps_local));
        lines.push(format!("delta_local = {}", e.delta_local));
        lines.push(format!("clip = {}", e.clip));
        if let Some(s) = e.sensitivity {
            lines.push(format!("sensitivity = {s}"));
        }
        lines.push(format!("learning_rate = {}", e.learning_rate));
        lines.push(format!("regularization = {}", e.regularization));
        lines.push(format!("regularizer = {}", e.regularizer));
        lines.push(format!("split_fraction = {}", e.split));
        lines.push(format!("hoeffding_beta = {}", e.hoeffding_beta));
        lines.push(format!("composition_delta = {}", e.composition_delta));
        lines.push(format!("seed = {}", e.master_seed));
        lines.push(format!("algorithm = {}", e.algorithm));
        if let Some(k) = e.baseline_clients {
            lines.push(format!("baseline_clients = {k}"));
        }
        lines.push(format!("noise = {}", e.noise));
        lines.push(format!("test_fraction = {}", e.test_fraction));
        lines.push(format!("allow_extrapolation = {}", e.allow_extrapolation));
        lines.join("\n") + "\n"
    }
}
