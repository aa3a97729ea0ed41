//! Round-by-round simulation of split-model federated learning with random
//! client check-in, plus the DP-FedAvg baseline.
//!
//! Each round of the split protocol:
//!
//! 1. every client checks in independently with probability `p_i`;
//! 2. each participant starts from `(own private block, global public block)`,
//!    runs `Q` SGD steps on a fresh batch plan, keeps the new private block,
//!    clips the new public block and adds Gaussian noise;
//! 3. the server averages the noisy public blocks with the correction factor
//!    `ν = 1 - Π(1 - p_i)`.
//!
//! All randomness comes from per-`(client, round)` streams, so the trace does
//! not depend on how per-client work is scheduled.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::accountant::{
    self, CentralRoundPrivacy, LocalPrivacySpec, SamplingSpec, SubsampleMode, TotalPrivacyReport,
};
use crate::data::{self, ClientDataset, Sample};
use crate::error::{Error, Result};
use crate::mechanisms::{self, NoiseSpec};
use crate::model::{self, LossSpec, Regularizer, SplitModel};
use crate::rng::{self, Purpose, StreamId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Algorithm {
    /// Private/public split with random check-in.
    #[default]
    Split,
    /// Full-vector clipping and noise with server-side sampling of `K` clients.
    DpFedAvg,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Split => "split",
            Algorithm::DpFedAvg => "dp-fedavg",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "split" => Ok(Algorithm::Split),
            "dp-fedavg" => Ok(Algorithm::DpFedAvg),
            other => Err(Error::InvalidParameter(format!(
                "unknown algorithm {other:?} (expected split or dp-fedavg)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitMode {
    /// Leading `round(f * d)` coordinates stay private.
    Fraction(f64),
    /// Nothing is private. Only meaningful for reference comparisons with FedAvg.
    PublicOnly,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitMode::Fraction(x) => write!(f, "{x}"),
            SplitMode::PublicOnly => f.write_str("public-only"),
        }
    }
}

impl FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "public-only" {
            return Ok(SplitMode::PublicOnly);
        }
        s.parse()
            .map(SplitMode::Fraction)
            .map_err(|_| Error::InvalidParameter(format!("split_fraction: {s:?} is not a number or `public-only`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseMode {
    #[default]
    Gaussian,
    /// No perturbation; no privacy guarantee is reported.
    None,
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseMode::Gaussian => "gaussian",
            NoiseMode::None => "none",
        })
    }
}

impl FromStr for NoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(NoiseMode::Gaussian),
            "none" => Ok(NoiseMode::None),
            other => Err(Error::InvalidParameter(format!(
                "unknown noise mode {other:?} (expected gaussian or none)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckInProbs {
    Uniform(f64),
    PerClient(Vec<f64>),
}

impl CheckInProbs {
    pub fn get(&self, client: usize) -> f64 {
        match self {
            CheckInProbs::Uniform(p) => *p,
            CheckInProbs::PerClient(ps) => ps[client],
        }
    }

    pub fn expand(&self, num_clients: usize) -> Vec<f64> {
        (0..num_clients).map(|i| self.get(i)).collect()
    }

    pub fn mean(&self, num_clients: usize) -> f64 {
        match self {
            CheckInProbs::Uniform(p) => *p,
            CheckInProbs::PerClient(ps) => ps.iter().sum::<f64>() / num_clients as f64,
        }
    }
}

impl fmt::Display for CheckInProbs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CheckInProbs::Uniform(p) => write!(f, "{p}"),
            CheckInProbs::PerClient(ps) => {
                let parts: Vec<String> = ps.iter().map(f64::to_string).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub num_clients: usize,
    pub rounds: usize,
    pub check_in_prob: CheckInProbs,
    pub local_steps: usize,
    pub batch_size: usize,
    pub subsample_mode: SubsampleMode,
    pub eps_local: f64,
    pub delta_local: f64,
    pub clip: f64,
    /// Defaults to `2 * clip`.
    pub sensitivity: Option<f64>,
    pub learning_rate: f64,
    pub regularization: f64,
    pub regularizer: Regularizer,
    pub split: SplitMode,
    pub hoeffding_beta: f64,
    pub composition_delta: f64,
    pub master_seed: u64,
    pub algorithm: Algorithm,
    /// Clients sampled per round by the baseline; defaults to `round(p N)`.
    pub baseline_clients: Option<usize>,
    pub noise: NoiseMode,
    pub test_fraction: f64,
    pub allow_extrapolation: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            num_clients: 100,
            rounds: 100,
            check_in_prob: CheckInProbs::Uniform(0.5),
            local_steps: 5,
            batch_size: 5,
            subsample_mode: SubsampleMode::Wor,
            eps_local: 1.0,
            delta_local: 1e-4,
            clip: 1.0,
            sensitivity: None,
            learning_rate: 1.0,
            regularization: 1e-3,
            regularizer: Regularizer::Norm,
            split: SplitMode::Fraction(0.5),
            hoeffding_beta: 0.25,
            composition_delta: 1e-4,
            master_seed: 0,
            algorithm: Algorithm::Split,
            baseline_clients: None,
            noise: NoiseMode::Gaussian,
            test_fraction: 0.2,
            allow_extrapolation: false,
        }
    }
}

impl ExperimentConfig {
    /// Whether per-round privacy guarantees are computed.
    pub fn accounts_privacy(&self) -> bool {
        self.noise == NoiseMode::Gaussian
    }

    pub fn baseline_k(&self) -> usize {
        self.baseline_clients.unwrap_or_else(|| {
            (self.check_in_prob.mean(self.num_clients) * self.num_clients as f64).round() as usize
        })
    }

    pub fn local_privacy(&self) -> Result<LocalPrivacySpec> {
        let spec = LocalPrivacySpec::new(self.eps_local, self.delta_local, self.clip)?;
        match self.sensitivity {
            Some(s) => spec.with_sensitivity(s),
            None => Ok(spec),
        }
    }

    /// Checks every data-independent constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        fn need(problems: &mut Vec<String>, ok: bool, msg: String) {
            if !ok {
                problems.push(msg);
            }
        }
        need(&mut problems, self.num_clients >= 1, "num_clients must be >= 1".into());
        match &self.check_in_prob {
            CheckInProbs::Uniform(p) => {
                need(&mut problems, (0.0..=1.0).contains(p), format!("check_in_prob must lie in [0, 1], got {p}"))
            }
            CheckInProbs::PerClient(ps) => {
                need(
                    &mut problems,
                    ps.len() == self.num_clients,
                    format!("check_in_prob lists {} values for {} clients", ps.len(), self.num_clients),
                );
                need(
                    &mut problems,
                    ps.iter().all(|p| (0.0..=1.0).contains(p)),
                    "every check_in_prob must lie in [0, 1]".into(),
                );
            }
        }
        need(&mut problems, self.local_steps >= 1, "local_steps must be >= 1".into());
        need(&mut problems, self.batch_size >= 1, "batch_size must be >= 1".into());
        need(
            &mut problems,
            self.eps_local > 0.0 && self.eps_local.is_finite(),
            format!("eps_local must be positive, got {}", self.eps_local),
        );
        need(
            &mut problems,
            self.delta_local > 0.0 && self.delta_local < 1.0,
            format!("delta_local must lie in (0, 1), got {}", self.delta_local),
        );
        need(&mut problems, self.clip > 0.0, format!("clip must be positive, got {}", self.clip));
        if let Some(s) = self.sensitivity {
            need(&mut problems, s > 0.0, format!("sensitivity must be positive, got {s}"));
        }
        need(
            &mut problems,
            self.learning_rate >= 0.0 && self.learning_rate.is_finite(),
            format!("learning_rate must be nonnegative, got {}", self.learning_rate),
        );
        need(
            &mut problems,
            self.regularization >= 0.0,
            format!("regularization must be nonnegative, got {}", self.regularization),
        );
        if let SplitMode::Fraction(f) = self.split {
            need(&mut problems, f > 0.0 && f < 1.0, format!("split_fraction must lie in (0, 1), got {f}"));
        }
        need(
            &mut problems,
            self.composition_delta > 0.0 && self.composition_delta <= 1.0,
            format!("composition_delta must lie in (0, 1], got {}", self.composition_delta),
        );
        need(
            &mut problems,
            (0.0..1.0).contains(&self.test_fraction),
            format!("test_fraction must lie in [0, 1), got {}", self.test_fraction),
        );
        need(
            &mut problems,
            self.hoeffding_beta > 0.0,
            format!("hoeffding_beta must be positive, got {}", self.hoeffding_beta),
        );

        match self.algorithm {
            Algorithm::Split => {
                let all_zero = (0..self.num_clients).all(|i| self.check_in_prob.get(i) == 0.0);
                if self.num_clients >= 1 && problems.is_empty() {
                    need(&mut problems, !all_zero, "every check-in probability is 0, so no client can ever participate".into());
                }
                if self.accounts_privacy() {
                    if let Err(e) = accountant::check_regime(self.eps_local, self.allow_extrapolation) {
                        problems.push(e.to_string());
                    }
                    if self.hoeffding_beta > 0.0 && self.num_clients >= 1 {
                        if let Err(e) = accountant::checked_hoeffding_delta(self.hoeffding_beta, self.num_clients) {
                            problems.push(e.to_string());
                        }
                    }
                }
            }
            Algorithm::DpFedAvg => {
                let k = self.baseline_k();
                need(
                    &mut problems,
                    k >= 1 && k <= self.num_clients,
                    format!("baseline_clients must lie in [1, {}], got {k}", self.num_clients),
                );
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Bernoulli(`p`) participation draw for `client_id` in `round`.
pub fn check_in(p: f64, client_id: usize, round: usize, seed: u64) -> bool {
    if p >= 1.0 {
        return true;
    }
    if p <= 0.0 {
        return false;
    }
    let mut rng = rng::stream(seed, Purpose::CheckIn, StreamId::new(client_id, round));
    rng.random::<f64>() < p
}

/// Probability that at least one client checks in: `1 - Π(1 - p_i)`.
pub fn correction_factor(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::InvalidParameter("correction factor needs at least one client".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidParameter(format!("check-in probability {p} outside [0, 1]")));
    }
    let nu = 1.0 - probs.iter().map(|p| 1.0 - p).product::<f64>();
    if nu == 0.0 {
        return Err(Error::DegenerateConfig(
            "every check-in probability is 0, so no client can ever participate".into(),
        ));
    }
    Ok(nu)
}

/// Debiased average of the participants' public blocks:
/// `(1 / (ν |X|)) Σ_{k ∈ X} w_k`, summed in client-id order.
pub fn aggregate(updates: &BTreeMap<usize, Vec<f64>>, probs: &[f64]) -> Result<Vec<f64>> {
    let nu = correction_factor(probs)?;
    let mut iter = updates.values();
    let first = iter
        .next()
        .ok_or_else(|| Error::InvalidParameter("aggregate called with no participants".into()))?;
    let mut sum = first.clone();
    for v in iter {
        if v.len() != sum.len() {
            return Err(Error::DimensionMismatch {
                expected: sum.len(),
                actual: v.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let denom = nu * updates.len() as f64;
    for s in sum.iter_mut() {
        *s /= denom;
    }
    Ok(sum)
}

/// What one round produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrace {
    /// 1-based round number.
    pub round: usize,
    pub participants: Vec<usize>,
    pub correction: f64,
    /// Global public block after aggregation (the whole model for the baseline).
    pub global_public: Vec<f64>,
    /// Length of every vector a participant transmitted this round.
    pub payload_dim: usize,
    pub eps_central_round: f64,
    pub delta_central_round: f64,
    /// Strong-composition total over the rounds so far.
    pub eps_central_total: f64,
    /// Largest per-client moments-accountant total so far.
    pub eps_local_max: f64,
    pub train_loss: f64,
    /// Mean over clients of the accuracy of their recombined models.
    pub test_accuracy: f64,
    /// Accuracy of the server-side model with a zero private block.
    pub server_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub traces: Vec<RoundTrace>,
    pub report: TotalPrivacyReport,
}

impl ExperimentResult {
    pub fn final_accuracy(&self) -> f64 {
        self.traces.last().map_or(f64::NAN, |t| t.test_accuracy)
    }
}

/// Mutable simulation state between rounds.
pub struct Simulation {
    config: ExperimentConfig,
    clients: Vec<ClientDataset>,
    test: Vec<Sample>,
    loss_spec: LossSpec,
    probs: Vec<f64>,
    ratios: Vec<f64>,
    sigma_squared: f64,
    boundary: usize,
    private_blocks: Vec<Vec<f64>>,
    global_public: Vec<f64>,
    round_privacy: Option<CentralRoundPrivacy>,
    rounds_done: usize,
    released_rounds: usize,
    worst_eps: f64,
    worst_delta: f64,
}

impl Simulation {
    /// Holds out the test split, partitions the rest and prepares round 0.
    pub fn from_dataset(config: ExperimentConfig, samples: Vec<Sample>) -> Result<Self> {
        config.validate()?;
        let (train, test) = data::train_test_split(samples, config.test_fraction, config.master_seed)?;
        Self::new(config, train, test)
    }

    pub fn new(config: ExperimentConfig, train: Vec<Sample>, test: Vec<Sample>) -> Result<Self> {
        config.validate()?;
        let dim = train
            .first()
            .map(|s| s.features.len())
            .ok_or_else(|| Error::InvalidParameter("training data is empty".into()))?;
        let clients = data::partition(train, config.num_clients, config.master_seed)?;
        let loss_spec = LossSpec::new(config.regularization, dim)?.with_regularizer(config.regularizer);

        let boundary = match (config.algorithm, config.split) {
            (Algorithm::DpFedAvg, _) | (Algorithm::Split, SplitMode::PublicOnly) => 0,
            (Algorithm::Split, SplitMode::Fraction(f)) => model::split_point(dim, f)?,
        };

        let probs = config.check_in_prob.expand(config.num_clients);
        let ratios = clients
            .iter()
            .zip(&probs)
            .map(|(c, &p)| {
                let spec = SamplingSpec::new(p, config.subsample_mode, config.local_steps, config.batch_size, c.size())?;
                accountant::subsampling_ratio(&spec)
            })
            .collect::<Result<Vec<f64>>>()?;

        let local = config.local_privacy()?;
        let (sigma_squared, round_privacy) = match config.noise {
            NoiseMode::None => (0.0, None),
            NoiseMode::Gaussian => {
                let sigma_squared = accountant::gaussian_sigma_squared(&local);
                let round_privacy = match config.algorithm {
                    Algorithm::Split => {
                        if let Some(&q) = ratios.iter().find(|&&q| q >= 1.0) {
                            return Err(Error::DegenerateRatio(q));
                        }
                        let pairs: Vec<(f64, f64)> = probs.iter().copied().zip(ratios.iter().copied()).collect();
                        Some(accountant::central_round_privacy_with(
                            &pairs,
                            config.eps_local,
                            config.delta_local,
                            config.hoeffding_beta,
                            config.allow_extrapolation,
                        )?)
                    }
                    Algorithm::DpFedAvg => None,
                };
                (sigma_squared, round_privacy)
            }
        };

        for c in &clients {
            if c.samples.iter().any(|s| s.features.len() != dim) {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: c.samples.iter().map(|s| s.features.len()).find(|&l| l != dim).unwrap(),
                });
            }
        }

        Ok(Self {
            private_blocks: vec![vec![0.0; boundary]; config.num_clients],
            global_public: vec![0.0; dim - boundary],
            config,
            clients,
            test,
            loss_spec,
            probs,
            ratios,
            sigma_squared,
            boundary,
            round_privacy,
            rounds_done: 0,
            released_rounds: 0,
            worst_eps: 0.0,
            worst_delta: 0.0,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn clients(&self) -> &[ClientDataset] {
        &self.clients
    }

    pub fn subsampling_ratios(&self) -> &[f64] {
        &self.ratios
    }

    pub fn sigma_squared(&self) -> f64 {
        self.sigma_squared
    }

    pub fn global_public(&self) -> &[f64] {
        &self.global_public
    }

    pub fn private_block(&self, client: usize) -> &[f64] {
        &self.private_blocks[client]
    }

    /// Per-round central guarantee implied by the configuration (split protocol only).
    pub fn round_privacy(&self) -> Option<&CentralRoundPrivacy> {
        self.round_privacy.as_ref()
    }

    /// Clients taking part in round `t` (0-based).
    fn select(&self, t: usize) -> Vec<usize> {
        let seed = self.config.master_seed;
        match self.config.algorithm {
            Algorithm::Split => (0..self.config.num_clients)
                .filter(|&i| check_in(self.probs[i], i, t, seed))
                .collect(),
            Algorithm::DpFedAvg => {
                let mut rng = rng::stream(seed, Purpose::ServerSample, StreamId::new(0, t));
                let mut chosen = index::sample(&mut rng, self.config.num_clients, self.config.baseline_k()).into_vec();
                chosen.sort_unstable();
                chosen
            }
        }
    }

    /// Local training and privatization for one participant.
    /// Returns the new private block and the transmitted public vector.
    fn client_update(&self, client: usize, t: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let cfg = &self.config;
        let dataset = &self.clients[client];
        let plan = data::make_batch_plan(
            dataset.size(),
            cfg.local_steps,
            cfg.batch_size,
            cfg.subsample_mode,
            cfg.master_seed,
            client,
            t,
        )?;
        let batches = plan.resolve(dataset);
        let start = SplitModel::from_blocks(self.private_blocks[client].clone(), self.global_public.clone());
        let updated = model::local_update(&start, &batches, cfg.learning_rate, &self.loss_spec)?;
        let (private_block, public_block) = updated.into_blocks();
        let clipped = mechanisms::clip(&public_block, cfg.clip);
        let stream = StreamId::new(client, t);
        let noise = match cfg.noise {
            NoiseMode::Gaussian => NoiseSpec::new(self.sigma_squared, clipped.len(), stream)?,
            NoiseMode::None => NoiseSpec::noiseless(clipped.len(), stream)?,
        };
        let noisy = mechanisms::perturb(&clipped, &noise, cfg.master_seed)?;
        Ok((private_block, noisy))
    }

    fn run_clients(&self, participants: &[usize], t: usize) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        #[cfg(feature = "parallel")]
        let iter = participants.par_iter();
        #[cfg(not(feature = "parallel"))]
        let iter = participants.iter();
        iter.map(|&i| self.client_update(i, t)).collect()
    }

    fn client_model(&self, client: usize) -> Vec<f64> {
        model::recombine(&self.private_blocks[client], &self.global_public)
    }

    /// `(mean train loss, mean test accuracy, server accuracy)` of the current models.
    fn evaluate(&self) -> Result<(f64, f64, f64)> {
        let n = self.config.num_clients;
        let per_client = |i: usize| -> Result<(f64, f64)> {
            let w = self.client_model(i);
            let local: Vec<&Sample> = self.clients[i].samples.iter().collect();
            let l = model::loss(&w, &local, &self.loss_spec)?;
            let acc = if self.test.is_empty() {
                f64::NAN
            } else {
                model::accuracy(&w, &self.test)
            };
            Ok((l, acc))
        };
        #[cfg(feature = "parallel")]
        let stats: Vec<(f64, f64)> = (0..n).into_par_iter().map(per_client).collect::<Result<_>>()?;
        #[cfg(not(feature = "parallel"))]
        let stats: Vec<(f64, f64)> = (0..n).map(per_client).collect::<Result<_>>()?;

        let train_loss = stats.iter().map(|s| s.0).sum::<f64>() / n as f64;
        let test_accuracy = stats.iter().map(|s| s.1).sum::<f64>() / n as f64;
        let server = model::recombine(&vec![0.0; self.boundary], &self.global_public);
        let server_accuracy = if self.test.is_empty() {
            f64::NAN
        } else {
            model::accuracy(&server, &self.test)
        };
        Ok((train_loss, test_accuracy, server_accuracy))
    }

    /// `(ε_c, δ_c)` charged for a round in which `released` is true.
    fn round_charge(&self, released: bool) -> (f64, f64) {
        if !self.config.accounts_privacy() {
            return (f64::INFINITY, 1.0);
        }
        if !released {
            return (0.0, 0.0);
        }
        match (&self.round_privacy, self.config.algorithm) {
            (Some(r), _) => (r.eps_central, r.delta_central),
            // The baseline claims no amplification: each round costs the local guarantee.
            (None, _) => (self.config.eps_local, self.config.delta_local),
        }
    }

    /// Largest per-client moments total after `rounds` rounds.
    fn local_totals(&self, rounds: usize) -> Result<Vec<f64>> {
        if !self.config.accounts_privacy() {
            return Ok(vec![f64::INFINITY; self.config.num_clients]);
        }
        let cfg = &self.config;
        match cfg.algorithm {
            Algorithm::Split => self
                .ratios
                .iter()
                .zip(&self.probs)
                .map(|(&q, &p)| {
                    accountant::total_local_epsilon_closed_form(q, p, rounds, cfg.eps_local, cfg.delta_local, cfg.clip)
                })
                .collect(),
            Algorithm::DpFedAvg => {
                let total = if rounds == 0 {
                    0.0
                } else {
                    accountant::strong_composition(cfg.eps_local, cfg.delta_local, rounds, cfg.composition_delta)?.0
                };
                Ok(vec![total; cfg.num_clients])
            }
        }
    }

    fn global_total(&self) -> Result<(f64, f64)> {
        if !self.config.accounts_privacy() {
            return Ok((f64::INFINITY, 1.0));
        }
        if self.released_rounds == 0 {
            return Ok((0.0, 0.0));
        }
        accountant::strong_composition(
            self.worst_eps,
            self.worst_delta,
            self.released_rounds,
            self.config.composition_delta,
        )
    }

    /// Executes the next round.
    pub fn run_round(&mut self) -> Result<RoundTrace> {
        let t = self.rounds_done;
        let participants = self.select(t);
        let released = !participants.is_empty();

        let correction = match self.config.algorithm {
            Algorithm::Split => correction_factor(&self.probs)?,
            Algorithm::DpFedAvg => 1.0,
        };

        let mut payload_dim = self.global_public.len();
        if released {
            let results = self.run_clients(&participants, t)?;
            let mut uploads = BTreeMap::new();
            for (&client, (private_block, public_block)) in participants.iter().zip(results) {
                debug_assert_eq!(private_block.len(), self.boundary);
                payload_dim = public_block.len();
                self.private_blocks[client] = private_block;
                uploads.insert(client, public_block);
            }
            self.global_public = match self.config.algorithm {
                Algorithm::Split => aggregate(&uploads, &self.probs)?,
                Algorithm::DpFedAvg => aggregate(&uploads, &[1.0])?,
            };
        }

        let (eps_round, delta_round) = self.round_charge(released);
        if released && self.config.accounts_privacy() {
            self.released_rounds += 1;
            self.worst_eps = self.worst_eps.max(eps_round);
            self.worst_delta = self.worst_delta.max(delta_round);
        }
        self.rounds_done += 1;

        let (eps_total, _) = self.global_total()?;
        let eps_local_max = self.local_totals(self.rounds_done)?.into_iter().fold(0.0, f64::max);
        let (train_loss, test_accuracy, server_accuracy) = self.evaluate()?;

        Ok(RoundTrace {
            round: self.rounds_done,
            participants,
            correction,
            global_public: self.global_public.clone(),
            payload_dim,
            eps_central_round: eps_round,
            delta_central_round: delta_round,
            eps_central_total: eps_total,
            eps_local_max,
            train_loss,
            test_accuracy,
            server_accuracy,
        })
    }

    /// Totals for the rounds run so far.
    pub fn report(&self) -> Result<TotalPrivacyReport> {
        let per_client = self.local_totals(self.rounds_done)?;
        let (global_total_eps, global_total_delta) = self.global_total()?;
        Ok(TotalPrivacyReport {
            per_client_total_eps: per_client,
            global_total_eps,
            global_total_delta,
            rounds: self.rounds_done,
            composition_delta: self.config.composition_delta,
            worst_round_eps: self.worst_eps,
            worst_round_delta: self.worst_delta,
            extrapolated: self.round_privacy.is_some_and(|r| r.extrapolated),
        })
    }
}

/// Client sizes [`data::partition`] produces for `total` training samples.
pub fn partition_sizes(total: usize, num_clients: usize) -> Vec<usize> {
    let base = total / num_clients;
    let extra = total % num_clients;
    (0..num_clients).map(|i| base + usize::from(i < extra)).collect()
}

/// Budget of a split-protocol run of `config.rounds` rounds, charging every
/// round as if at least one client released. Needs no training.
pub fn planned_budget(config: &ExperimentConfig, client_sizes: &[usize]) -> Result<TotalPrivacyReport> {
    config.validate()?;
    if config.algorithm != Algorithm::Split || !config.accounts_privacy() {
        return Err(Error::InvalidParameter(
            "a planned budget needs algorithm = split and noise = gaussian".into(),
        ));
    }
    if client_sizes.len() != config.num_clients {
        return Err(Error::DimensionMismatch {
            expected: config.num_clients,
            actual: client_sizes.len(),
        });
    }
    let probs = config.check_in_prob.expand(config.num_clients);
    let pairs = probs
        .iter()
        .zip(client_sizes)
        .map(|(&p, &size)| {
            let spec = SamplingSpec::new(p, config.subsample_mode, config.local_steps, config.batch_size, size)?;
            Ok((p, accountant::subsampling_ratio(&spec)?))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let round = accountant::central_round_privacy_with(
        &pairs,
        config.eps_local,
        config.delta_local,
        config.hoeffding_beta,
        config.allow_extrapolation,
    )?;
    let per_client = pairs
        .iter()
        .map(|&(p, q)| {
            accountant::total_local_epsilon_closed_form(q, p, config.rounds, config.eps_local, config.delta_local, config.clip)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut report = TotalPrivacyReport::compose(
        per_client,
        round.eps_central,
        round.delta_central,
        config.rounds,
        config.composition_delta,
    )?;
    report.extrapolated = round.extrapolated;
    Ok(report)
}

/// Runs `config.rounds` rounds on `samples` (test split taken inside).
pub fn run_experiment(config: &ExperimentConfig, samples: Vec<Sample>) -> Result<ExperimentResult> {
    let mut sim = Simulation::from_dataset(config.clone(), samples)?;
    let traces = (0..config.rounds).map(|_| sim.run_round()).collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        traces,
        report: sim.report()?,
    })
}
