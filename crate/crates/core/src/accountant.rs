//! Privacy accounting for split-model federated learning with random client
//! check-in and local data subsampling.
//!
//! Everything here is a pure function of its arguments. The bounds covered:
//!
//! * amplification of a local `(ε_ℓ, δ_ℓ)` guarantee by data subsampling,
//! * Gaussian noise calibration,
//! * the single-round central guarantee of the aggregated public submodel
//!   under random check-in (with a Hoeffding tail on the participant count),
//! * total local loss via the moments accountant, both as a closed form and
//!   as a direct numerical search over the tail bound,
//! * strong composition of the per-round central guarantees.
//!
//! All arithmetic is `f64`; small-argument terms go through `expm1`/`ln_1p`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// Upper limit for the bisection in [`total_local_epsilon_oracle`].
pub const ORACLE_EPS_CEILING: f64 = 1.0e6;

/// Absolute tolerance of the bisection in [`total_local_epsilon_oracle`].
pub const ORACLE_TOLERANCE: f64 = 1.0e-9;

/// Default search horizon for the moment order λ.
pub const DEFAULT_LAMBDA_MAX: u64 = 1_000_000;

/// Mini-batch sampling regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum SubsampleMode {
    /// Without replacement.
    Wor,
    /// With replacement.
    Wr,
}

impl fmt::Display for SubsampleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SubsampleMode::Wor => "wor",
            SubsampleMode::Wr => "wr",
        })
    }
}

impl FromStr for SubsampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "wor" => Ok(SubsampleMode::Wor),
            "wr" => Ok(SubsampleMode::Wr),
            other => Err(Error::InvalidParameter(format!(
                "unknown subsample mode {other:?} (expected wor or wr)"
            ))),
        }
    }
}

/// Per-client local DP parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalPrivacySpec {
    pub eps_local: f64,
    pub delta_local: f64,
    pub clip_threshold: f64,
    /// ℓ2 sensitivity of the released public block; `2 * clip_threshold` by default.
    pub sensitivity: f64,
}

impl LocalPrivacySpec {
    pub fn new(eps_local: f64, delta_local: f64, clip_threshold: f64) -> Result<Self> {
        check_positive("eps_local", eps_local)?;
        check_open_unit("delta_local", delta_local)?;
        check_positive("clip_threshold", clip_threshold)?;
        Ok(Self {
            eps_local,
            delta_local,
            clip_threshold,
            sensitivity: 2.0 * clip_threshold,
        })
    }

    pub fn with_sensitivity(mut self, sensitivity: f64) -> Result<Self> {
        check_positive("sensitivity", sensitivity)?;
        self.sensitivity = sensitivity;
        Ok(self)
    }
}

/// Per-client sampling parameters for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingSpec {
    pub check_in_prob: f64,
    pub subsample_mode: SubsampleMode,
    pub local_steps: usize,
    pub batch_size: usize,
    pub local_dataset_size: usize,
}

impl SamplingSpec {
    pub fn new(
        check_in_prob: f64,
        subsample_mode: SubsampleMode,
        local_steps: usize,
        batch_size: usize,
        local_dataset_size: usize,
    ) -> Result<Self> {
        check_probability("check_in_prob", check_in_prob)?;
        if local_steps == 0 || batch_size == 0 || local_dataset_size == 0 {
            return Err(Error::InvalidParameter(
                "local_steps, batch_size and local_dataset_size must be positive".into(),
            ));
        }
        let spec = Self {
            check_in_prob,
            subsample_mode,
            local_steps,
            batch_size,
            local_dataset_size,
        };
        spec.check_wor_feasible()?;
        Ok(spec)
    }

    /// Total number of sample draws per round, `Q * b`.
    pub fn draws(&self) -> usize {
        self.local_steps * self.batch_size
    }

    fn check_wor_feasible(&self) -> Result<()> {
        if self.subsample_mode == SubsampleMode::Wor && self.draws() > self.local_dataset_size {
            return Err(Error::InvalidParameter(format!(
                "WOR sampling needs local_steps * batch_size <= dataset size, got {} * {} > {}",
                self.local_steps, self.batch_size, self.local_dataset_size
            )));
        }
        Ok(())
    }
}

/// Single-round central guarantee of the aggregated public submodel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CentralRoundPrivacy {
    pub eps_central: f64,
    pub delta_central: f64,
    pub hoeffding_delta: f64,
    pub hoeffding_beta: f64,
    pub num_clients: usize,
    /// Set when `eps_local > 1` was accepted through the extrapolation escape hatch.
    pub extrapolated: bool,
}

impl CentralRoundPrivacy {
    /// The guarantee of a round in which no client released anything.
    pub fn silent(beta: f64, num_clients: usize) -> Self {
        Self {
            eps_central: 0.0,
            delta_central: 0.0,
            hoeffding_delta: hoeffding_delta(beta, num_clients),
            hoeffding_beta: beta,
            num_clients,
            extrapolated: false,
        }
    }
}

/// Totals after `rounds` communication rounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalPrivacyReport {
    pub per_client_total_eps: Vec<f64>,
    pub global_total_eps: f64,
    pub global_total_delta: f64,
    pub rounds: usize,
    pub composition_delta: f64,
    pub worst_round_eps: f64,
    pub worst_round_delta: f64,
    pub extrapolated: bool,
}

impl TotalPrivacyReport {
    /// Composes the worst per-round central guarantee over `rounds` rounds.
    pub fn compose(
        per_client_total_eps: Vec<f64>,
        worst_round_eps: f64,
        worst_round_delta: f64,
        rounds: usize,
        composition_delta: f64,
    ) -> Result<Self> {
        let (global_total_eps, global_total_delta) = if rounds == 0 {
            (0.0, 0.0)
        } else {
            strong_composition(worst_round_eps, worst_round_delta, rounds, composition_delta)?
        };
        Ok(Self {
            per_client_total_eps,
            global_total_eps,
            global_total_delta,
            rounds,
            composition_delta,
            worst_round_eps,
            worst_round_delta,
            extrapolated: false,
        })
    }

    pub fn max_local_eps(&self) -> f64 {
        self.per_client_total_eps.iter().copied().fold(0.0, f64::max)
    }
}

/// One entry of the log-moment table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogMomentParams {
    pub lambda: u64,
    pub log_moment_value: f64,
}

impl LogMomentParams {
    pub fn evaluate(lambda: u64, q: f64, eps_local: f64, delta_local: f64, clip: f64) -> Result<Self> {
        Ok(Self {
            lambda,
            log_moment_value: log_moment(lambda, q, eps_local, delta_local, clip)?,
        })
    }
}

/// Effective per-round subsampling ratio `q_i`.
///
/// `Qb/|D|` without replacement, `1 - (1 - 1/|D|)^(Qb)` with replacement.
pub fn subsampling_ratio(spec: &SamplingSpec) -> Result<f64> {
    if spec.local_steps == 0 || spec.batch_size == 0 || spec.local_dataset_size == 0 {
        return Err(Error::InvalidParameter(
            "local_steps, batch_size and local_dataset_size must be positive".into(),
        ));
    }
    spec.check_wor_feasible()?;
    let draws = spec.draws() as f64;
    let size = spec.local_dataset_size as f64;
    Ok(match spec.subsample_mode {
        SubsampleMode::Wor => draws / size,
        SubsampleMode::Wr => -(draws * (-1.0 / size).ln_1p()).exp_m1(),
    })
}

/// Local guarantee after subsampling with ratio `q`: `(2 q ε_ℓ, q δ_ℓ)`.
///
/// Refuses `eps_local > 1`, where the bound is not established.
pub fn amplify_local(eps_local: f64, delta_local: f64, q: f64) -> Result<(f64, f64)> {
    amplify_local_with(eps_local, delta_local, q, false)
}

/// [`amplify_local`] with an explicit opt-in for `eps_local > 1`.
pub fn amplify_local_with(
    eps_local: f64,
    delta_local: f64,
    q: f64,
    allow_extrapolation: bool,
) -> Result<(f64, f64)> {
    check_regime(eps_local, allow_extrapolation)?;
    check_open_unit("delta_local", delta_local)?;
    check_ratio(q)?;
    Ok((2.0 * q * eps_local, q * delta_local))
}

/// Minimal Gaussian variance `2 s² ln(1.25/δ) / ε²` for `(ε, δ)`-DP.
pub fn gaussian_sigma_squared(spec: &LocalPrivacySpec) -> f64 {
    let s = spec.sensitivity;
    2.0 * s * s * (1.25 / spec.delta_local).ln() / (spec.eps_local * spec.eps_local)
}

/// Hoeffding tail `2 exp(-2 β² N)` on the participant count.
///
/// Values `>= 1` are returned as-is; the round-privacy functions reject them.
pub fn hoeffding_delta(beta: f64, num_clients: usize) -> f64 {
    2.0 * (-2.0 * beta * beta * num_clients as f64).exp()
}

/// Smallest `N` with `hoeffding_delta(beta, N) < 1`.
pub fn min_clients_for_beta(beta: f64) -> u64 {
    (std::f64::consts::LN_2 / (2.0 * beta * beta)).floor() as u64 + 1
}

/// Checks `eps_local` against the proven `ε_ℓ <= 1` regime.
///
/// Returns whether the value lies outside it (only possible when extrapolation is allowed).
pub fn check_regime(eps_local: f64, allow_extrapolation: bool) -> Result<bool> {
    if !eps_local.is_finite() || eps_local < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "eps_local must be a finite nonnegative number, got {eps_local}"
        )));
    }
    if eps_local > 1.0 {
        if allow_extrapolation {
            return Ok(true);
        }
        return Err(Error::OutOfRegime { eps: eps_local });
    }
    Ok(false)
}

/// Validated Hoeffding tail for `N` clients; errors when it is `>= 1`.
pub fn checked_hoeffding_delta(beta: f64, num_clients: usize) -> Result<f64> {
    check_positive("hoeffding_beta", beta)?;
    if num_clients == 0 {
        return Err(Error::InvalidParameter("num_clients must be at least 1".into()));
    }
    let delta_prime = hoeffding_delta(beta, num_clients);
    if delta_prime >= 1.0 {
        return Err(Error::DegenerateHoeffding {
            delta_prime,
            beta,
            num_clients,
            min_clients: min_clients_for_beta(beta),
        });
    }
    Ok(delta_prime)
}

/// One client's `(ε, δ)` contribution to the single-round central bound.
fn round_terms(p: f64, q: f64, eps_local: f64, delta_local: f64, delta_prime: f64) -> (f64, f64) {
    let scale = p / (1.0 - delta_prime);
    let eps = (scale * (2.0 * q * eps_local).exp_m1()).ln_1p();
    let delta = delta_prime + p * q * delta_local / (1.0 - delta_prime);
    (eps, delta)
}

/// Single-round central guarantee for heterogeneous check-in probabilities
/// and subsampling ratios, one `(p_i, q_i)` pair per client.
///
/// The ε and δ maxima are taken independently over the clients.
pub fn central_round_privacy(
    per_client: &[(f64, f64)],
    eps_local: f64,
    delta_local: f64,
    beta: f64,
) -> Result<CentralRoundPrivacy> {
    central_round_privacy_with(per_client, eps_local, delta_local, beta, false)
}

pub fn central_round_privacy_with(
    per_client: &[(f64, f64)],
    eps_local: f64,
    delta_local: f64,
    beta: f64,
    allow_extrapolation: bool,
) -> Result<CentralRoundPrivacy> {
    let extrapolated = check_regime(eps_local, allow_extrapolation)?;
    check_open_unit("delta_local", delta_local)?;
    let delta_prime = checked_hoeffding_delta(beta, per_client.len())?;
    let mut eps_central = f64::NEG_INFINITY;
    let mut delta_central = f64::NEG_INFINITY;
    for &(p, q) in per_client {
        check_probability("check-in probability", p)?;
        check_ratio(q)?;
        let (eps, delta) = round_terms(p, q, eps_local, delta_local, delta_prime);
        eps_central = eps_central.max(eps);
        delta_central = delta_central.max(delta);
    }
    Ok(CentralRoundPrivacy {
        eps_central,
        delta_central,
        hoeffding_delta: delta_prime,
        hoeffding_beta: beta,
        num_clients: per_client.len(),
        extrapolated,
    })
}

/// [`central_round_privacy`] when every client shares the same `p` and `q`.
pub fn central_round_privacy_uniform(
    p: f64,
    q: f64,
    eps_local: f64,
    delta_local: f64,
    beta: f64,
    num_clients: usize,
) -> Result<CentralRoundPrivacy> {
    central_round_privacy_uniform_with(p, q, eps_local, delta_local, beta, num_clients, false)
}

pub fn central_round_privacy_uniform_with(
    p: f64,
    q: f64,
    eps_local: f64,
    delta_local: f64,
    beta: f64,
    num_clients: usize,
    allow_extrapolation: bool,
) -> Result<CentralRoundPrivacy> {
    let extrapolated = check_regime(eps_local, allow_extrapolation)?;
    check_open_unit("delta_local", delta_local)?;
    check_probability("check-in probability", p)?;
    check_ratio(q)?;
    let delta_prime = checked_hoeffding_delta(beta, num_clients)?;
    let (eps_central, delta_central) = round_terms(p, q, eps_local, delta_local, delta_prime);
    Ok(CentralRoundPrivacy {
        eps_central,
        delta_central,
        hoeffding_delta: delta_prime,
        hoeffding_beta: beta,
        num_clients,
        extrapolated,
    })
}

/// λ-th log moment of one round's privacy loss, with sensitivity `2C`:
/// `q²/(1-q) · λ(λ+1) ε_ℓ² / (16 C² ln(1.25/δ_ℓ))`.
pub fn log_moment(lambda: u64, q: f64, eps_local: f64, delta_local: f64, clip: f64) -> Result<f64> {
    if lambda == 0 {
        return Err(Error::InvalidParameter("moment order lambda must be >= 1".into()));
    }
    let unit = unit_log_moment(q, eps_local, delta_local, clip)?;
    let l = lambda as f64;
    Ok(unit * l * (l + 1.0))
}

/// The λ-independent factor of [`log_moment`].
fn unit_log_moment(q: f64, eps_local: f64, delta_local: f64, clip: f64) -> Result<f64> {
    check_strict_ratio(q)?;
    check_nonnegative("eps_local", eps_local)?;
    check_open_unit("delta_local", delta_local)?;
    check_positive("clip", clip)?;
    Ok(q * q / (1.0 - q) * eps_local * eps_local
        / (16.0 * clip * clip * (1.25 / delta_local).ln()))
}

/// Total local privacy loss after `rounds` rounds, closed form:
/// `q / (2C sqrt(1-q)) · sqrt(p T ln(1/δ_ℓ) / ln(1.25/δ_ℓ)) · ε_ℓ`.
///
/// This is the lower end of the tail-bound derivation; see
/// [`total_local_epsilon_oracle`] for the value the tail bound itself gives.
pub fn total_local_epsilon_closed_form(
    q: f64,
    p: f64,
    rounds: usize,
    eps_local: f64,
    delta_local: f64,
    clip: f64,
) -> Result<f64> {
    check_strict_ratio(q)?;
    check_probability("check-in probability", p)?;
    check_nonnegative("eps_local", eps_local)?;
    check_open_unit("delta_local", delta_local)?;
    check_positive("clip", clip)?;
    let log_ratio = (1.0 / delta_local).ln() / (1.25 / delta_local).ln();
    Ok(q / (2.0 * clip * (1.0 - q).sqrt())
        * (p * rounds as f64 * log_ratio).sqrt()
        * eps_local)
}

/// How the integer minimization over λ is carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaSearch {
    /// Walk λ = 1, 2, ... until the objective stops decreasing.
    Scan,
    /// Evaluate the floor and ceiling of the real minimizer.
    Vertex,
}

/// Minimizes `a λ(λ+1) - λ ε̄` over integer `λ ∈ [1, lambda_max]`.
///
/// Returns the minimizing λ and the minimum. Requires `a > 0`.
pub fn min_tail_objective(a: f64, eps_bar: f64, lambda_max: u64, search: LambdaSearch) -> (u64, f64) {
    let objective = |lambda: u64| {
        let l = lambda as f64;
        a * l * (l + 1.0) - l * eps_bar
    };
    match search {
        LambdaSearch::Scan => {
            let mut lambda = 1;
            let mut best = objective(1);
            while lambda < lambda_max {
                let next = objective(lambda + 1);
                if next >= best {
                    break;
                }
                best = next;
                lambda += 1;
            }
            (lambda, best)
        }
        LambdaSearch::Vertex => {
            let star = ((eps_bar - a) / (2.0 * a)).clamp(1.0, lambda_max as f64);
            let lo = star.floor() as u64;
            let hi = (star.ceil() as u64).min(lambda_max);
            let (f_lo, f_hi) = (objective(lo), objective(hi));
            if f_hi < f_lo {
                (hi, f_hi)
            } else {
                (lo, f_lo)
            }
        }
    }
}

/// Total local privacy loss found numerically from the moments tail bound.
///
/// Returns the smallest `ε̄ >= 0` (to [`ORACLE_TOLERANCE`]) such that
/// `min_λ (p T L(λ) - λ ε̄) <= ln δ_ℓ` over `λ ∈ [1, lambda_max]`, where `L`
/// is [`log_moment`].
pub fn total_local_epsilon_oracle(
    q: f64,
    p: f64,
    rounds: usize,
    eps_local: f64,
    delta_local: f64,
    clip: f64,
    lambda_max: u64,
) -> Result<f64> {
    total_local_epsilon_oracle_with(
        q,
        p,
        rounds,
        eps_local,
        delta_local,
        clip,
        lambda_max,
        LambdaSearch::Vertex,
    )
}

#[allow(clippy::too_many_arguments)]
pub fn total_local_epsilon_oracle_with(
    q: f64,
    p: f64,
    rounds: usize,
    eps_local: f64,
    delta_local: f64,
    clip: f64,
    lambda_max: u64,
    search: LambdaSearch,
) -> Result<f64> {
    check_probability("check-in probability", p)?;
    if lambda_max == 0 {
        return Err(Error::InvalidParameter("lambda_max must be >= 1".into()));
    }
    // Total log moment is p T L(λ) = a λ(λ+1).
    let a = p * rounds as f64 * unit_log_moment(q, eps_local, delta_local, clip)?;
    if a == 0.0 {
        return Ok(0.0);
    }
    let target = delta_local.ln();
    let feasible = |eps_bar: f64| min_tail_objective(a, eps_bar, lambda_max, search).1 <= target;

    let mut lo = 0.0;
    let mut hi = 1.0;
    while !feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > ORACLE_EPS_CEILING {
            return Err(Error::SearchFailure {
                ceiling: ORACLE_EPS_CEILING,
            });
        }
    }
    while hi - lo > ORACLE_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Strong composition of `rounds` mechanisms, each `(worst_eps, worst_delta)`-DP:
/// `(sqrt(2T ln(1/δ̃)) ε' + T ε' (e^ε' - 1), T δ' + δ̃)`.
pub fn strong_composition(
    worst_eps: f64,
    worst_delta: f64,
    rounds: usize,
    tilde_delta: f64,
) -> Result<(f64, f64)> {
    check_nonnegative("worst_eps", worst_eps)?;
    check_nonnegative("worst_delta", worst_delta)?;
    if rounds == 0 {
        return Err(Error::InvalidParameter("rounds must be >= 1".into()));
    }
    if !(tilde_delta > 0.0 && tilde_delta <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "composition delta must lie in (0, 1], got {tilde_delta}"
        )));
    }
    let t = rounds as f64;
    let eps = (2.0 * t * (1.0 / tilde_delta).ln()).sqrt() * worst_eps + t * worst_eps * worst_eps.exp_m1();
    Ok((eps, t * worst_delta + tilde_delta))
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")))
    }
}

fn check_nonnegative(name: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {value}")))
    }
}

fn check_open_unit(name: &str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {value}")))
    }
}

fn check_probability(name: &str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {value}")))
    }
}

fn check_ratio(q: f64) -> Result<()> {
    if q > 0.0 && q <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "subsampling ratio must lie in (0, 1], got {q}"
        )))
    }
}

fn check_strict_ratio(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::DegenerateRatio(q))
    }
}
