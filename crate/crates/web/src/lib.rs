//! Browser bindings for the privacy accountant.
//!
//! Every exported function returns one curve as a `Float64Array`.

use fedsplit::accountant::{self, SamplingSpec, SubsampleMode};
use wasm_bindgen::prelude::*;

/// Evenly spaced grid from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 || lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(format!("need points >= 2 and lo < hi, got {points} points on [{lo}, {hi}]"));
    }
    Ok((0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect())
}

/// Subsampling ratio for `mode` ("wor" or "wr").
pub fn ratio(mode: &str, local_steps: usize, batch_size: usize, dataset_size: usize) -> Result<f64, String> {
    let mode: SubsampleMode = mode.parse().map_err(|e: fedsplit::Error| e.to_string())?;
    let spec = SamplingSpec::new(1.0, mode, local_steps, batch_size, dataset_size).map_err(|e| e.to_string())?;
    accountant::subsampling_ratio(&spec).map_err(|e| e.to_string())
}

/// Per-round central ε over `eps_grid`, uniform `p` and `q`.
pub fn round_eps_curve(
    p: f64,
    q: f64,
    eps_grid: &[f64],
    delta_local: f64,
    beta: f64,
    num_clients: usize,
) -> Result<Vec<f64>, String> {
    eps_grid
        .iter()
        .map(|&eps| {
            accountant::central_round_privacy_uniform_with(p, q, eps, delta_local, beta, num_clients, true)
                .map(|r| r.eps_central)
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// Global-model total ε after `T = 1..=max_rounds` rounds.
#[allow(clippy::too_many_arguments)]
pub fn global_total_curve(
    p: f64,
    q: f64,
    eps_local: f64,
    delta_local: f64,
    beta: f64,
    num_clients: usize,
    max_rounds: usize,
    composition_delta: f64,
) -> Result<Vec<f64>, String> {
    let round = accountant::central_round_privacy_uniform_with(p, q, eps_local, delta_local, beta, num_clients, true)
        .map_err(|e| e.to_string())?;
    (1..=max_rounds)
        .map(|t| {
            accountant::strong_composition(round.eps_central, round.delta_central, t, composition_delta)
                .map(|(eps, _)| eps)
                .map_err(|e| e.to_string())
        })
        .collect()
}

/// One client's total ε after `T = 1..=max_rounds` rounds, closed form or numerical.
pub fn local_total_curve(
    q: f64,
    p: f64,
    max_rounds: usize,
    eps_local: f64,
    delta_local: f64,
    clip: f64,
    numerical: bool,
) -> Result<Vec<f64>, String> {
    (1..=max_rounds)
        .map(|t| {
            if numerical {
                accountant::total_local_epsilon_oracle(q, p, t, eps_local, delta_local, clip, accountant::DEFAULT_LAMBDA_MAX)
            } else {
                accountant::total_local_epsilon_closed_form(q, p, t, eps_local, delta_local, clip)
            }
            .map_err(|e| e.to_string())
        })
        .collect()
}

fn js(r: Result<Vec<f64>, String>) -> Result<Vec<f64>, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = subsamplingRatio)]
pub fn subsampling_ratio_js(mode: &str, local_steps: usize, batch_size: usize, dataset_size: usize) -> Result<f64, JsError> {
    ratio(mode, local_steps, batch_size, dataset_size).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = roundEpsCurve)]
#[allow(clippy::too_many_arguments)]
pub fn round_eps_curve_js(
    p: f64,
    q: f64,
    eps_min: f64,
    eps_max: f64,
    points: usize,
    delta_local: f64,
    beta: f64,
    num_clients: usize,
) -> Result<Vec<f64>, JsError> {
    js(linspace(eps_min, eps_max, points)
        .and_then(|grid| round_eps_curve(p, q, &grid, delta_local, beta, num_clients)))
}

#[wasm_bindgen(js_name = globalTotalCurve)]
#[allow(clippy::too_many_arguments)]
pub fn global_total_curve_js(
    p: f64,
    q: f64,
    eps_local: f64,
    delta_local: f64,
    beta: f64,
    num_clients: usize,
    max_rounds: usize,
    composition_delta: f64,
) -> Result<Vec<f64>, JsError> {
    js(global_total_curve(
        p,
        q,
        eps_local,
        delta_local,
        beta,
        num_clients,
        max_rounds,
        composition_delta,
    ))
}

#[wasm_bindgen(js_name = localTotalCurve)]
pub fn local_total_curve_js(
    q: f64,
    p: f64,
    max_rounds: usize,
    eps_local: f64,
    delta_local: f64,
    clip: f64,
    numerical: bool,
) -> Result<Vec<f64>, JsError> {
    js(local_total_curve(q, p, max_rounds, eps_local, delta_local, clip, numerical))
}
