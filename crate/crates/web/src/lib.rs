//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes Zipf parameters `(d, s, scale)` for the data and
//! returns a JSON string. The `*_json` functions hold the logic so that it
//! can be tested natively.

use dptopk::analysis::{predicate_probability, Predicate, PredicateKind};
use dptopk::canonical::{canonical_select, exact_class_distribution};
use dptopk::harness::{gen_zipf, Mechanism, Runner};
use dptopk::noise::NoiseKind;
use dptopk::rng::seeded;
use dptopk::{Error, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn curve(scores: &dptopk::ScoreVector, k: usize, gamma: f64, epsilons: &[f64]) -> Result<Value> {
    let mut ys = vec![Vec::with_capacity(epsilons.len()); PredicateKind::ALL.len()];
    for &eps in epsilons {
        let dist = exact_class_distribution(scores, k, eps, gamma)?;
        for (y, kind) in ys.iter_mut().zip(PredicateKind::ALL) {
            y.push(predicate_probability(&dist, Predicate::new(kind, k))?);
        }
    }
    let out = PredicateKind::ALL.iter().zip(ys).map(|(kind, y)| (kind.name().to_string(), json!(y)));
    Ok(Value::Object(out.collect()))
}

/// Exact TOP/GREAT/GOOD probabilities on a log-spaced grid of `steps` budgets
/// in `[eps_lo, eps_hi]`, for the chosen `gamma` and for `gamma = 1`.
#[allow(clippy::too_many_arguments)]
pub fn predicate_curves_json(
    d: usize,
    s: f64,
    scale: f64,
    k: usize,
    gamma: f64,
    eps_lo: f64,
    eps_hi: f64,
    steps: usize,
) -> Result<String> {
    if !(eps_lo > 0.0 && eps_hi >= eps_lo && eps_hi.is_finite()) || steps < 2 {
        return Err(Error::Domain("need 0 < eps_lo <= eps_hi and steps >= 2".into()));
    }
    let scores = gen_zipf(d, s, scale)?;
    let ratio = (eps_hi / eps_lo).ln() / (steps - 1) as f64;
    let epsilons: Vec<f64> = (0..steps).map(|i| eps_lo * (ratio * i as f64).exp()).collect();
    let out = json!({
        "epsilon": epsilons,
        "canonical": curve(&scores, k, gamma, &epsilons)?,
        "canonical_g1": curve(&scores, k, 1.0, &epsilons)?,
    });
    Ok(out.to_string())
}

/// One draw from `mechanism` with its default noise; indices are 1-based.
#[allow(clippy::too_many_arguments)]
pub fn sample_selection_json(
    d: usize,
    s: f64,
    scale: f64,
    k: usize,
    epsilon: f64,
    gamma: f64,
    mechanism: &str,
    seed: u64,
) -> Result<String> {
    let mechanism: Mechanism = mechanism.parse()?;
    let scores = gen_zipf(d, s, scale)?;
    let mut rng = seeded(seed);
    let noise = mechanism.default_noise();
    let runner = Runner { mechanism, k, epsilon, gamma, noise };
    let mut subset = if mechanism.is_canonical() {
        canonical_select(&scores, k, epsilon, runner.effective_gamma(), NoiseKind::Gumbel, &mut rng)?.subset
    } else {
        runner.run(&scores, &mut rng)?
    };
    subset.sort_unstable();
    let ranks: Vec<usize> = subset.iter().map(|&i| scores.rank_of(i)).collect();
    let indices: Vec<usize> = subset.iter().map(|i| i + 1).collect();
    Ok(json!({ "mechanism": mechanism.name(), "indices": indices, "ranks": ranks }).to_string())
}

/// Probability that the worst selected item has rank `t`, for `t = k..=d`.
pub fn tail_marginal_json(d: usize, s: f64, scale: f64, k: usize, epsilon: f64, gamma: f64) -> Result<String> {
    let scores = gen_zipf(d, s, scale)?;
    let dist = exact_class_distribution(&scores, k, epsilon, gamma)?;
    let probs: Vec<f64> = dist.tail_log_marginal().into_iter().map(f64::exp).collect();
    Ok(json!({ "t0": k, "probability": probs }).to_string())
}

fn js(r: Result<String>) -> std::result::Result<String, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn predicate_curves(
    d: usize,
    s: f64,
    scale: f64,
    k: usize,
    gamma: f64,
    eps_lo: f64,
    eps_hi: f64,
    steps: usize,
) -> std::result::Result<String, JsError> {
    js(predicate_curves_json(d, s, scale, k, gamma, eps_lo, eps_hi, steps))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn sample_selection(
    d: usize,
    s: f64,
    scale: f64,
    k: usize,
    epsilon: f64,
    gamma: f64,
    mechanism: &str,
    seed: u64,
) -> std::result::Result<String, JsError> {
    js(sample_selection_json(d, s, scale, k, epsilon, gamma, mechanism, seed))
}

#[wasm_bindgen]
pub fn tail_marginal(
    d: usize,
    s: f64,
    scale: f64,
    k: usize,
    epsilon: f64,
    gamma: f64,
) -> std::result::Result<String, JsError> {
    js(tail_marginal_json(d, s, scale, k, epsilon, gamma))
}
