//! The Lipschitz mechanism over `d` items and its composed baselines.
//!
//! Every item receives `epsilon / (2 * kappa * delta) * x_i + Q(U_i)` and the
//! `kappa` largest noisy scores are reported. With Gumbel noise and
//! `kappa = 1` this is the exponential mechanism; with exponential noise it
//! is permute-and-flip; Laplace noise gives report-noisy-max.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{domain, Result};
use crate::noise::NoiseKind;
use crate::rng::derive_rng;
use crate::score::ScoreVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanismParams {
    /// Privacy loss.
    pub epsilon: f64,
    /// Sensitivity of the scores fed to the mechanism.
    pub delta_loss: f64,
    /// Number of reported items.
    pub kappa: usize,
    pub noise: NoiseKind,
}

impl MechanismParams {
    pub fn new(epsilon: f64, delta_loss: f64, kappa: usize, noise: NoiseKind) -> Result<Self> {
        let p = Self { epsilon, delta_loss, kappa, noise };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return domain(format!("epsilon = {} must be positive and finite", self.epsilon));
        }
        if !(self.delta_loss > 0.0) || !self.delta_loss.is_finite() {
            return domain(format!("delta = {} must be positive and finite", self.delta_loss));
        }
        if self.kappa == 0 {
            return domain("kappa must be at least 1");
        }
        Ok(())
    }

    /// Multiplier applied to each score before noise is added.
    pub fn coefficient(&self) -> f64 {
        self.epsilon / (2.0 * self.kappa as f64 * self.delta_loss)
    }
}

/// Noisy score of one item. Larger value wins; equal values go to the
/// smaller index.
#[derive(Debug, Clone, Copy)]
struct Noisy {
    value: f64,
    index: usize,
}

impl PartialEq for Noisy {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Noisy {}

impl PartialOrd for Noisy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Noisy {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value.total_cmp(&other.value).then_with(|| other.index.cmp(&self.index))
    }
}

/// Top-`kappa` of `coef * x_i + noise` over `items`, best first.
fn noisy_top<R, I>(items: I, coef: f64, kappa: usize, noise: NoiseKind, rng: &mut R) -> Vec<usize>
where
    R: Rng + ?Sized,
    I: Iterator<Item = (usize, f64)>,
{
    if kappa == 1 {
        let mut best: Option<Noisy> = None;
        for (index, x) in items {
            let cand = Noisy { value: coef * x + noise.sample(rng), index };
            if best.is_none_or(|b| cand > b) {
                best = Some(cand);
            }
        }
        return best.map(|b| vec![b.index]).unwrap_or_default();
    }
    let mut heap: BinaryHeap<Reverse<Noisy>> = BinaryHeap::with_capacity(kappa + 1);
    for (index, x) in items {
        let cand = Noisy { value: coef * x + noise.sample(rng), index };
        if heap.len() < kappa {
            heap.push(Reverse(cand));
        } else if let Some(Reverse(worst)) = heap.peek() {
            if cand > *worst {
                heap.pop();
                heap.push(Reverse(cand));
            }
        }
    }
    heap.into_sorted_vec().into_iter().map(|Reverse(n)| n.index).collect()
}

/// Indices of the `kappa` largest noisy scores, in descending noisy order.
pub fn lipschitz_select<R: Rng + ?Sized>(
    scores: &ScoreVector,
    params: &MechanismParams,
    rng: &mut R,
) -> Result<Vec<usize>> {
    params.validate()?;
    if params.kappa > scores.len() {
        return domain(format!("kappa = {} exceeds d = {}", params.kappa, scores.len()));
    }
    let items = scores.raw().iter().copied().enumerate();
    Ok(noisy_top(items, params.coefficient(), params.kappa, params.noise, rng))
}

/// PEELING: `k` rounds of single-item selection at `epsilon / k` each,
/// removing the winner after every round. Output is in selection order.
///
/// Each round draws from its own sub-stream keyed by one value taken from
/// `rng`, so the result does not depend on how rounds are scheduled.
pub fn peel<R: Rng + ?Sized>(
    scores: &ScoreVector,
    k: usize,
    epsilon: f64,
    delta_loss: f64,
    noise: NoiseKind,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let d = scores.len();
    if k == 0 || k > d {
        return domain(format!("k = {k} must lie in 1..={d}"));
    }
    let round = MechanismParams::new(epsilon / k as f64, delta_loss, 1, noise)?;
    let coef = round.coefficient();
    let base = rng.next_u64();
    let mut remaining: Vec<usize> = (0..d).collect();
    let mut out = Vec::with_capacity(k);
    for r in 0..k {
        let mut sub = derive_rng(base, 0, r as u64);
        let raw = scores.raw();
        let winner = noisy_top(remaining.iter().map(|&i| (i, raw[i])), coef, 1, noise, &mut sub)[0];
        remaining.retain(|&i| i != winner);
        out.push(winner);
    }
    Ok(out)
}

/// ONESHOT: one noisy pass reporting the top `k` at full `epsilon`; the
/// `kappa = k` factor in the coefficient splits the budget internally.
pub fn oneshot<R: Rng + ?Sized>(
    scores: &ScoreVector,
    k: usize,
    epsilon: f64,
    delta_loss: f64,
    noise: NoiseKind,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let params = MechanismParams::new(epsilon, delta_loss, k, noise)?;
    lipschitz_select(scores, &params, rng)
}

/// Permute-and-flip by explicit rejection: visit items in uniformly random
/// order and accept item `y` with probability `exp(q_y - q_max)`, where
/// `q_y = epsilon / (2 delta) * x_y`.
pub fn permute_and_flip_ref<R: Rng + ?Sized>(
    scores: &ScoreVector,
    epsilon: f64,
    delta_loss: f64,
    rng: &mut R,
) -> Result<usize> {
    let params = MechanismParams::new(epsilon, delta_loss, 1, NoiseKind::Exponential)?;
    let coef = params.coefficient();
    let raw = scores.raw();
    let q_max = coef * scores.order_stat(1);
    let mut order: Vec<usize> = (0..raw.len()).collect();
    loop {
        order.shuffle(rng);
        for &y in &order {
            let accept = (coef * raw[y] - q_max).exp();
            if rng.gen::<f64>() < accept {
                return Ok(y);
            }
        }
    }
}

/// Symmetric sensitivity `(delta_minus + delta_plus) / 2` for scores whose
/// per-user change lies in `[-delta_minus, +delta_plus]`.
///
/// The constant shift that makes the sensitivity symmetric is the same for
/// every item, so shift-invariant mechanisms can ignore it.
pub fn effective_sensitivity(delta_minus: f64, delta_plus: f64) -> Result<f64> {
    if !(delta_minus >= 0.0 && delta_plus >= 0.0) || !delta_minus.is_finite() || !delta_plus.is_finite() {
        return domain(format!("sensitivities ({delta_minus}, {delta_plus}) must be finite and >= 0"));
    }
    if delta_minus == 0.0 && delta_plus == 0.0 {
        return domain("both sensitivities are zero: the scoring function ignores its users");
    }
    Ok((delta_minus + delta_plus) / 2.0)
}
