//! Oracles and diagnostics: subset classification, brute-force enumeration,
//! utility predicates, Monte Carlo estimation, privacy audits and the
//! analytic utility bounds.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::canonical::{class_loss, class_of_sorted_ranks, exact_class_distribution, ClassDistribution, UtilityClass};
use crate::combin::{binomial_exact, ln_binomial, LogSumExp};
use crate::error::{domain, Error, Result};
use crate::rng::{derive_rng, StreamRng};
use crate::score::ScoreVector;

/// Largest number of subsets the brute-force oracles will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PredicateKind {
    Top,
    Great,
    Good,
}

impl PredicateKind {
    pub const ALL: [PredicateKind; 3] = [PredicateKind::Top, PredicateKind::Great, PredicateKind::Good];

    pub fn name(self) -> &'static str {
        match self {
            PredicateKind::Top => "TOP",
            PredicateKind::Great => "GREAT",
            PredicateKind::Good => "GOOD",
        }
    }
}

impl fmt::Display for PredicateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PredicateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "TOP" => Ok(PredicateKind::Top),
            "GREAT" => Ok(PredicateKind::Great),
            "GOOD" => Ok(PredicateKind::Good),
            _ => domain(format!("unknown predicate '{s}' (expected TOP, GREAT or GOOD)")),
        }
    }
}

/// How close a selected class is to the true top-`k`.
///
/// `GREAT` keeps the top `ceil(k/10)` items and nothing outside the top
/// `floor(11k/10)`; `GOOD` keeps the top `ceil(k/100)` and stays within the
/// top `floor(3k/2)`. The exact top-`k` satisfies all three.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Predicate {
    pub kind: PredicateKind,
    pub k: usize,
}

impl Predicate {
    pub fn new(kind: PredicateKind, k: usize) -> Self {
        Self { kind, k }
    }

    pub fn holds(&self, h: usize, t: usize) -> bool {
        let k = self.k;
        if h + 1 == k && t == k {
            return true;
        }
        match self.kind {
            PredicateKind::Top => false,
            PredicateKind::Great => h >= k.div_ceil(10) && t <= 11 * k / 10,
            PredicateKind::Good => h >= k.div_ceil(100) && t <= 3 * k / 2,
        }
    }

    pub fn holds_for(&self, cls: &UtilityClass) -> bool {
        self.holds(cls.h, cls.t)
    }
}

fn sorted_ranks(subset: &[usize], scores: &ScoreVector) -> Result<Vec<usize>> {
    let d = scores.len();
    if subset.is_empty() {
        return domain("subset is empty");
    }
    if let Some(&i) = subset.iter().find(|&&i| i >= d) {
        return domain(format!("item {i} out of range for d = {d}"));
    }
    let mut ranks: Vec<usize> = subset.iter().map(|&i| scores.rank_of(i)).collect();
    ranks.sort_unstable();
    if ranks.windows(2).any(|w| w[0] == w[1]) {
        return domain("subset contains duplicate items");
    }
    Ok(ranks)
}

/// Utility class `(h, t)` of a subset of 0-based item indices; `k` is the
/// subset size.
pub fn classify_subset(subset: &[usize], scores: &ScoreVector) -> Result<UtilityClass> {
    let ranks = sorted_ranks(subset, scores)?;
    let (h, t) = class_of_sorted_ranks(&ranks);
    UtilityClass::new(h, t, ranks.len())
}

/// As [`classify_subset`], also checking the subset size against `k`.
pub fn classify_subset_k(subset: &[usize], k: usize, scores: &ScoreVector) -> Result<UtilityClass> {
    if subset.len() != k {
        return domain(format!("subset has {} items, expected k = {k}", subset.len()));
    }
    classify_subset(subset, scores)
}

/// Canonical mechanism probabilities obtained by enumerating every subset.
#[derive(Debug, Clone)]
pub struct BruteForce {
    /// Every `k`-subset (ascending item indices) with its log-probability.
    pub subsets: Vec<(Vec<usize>, f64)>,
    /// Log-probability mass per class `(h, t)`.
    pub classes: BTreeMap<(usize, usize), f64>,
}

impl BruteForce {
    pub fn class_prob(&self, h: usize, t: usize) -> f64 {
        self.classes.get(&(h, t)).map_or(0.0, |lp| lp.exp())
    }
}

fn check_enumerable(d: usize, k: usize) -> Result<()> {
    match binomial_exact(d as u64, k as u64) {
        Some(n) if n <= u128::from(BRUTE_FORCE_LIMIT) => Ok(()),
        _ => Err(Error::TooLarge { d, k, limit: BRUTE_FORCE_LIMIT }),
    }
}

/// Weights each `k`-subset by `exp(-(epsilon / 2) loss)` and normalizes.
pub fn brute_force_distribution(scores: &ScoreVector, k: usize, epsilon: f64, gamma: f64) -> Result<BruteForce> {
    let d = scores.len();
    if k == 0 || k >= d {
        return domain(format!("k = {k} must lie in 1..={}", d.saturating_sub(1)));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return domain(format!("epsilon = {epsilon} must be positive and finite"));
    }
    check_enumerable(d, k)?;
    let mut subsets = Vec::new();
    let mut keys = Vec::new();
    let mut acc = LogSumExp::default();
    for subset in (0..d).combinations(k) {
        let cls = classify_subset(&subset, scores)?;
        let w = -0.5 * epsilon * class_loss(cls.h, cls.t, gamma, scores)?;
        acc.push(w);
        keys.push((cls.h, cls.t));
        subsets.push((subset, w));
    }
    let z = acc.value();
    let mut per_class: BTreeMap<(usize, usize), LogSumExp> = BTreeMap::new();
    for ((_, w), key) in subsets.iter_mut().zip(keys) {
        *w -= z;
        per_class.entry(key).or_default().push(*w);
    }
    let classes = per_class.into_iter().map(|(key, a)| (key, a.value())).collect();
    Ok(BruteForce { subsets, classes })
}

/// Smallest `L∞` distance from `scores` to a vector under which `subset` is a
/// top-`k` set, computed from the gap between the best excluded and the
/// worst included score. The distance is confirmed with an explicit witness.
pub fn canonical_loss_oracle(subset: &[usize], scores: &ScoreVector) -> Result<f64> {
    sorted_ranks(subset, scores)?;
    let raw = scores.raw();
    let mut inside = vec![false; raw.len()];
    for &i in subset {
        inside[i] = true;
    }
    let min_in = subset.iter().map(|&i| raw[i]).fold(f64::INFINITY, f64::min);
    let max_out = (0..raw.len()).filter(|&i| !inside[i]).map(|i| raw[i]).fold(f64::NEG_INFINITY, f64::max);
    let gap = (max_out - min_in).max(0.0);
    let half = gap / 2.0;

    let witness: Vec<f64> = raw.iter().zip(&inside).map(|(&x, &a)| if a { x + half } else { x - half }).collect();
    let w_min_in = subset.iter().map(|&i| witness[i]).fold(f64::INFINITY, f64::min);
    let w_max_out = (0..raw.len()).filter(|&i| !inside[i]).map(|i| witness[i]).fold(f64::NEG_INFINITY, f64::max);
    let scale = raw.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    if w_max_out - w_min_in > 4.0 * f64::EPSILON * scale {
        return Err(Error::Internal(format!(
            "witness leaves subset {subset:?} below an excluded item ({w_min_in} < {w_max_out})"
        )));
    }
    Ok(half)
}

/// Loss of the joint exponential mechanism: `max_l (x(l) - y(l)) / 2` where
/// `y(1) >= ... >= y(k)` are the subset's own scores.
pub fn joint_loss(subset: &[usize], scores: &ScoreVector) -> Result<f64> {
    sorted_ranks(subset, scores)?;
    let mut ys: Vec<f64> = subset.iter().map(|&i| scores.raw()[i]).collect();
    ys.sort_by(|a, b| b.total_cmp(a));
    Ok(ys
        .iter()
        .zip(scores.sorted())
        .map(|(y, x)| (x - y) / 2.0)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Total probability of the classes satisfying `pred`.
pub fn predicate_probability(dist: &ClassDistribution, pred: Predicate) -> Result<f64> {
    if pred.k != dist.k() {
        return domain(format!("predicate for k = {} applied to a distribution with k = {}", pred.k, dist.k()));
    }
    let mut acc = LogSumExp::default();
    dist.for_each(|h, t, lp| {
        if pred.holds(h, t) {
            acc.push(lp);
        }
    });
    Ok(acc.value().exp().min(1.0))
}

/// Frequency of an event over Monte Carlo trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub p_hat: f64,
    pub std_err: f64,
    pub trials: u64,
}

impl McEstimate {
    pub fn from_count(hits: u64, trials: u64) -> Self {
        let p_hat = hits as f64 / trials as f64;
        let std_err = (p_hat * (1.0 - p_hat) / trials as f64).sqrt();
        Self { p_hat, std_err, trials }
    }
}

const BLOCK: u64 = 1 << 12;

fn tally_block<K, F>(block: u64, trials: u64, master: u64, f: &F) -> Result<BTreeMap<K, u64>>
where
    K: Ord,
    F: Fn(&mut StreamRng) -> Result<K>,
{
    let mut counts = BTreeMap::new();
    for trial in block * BLOCK..((block + 1) * BLOCK).min(trials) {
        let mut rng = derive_rng(master, trial, 0);
        *counts.entry(f(&mut rng)?).or_insert(0) += 1;
    }
    Ok(counts)
}

fn merge<K: Ord>(mut a: BTreeMap<K, u64>, b: BTreeMap<K, u64>) -> BTreeMap<K, u64> {
    for (key, n) in b {
        *a.entry(key).or_insert(0) += n;
    }
    a
}

/// Runs `f` once per trial, each with its own stream `derive_rng(master,
/// trial, 0)`, and counts the outcomes. The result does not depend on how
/// trials are scheduled across threads.
pub fn tally<K, F>(trials: u64, master: u64, f: F) -> Result<BTreeMap<K, u64>>
where
    K: Ord + Send,
    F: Fn(&mut StreamRng) -> Result<K> + Sync,
{
    let blocks = trials.div_ceil(BLOCK);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..blocks)
            .into_par_iter()
            .map(|b| tally_block(b, trials, master, &f))
            .try_reduce(BTreeMap::new, |a, b| Ok(merge(a, b)))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut acc = BTreeMap::new();
        for b in 0..blocks {
            acc = merge(acc, tally_block(b, trials, master, &f)?);
        }
        Ok(acc)
    }
}

/// Estimates the probability of every predicate in `preds` at once.
///
/// `mechanism` returns a selected subset (0-based item indices) for the
/// given per-trial stream.
pub fn mc_estimate_many<R, F>(
    mechanism: F,
    scores: &ScoreVector,
    preds: &[Predicate],
    trials: u64,
    rng: &mut R,
) -> Result<Vec<McEstimate>>
where
    R: RngCore + ?Sized,
    F: Fn(&mut StreamRng) -> Result<Vec<usize>> + Sync,
{
    if trials == 0 {
        return domain("trials must be at least 1");
    }
    if preds.len() > 32 {
        return domain("at most 32 predicates per estimate");
    }
    let master = rng.next_u64();
    let counts = tally(trials, master, |r| {
        let cls = classify_subset(&mechanism(r)?, scores)?;
        let mut mask = 0u32;
        for (i, p) in preds.iter().enumerate() {
            if p.holds_for(&cls) {
                mask |= 1 << i;
            }
        }
        Ok(mask)
    })?;
    Ok((0..preds.len())
        .map(|i| {
            let hits = counts.iter().filter(|(m, _)| *m & (1 << i) != 0).map(|(_, n)| n).sum();
            McEstimate::from_count(hits, trials)
        })
        .collect())
}

/// Monte Carlo frequency of `pred` over `trials` runs of `mechanism`.
pub fn mc_estimate<R, F>(
    mechanism: F,
    scores: &ScoreVector,
    pred: Predicate,
    trials: u64,
    rng: &mut R,
) -> Result<McEstimate>
where
    R: RngCore + ?Sized,
    F: Fn(&mut StreamRng) -> Result<Vec<usize>> + Sync,
{
    Ok(mc_estimate_many(mechanism, scores, &[pred], trials, rng)?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Canonical,
    Peeling,
}

/// `Exact` evaluates the slack terms exactly; `Loose` uses their closed
/// upper bounds (`k` for `log c(d, k)`, `6/100` for `log r(alpha, k)`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMode {
    Exact,
    Loose,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub d: usize,
    pub k: usize,
    /// Failure rate.
    pub alpha: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub delta_loss: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k >= self.d {
            return domain(format!("need 1 <= k < d, got k = {}, d = {}", self.k, self.d));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.1) {
            return domain(format!("alpha = {} outside (0, 0.1]", self.alpha));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return domain(format!("epsilon = {} must be positive", self.epsilon));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return domain(format!("gamma = {} outside (0, 1]", self.gamma));
        }
        if !(self.delta_loss > 0.0) || !self.delta_loss.is_finite() {
            return domain(format!("delta = {} must be positive", self.delta_loss));
        }
        Ok(())
    }
}

/// `log c(d, k) = log C(d, k) - k log(d / k)`.
pub fn log_c(d: usize, k: usize) -> f64 {
    ln_binomial(d as u64, k as u64) - k as f64 * (d as f64 / k as f64).ln()
}

/// Ratio between the Šidák and Bonferroni corrections,
/// `(1 - (1 - alpha)^(1/k)) / (alpha / k)`.
pub fn r_alpha_k(alpha: f64, k: usize) -> f64 {
    let k = k as f64;
    -((-alpha).ln_1p() / k).exp_m1() / (alpha / k)
}

/// The bracketed term `E` (canonical) or `E'` (peeling) of the bound.
pub fn bound_term(inputs: &BoundInputs, which: BoundKind, mode: BoundMode) -> Result<f64> {
    inputs.validate()?;
    let (d, k) = (inputs.d as f64, inputs.k as f64);
    let log_inv_alpha = -inputs.alpha.ln();
    Ok(match which {
        BoundKind::Canonical => {
            let slack = match mode {
                BoundMode::Exact => log_c(inputs.d, inputs.k),
                BoundMode::Loose => k,
            };
            k * (d / k).ln() + log_inv_alpha + slack
        }
        BoundKind::Peeling => {
            let slack = match mode {
                BoundMode::Exact => r_alpha_k(inputs.alpha, inputs.k).ln(),
                BoundMode::Loose => 0.06,
            };
            k * (d * k).ln() + k * log_inv_alpha - k * slack
        }
    })
}

/// Score gap below `x(k)` that the worst selected item stays within with
/// probability `1 - alpha`: `(2 delta / (gamma epsilon)) E` for the canonical
/// mechanism and `(2 delta / epsilon) E'` for PEELING.
pub fn utility_bound(inputs: &BoundInputs, which: BoundKind, mode: BoundMode) -> Result<f64> {
    let e = bound_term(inputs, which, mode)?;
    let scale = match which {
        BoundKind::Canonical => 2.0 * inputs.delta_loss / (inputs.gamma * inputs.epsilon),
        BoundKind::Peeling => 2.0 * inputs.delta_loss / inputs.epsilon,
    };
    Ok(scale * e)
}

/// Expected leaps `(E[X], E[X'])` of the canonical mechanism and PEELING:
/// `E[X] = (k log(d/k) + log c(d, k)) / gamma` and
/// `E[X'] = k log((d - 1 - k) k)`.
pub fn leap_expectations(d: usize, k: usize, gamma: f64) -> Result<(f64, f64)> {
    if k == 0 || k + 1 >= d {
        return domain(format!("need 1 <= k < d - 1, got k = {k}, d = {d}"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return domain(format!("gamma = {gamma} outside (0, 1]"));
    }
    let kf = k as f64;
    let e_x = (kf * (d as f64 / kf).ln() + log_c(d, k)) / gamma;
    let e_xp = kf * (((d - 1 - k) * k) as f64).ln();
    Ok((e_x, e_xp))
}

/// The four deterministic extreme neighbours: all `+1`, all `-1`, `+1` on
/// the true top-`k` and `-1` elsewhere, and its negation.
pub fn extreme_neighbors(scores: &ScoreVector, k: usize) -> Vec<Vec<f64>> {
    let d = scores.len();
    let mut top = vec![-1.0; d];
    for r in 1..=k.min(d) {
        top[scores.item_at_rank(r)] = 1.0;
    }
    let bottom: Vec<f64> = top.iter().map(|x| -x).collect();
    vec![vec![1.0; d], vec![-1.0; d], top, bottom]
}

/// A random perturbation with `|delta_i| <= 1`: random signs when `signs` is
/// set, uniform on `[-1, 1]` otherwise.
pub fn random_neighbor<R: Rng + ?Sized>(d: usize, signs: bool, rng: &mut R) -> Vec<f64> {
    (0..d)
        .map(|_| if signs { if rng.gen::<bool>() { 1.0 } else { -1.0 } } else { rng.gen_range(-1.0..=1.0) })
        .collect()
}

fn subset_log_probs(scores: &ScoreVector, k: usize, epsilon: f64, gamma: f64) -> Result<Vec<f64>> {
    let dist = exact_class_distribution(scores, k, epsilon, gamma)?;
    let mut out = Vec::new();
    for subset in (0..scores.len()).combinations(k) {
        let cls = classify_subset(&subset, scores)?;
        out.push(dist.log_prob(cls.h, cls.t)? - cls.log_size);
    }
    Ok(out)
}

/// Largest `|log P_x(y) - log P_x'(y)|` over all `k`-subsets `y`, for the
/// Gumbel canonical mechanism on `scores` and `scores + delta`.
pub fn exact_log_ratio(scores: &ScoreVector, delta: &[f64], k: usize, epsilon: f64, gamma: f64) -> Result<f64> {
    check_enumerable(scores.len(), k)?;
    let a = subset_log_probs(scores, k, epsilon, gamma)?;
    let b = subset_log_probs(&scores.perturbed(delta)?, k, epsilon, gamma)?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

/// Exact privacy audit of the Gumbel canonical mechanism.
///
/// Compares per-subset probabilities against `n_neighbors` random
/// neighbours (half with random signs, half uniform) plus the four
/// [`extreme_neighbors`]; returns the largest absolute log ratio seen.
pub fn dp_audit_exact<R: Rng + ?Sized>(
    scores: &ScoreVector,
    k: usize,
    epsilon: f64,
    gamma: f64,
    n_neighbors: usize,
    rng: &mut R,
) -> Result<f64> {
    let d = scores.len();
    let mut worst = 0.0f64;
    let neighbors = extreme_neighbors(scores, k)
        .into_iter()
        .chain((0..n_neighbors).map(|i| random_neighbor(d, i % 2 == 0, rng)))
        .collect::<Vec<_>>();
    for delta in &neighbors {
        worst = worst.max(exact_log_ratio(scores, delta, k, epsilon, gamma)?);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn ten() -> ScoreVector {
        ScoreVector::new((1..=10).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn worked_example_losses() {
        let s = ten();
        // items holding scores 10, 5 and 1
        let y = [9, 4, 0];
        let cls = classify_subset(&y, &s).unwrap();
        assert_eq!((cls.h, cls.t), (1, 10));
        assert_eq!(canonical_loss_oracle(&y, &s).unwrap(), 4.0);
        assert_eq!(joint_loss(&y, &s).unwrap(), 3.5);
        assert_eq!(class_loss(1, 10, 0.5, &s).unwrap(), 4.0);
    }

    #[test]
    fn classify_simple_cases() {
        let s = ten();
        assert_eq!(classify_subset(&[9, 8, 7], &s).unwrap(), UtilityClass::top(3));
        let c = classify_subset(&[8, 7, 6], &s).unwrap();
        assert_eq!((c.h, c.t), (0, 4));
        assert!(classify_subset(&[1, 1], &s).is_err());
        assert!(classify_subset(&[10], &s).is_err());
        assert!(classify_subset_k(&[1, 2], 3, &s).is_err());
    }

    #[test]
    fn predicates_nest() {
        for k in 1..40 {
            let (top, great, good) = (
                Predicate::new(PredicateKind::Top, k),
                Predicate::new(PredicateKind::Great, k),
                Predicate::new(PredicateKind::Good, k),
            );
            crate::canonical::for_each_class_log_size(3 * k + 2, k, |h, t, _| {
                assert!(!top.holds(h, t) || great.holds(h, t));
                assert!(!great.holds(h, t) || good.holds(h, t));
            });
        }
        let g = Predicate::new(PredicateKind::Great, 20);
        assert!(g.holds(2, 22));
        assert!(!g.holds(1, 22));
        assert!(!g.holds(2, 23));
    }

    #[test]
    fn brute_force_is_uniform_for_equal_scores() {
        let s = ScoreVector::new(vec![1.0; 6]).unwrap();
        let bf = brute_force_distribution(&s, 3, 1.0, 0.5).unwrap();
        assert_eq!(bf.subsets.len(), 20);
        for (_, lp) in &bf.subsets {
            assert!((lp.exp() - 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_refuses_large_domains() {
        let s = ScoreVector::new((0..60).map(f64::from).collect()).unwrap();
        assert!(matches!(brute_force_distribution(&s, 30, 1.0, 0.5), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn r_alpha_k_is_small() {
        for k in [1, 2, 10, 1000, 10_000] {
            for alpha in [1e-6, 0.01, 0.05, 0.1] {
                let r = r_alpha_k(alpha, k);
                assert!(r >= 1.0 - 1e-12 && r < 1.06, "r({alpha}, {k}) = {r}");
            }
        }
        assert!((r_alpha_k(0.1, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bound_inputs_validate() {
        let mut b = BoundInputs { d: 100, k: 5, alpha: 0.1, epsilon: 1.0, gamma: 1.0, delta_loss: 1.0 };
        assert!(utility_bound(&b, BoundKind::Canonical, BoundMode::Exact).is_ok());
        b.alpha = 1.0;
        assert!(utility_bound(&b, BoundKind::Canonical, BoundMode::Exact).is_err());
    }

    #[test]
    fn leap_gamma_scaling() {
        let (a, _) = leap_expectations(40, 20, 1.0).unwrap();
        let (b, _) = leap_expectations(40, 20, 0.5).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-12 * a);
        assert!(leap_expectations(5, 4, 1.0).is_err());
    }

    #[test]
    fn audit_of_trivial_neighbours_is_zero() {
        let s = ScoreVector::new(vec![0.3, 2.0, 1.1, -0.4, 0.9]).unwrap();
        assert!(exact_log_ratio(&s, &[0.0; 5], 2, 1.0, 0.5).unwrap() < 1e-12);
        assert!(exact_log_ratio(&s, &[0.7; 5], 2, 1.0, 0.5).unwrap() < 1e-12);
        let worst = dp_audit_exact(&s, 2, 1.0, 0.5, 10, &mut seeded(1)).unwrap();
        assert!(worst <= 1.0 + 1e-9);
    }

    #[test]
    fn tally_is_reproducible() {
        let f = |r: &mut StreamRng| Ok(r.gen_range(0..5u32));
        let a = tally(10_000, 3, f).unwrap();
        let b = tally(10_000, 3, f).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.values().sum::<u64>(), 10_000);
    }
}
