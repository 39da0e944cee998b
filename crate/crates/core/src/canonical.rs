//! The canonical Lipschitz mechanism: direct selection of a `k`-subset.
//!
//! All `C(d, k)` subsets are partitioned into utility classes `C(h, t)`:
//! subsets that contain the top-`h` items, miss the item ranked `h + 1`, and
//! whose worst member has rank `t`. Every member of a class has the same loss
//!
//! ```text
//! loss(h, t) = (1 - gamma) * x(h+1) - gamma * x(t)
//! ```
//!
//! so the mechanism only needs one group-maximum noise term per class. There
//! are `1 + k (d - k)` classes, giving an `O(dk)` sampler; for `gamma = 1`
//! the loss only depends on `t` and the sampler runs in `O(d)`.
//!
//! Class sizes are binomial coefficients that overflow any float for
//! realistic `d`, so they are carried as logarithms and updated by the
//! multiplicative recurrences `C(n+1, r+1) = C(n, r) (n+1)/(r+1)` (sweep over
//! `h`) and `C(n+1, r) = C(n, r) (n+1)/(n+1-r)` (sweep over `t`).

use std::collections::BTreeSet;

use rand::Rng;
use serde::Serialize;

use crate::combin::{ln_binomial, LogSumExp};
use crate::error::{domain, Error, Result};
use crate::noise::{group_max_noise, LogUniform, NoiseKind};
use crate::score::ScoreVector;

/// Utility class `C(h, t)`: `h` is the length of the fully included head,
/// `t` the 1-based rank of the worst included item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UtilityClass {
    pub h: usize,
    pub t: usize,
    /// Natural log of the number of subsets in the class.
    pub log_size: f64,
}

impl UtilityClass {
    pub fn new(h: usize, t: usize, k: usize) -> Result<Self> {
        Ok(Self { h, t, log_size: log_class_size(h, t, k)? })
    }

    /// The class holding exactly the true top-`k`.
    pub fn top(k: usize) -> Self {
        Self { h: k - 1, t: k, log_size: 0.0 }
    }

    pub fn is_top(&self, k: usize) -> bool {
        self.h + 1 == k && self.t == k
    }
}

fn validate_class(h: usize, t: usize, k: usize) -> Result<()> {
    if k == 0 {
        return domain("k must be at least 1");
    }
    if h >= k {
        return domain(format!("h = {h} must be below k = {k}"));
    }
    if t < k {
        return domain(format!("t = {t} must be at least k = {k}"));
    }
    if t == k && h != k - 1 {
        return domain(format!("t = k = {k} requires h = k - 1, got h = {h}"));
    }
    Ok(())
}

/// Number of classes over `d` items: the top-`k` plus `k (d - k)` others.
pub fn class_count(d: usize, k: usize) -> usize {
    1 + k * (d - k)
}

/// `log |C(h, t)| = log C(t - h - 2, k - 1 - h)`, and 0 for the top class.
pub fn log_class_size(h: usize, t: usize, k: usize) -> Result<f64> {
    validate_class(h, t, k)?;
    if t == k {
        return Ok(0.0);
    }
    Ok(ln_binomial((t - h - 2) as u64, (k - 1 - h) as u64))
}

/// `log sum_h |C(h, t)| = log C(t - 1, k - 1)`.
pub fn log_class_size_sum(t: usize, k: usize) -> Result<f64> {
    if k == 0 || t < k {
        return domain(format!("need 1 <= k <= t, got k = {k}, t = {t}"));
    }
    Ok(ln_binomial((t - 1) as u64, (k - 1) as u64))
}

/// Canonical loss `(1 - gamma) x(h+1) - gamma x(t)` of every subset in `C(h, t)`.
pub fn class_loss(h: usize, t: usize, gamma: f64, scores: &ScoreVector) -> Result<f64> {
    if h >= t || t > scores.len() {
        return domain(format!("class ({h}, {t}) does not fit d = {}", scores.len()));
    }
    check_gamma(gamma)?;
    Ok((1.0 - gamma) * scores.order_stat(h + 1) - gamma * scores.order_stat(t))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return domain(format!("gamma = {gamma} outside [0, 1]"));
    }
    Ok(())
}

fn check_args(scores: &ScoreVector, k: usize, epsilon: f64, gamma: f64) -> Result<()> {
    let d = scores.len();
    if k == 0 || k >= d {
        return domain(format!("k = {k} must lie in 1..={}", d.saturating_sub(1)));
    }
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return domain(format!("epsilon = {epsilon} must be positive and finite"));
    }
    check_gamma(gamma)
}

/// Visits every class in sampling order (`t` ascending, `h` descending)
/// with its log size maintained by the binomial recurrence.
pub fn for_each_class_log_size(d: usize, k: usize, mut visit: impl FnMut(usize, usize, f64)) {
    visit(k - 1, k, 0.0);
    for t in k + 1..=d {
        // At h = k - 1 the body is empty: C(t - k - 1, 0) = 1.
        let mut m = 0.0;
        let mut n = t - k - 1;
        let mut r = 0usize;
        for h in (0..k).rev() {
            if h + 1 < k {
                m += ((n + 1) as f64 / (r + 1) as f64).ln();
                n += 1;
                r += 1;
            }
            visit(h, t, m);
        }
    }
}

/// Visits every tail rank `t` in `k..=d` with `log C(t - 1, k - 1)`.
pub fn for_each_tail_log_size(d: usize, k: usize, mut visit: impl FnMut(usize, f64)) {
    let mut m = 0.0;
    visit(k, m);
    for t in k + 1..=d {
        m += ((t - 1) as f64 / (t - k) as f64).ln();
        visit(t, m);
    }
}

#[inline]
fn noise_for_group<R: Rng + ?Sized>(noise: NoiseKind, log_size: f64, rng: &mut R) -> f64 {
    group_max_noise(noise, LogUniform::draw(rng, log_size))
}

/// `O(dk)` arg-max over all classes; returns `(h, t, log_size, value)`.
fn argmax_class<R: Rng + ?Sized>(
    scores: &ScoreVector,
    k: usize,
    epsilon: f64,
    gamma: f64,
    noise: NoiseKind,
    rng: &mut R,
) -> (usize, usize, f64, f64) {
    let sorted = scores.sorted();
    let w_tail = 0.5 * epsilon * gamma;
    let w_head = 0.5 * epsilon * (1.0 - gamma);
    let mut best = (k - 1, k, 0.0, f64::NEG_INFINITY);
    for_each_class_log_size(scores.len(), k, |h, t, m| {
        let v = w_tail * sorted[t - 1] - w_head * sorted[h] + noise_for_group(noise, m, rng);
        if v > best.3 {
            best = (h, t, m, v);
        }
    });
    best
}

/// `O(d)` arg-max over tail ranks for `gamma = 1`; returns `(t, value)`.
fn argmax_tail<R: Rng + ?Sized>(
    scores: &ScoreVector,
    k: usize,
    epsilon: f64,
    noise: NoiseKind,
    rng: &mut R,
) -> (usize, f64) {
    let sorted = scores.sorted();
    let w = 0.5 * epsilon;
    let mut best = (k, f64::NEG_INFINITY);
    for_each_tail_log_size(scores.len(), k, |t, m| {
        let v = w * sorted[t - 1] + noise_for_group(noise, m, rng);
        if v > best.1 {
            best = (t, v);
        }
    });
    best
}

/// Draws `h` for a fixed tail rank `t > k` with probability proportional to
/// `|C(h, t)|`, via the Gumbel-max trick over log sizes.
fn draw_head_given_tail<R: Rng + ?Sized>(t: usize, k: usize, rng: &mut R) -> (usize, f64) {
    let mut best = (k - 1, 0.0, f64::NEG_INFINITY);
    let mut m = 0.0;
    let mut n = t - k - 1;
    let mut r = 0usize;
    for h in (0..k).rev() {
        if h + 1 < k {
            m += ((n + 1) as f64 / (r + 1) as f64).ln();
            n += 1;
            r += 1;
        }
        let v = noise_for_group(NoiseKind::Gumbel, m, rng);
        if v > best.2 {
            best = (h, m, v);
        }
    }
    (best.0, best.1)
}

/// Samples the class of the canonical mechanism and the winning noisy value.
///
/// For `gamma < 1` this sweeps all classes. For `gamma = 1` only tail ranks
/// are swept and `h` is drawn afterwards in proportion to class sizes.
pub fn sample_class<R: Rng + ?Sized>(
    scores: &ScoreVector,
    k: usize,
    epsilon: f64,
    gamma: f64,
    noise: NoiseKind,
    rng: &mut R,
) -> Result<(UtilityClass, f64)> {
    check_args(scores, k, epsilon, gamma)?;
    if gamma < 1.0 {
        let (h, t, log_size, v) = argmax_class(scores, k, epsilon, gamma, noise, rng);
        return Ok((UtilityClass { h, t, log_size }, v));
    }
    let (t, v) = argmax_tail(scores, k, epsilon, noise, rng);
    if t == k {
        return Ok((UtilityClass::top(k), v));
    }
    let (h, log_size) = draw_head_given_tail(t, k, rng);
    Ok((UtilityClass { h, t, log_size }, v))
}

/// `r` distinct values from `0..n` (Floyd's algorithm), ascending.
fn floyd_sample<R: Rng + ?Sized>(n: usize, r: usize, rng: &mut R) -> Vec<usize> {
    debug_assert!(r <= n);
    let mut chosen = BTreeSet::new();
    for j in n - r..n {
        let x = rng.gen_range(0..=j);
        if !chosen.insert(x) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

/// A uniformly random member of `cls`, as ascending item indices.
///
/// With `gamma_is_one` only `cls.t` is used and the draw is uniform over the
/// union `C(0, t) ∪ … ∪ C(k-1, t)`: every `(k-1)`-subset of the top `t - 1`
/// ranks plus rank `t`.
pub fn sample_member<R: Rng + ?Sized>(
    cls: &UtilityClass,
    k: usize,
    scores: &ScoreVector,
    gamma_is_one: bool,
    rng: &mut R,
) -> Result<Vec<usize>> {
    let d = scores.len();
    if cls.t > d {
        return domain(format!("class tail t = {} exceeds d = {d}", cls.t));
    }
    let ranks: Vec<usize> = if gamma_is_one {
        if k == 0 || cls.t < k {
            return domain(format!("tail t = {} incompatible with k = {k}", cls.t));
        }
        if cls.t == k {
            (1..=k).collect()
        } else {
            let mut r: Vec<usize> = floyd_sample(cls.t - 1, k - 1, rng).into_iter().map(|x| x + 1).collect();
            r.push(cls.t);
            r
        }
    } else {
        validate_class(cls.h, cls.t, k)?;
        if cls.t == k {
            (1..=k).collect()
        } else {
            // Head ranks 1..=h, body from ranks h+2..=t-1, tail rank t.
            let mut r: Vec<usize> = (1..=cls.h).collect();
            let body_pool = cls.t - cls.h - 2;
            let body = floyd_sample(body_pool, k - 1 - cls.h, rng);
            r.extend(body.into_iter().map(|x| x + cls.h + 2));
            r.push(cls.t);
            r
        }
    };
    let mut items: Vec<usize> = ranks.into_iter().map(|r| scores.item_at_rank(r)).collect();
    items.sort_unstable();
    Ok(items)
}

/// `(h, t)` of a subset given the ascending 1-based ranks of its members.
pub(crate) fn class_of_sorted_ranks(ranks: &[usize]) -> (usize, usize) {
    let k = ranks.len();
    let h = ranks.iter().enumerate().take_while(|&(i, &r)| r == i + 1).count();
    if h == k {
        (k - 1, k)
    } else {
        (h, ranks[k - 1])
    }
}

/// One draw of the canonical mechanism.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Selection {
    /// Selected item indices, ascending.
    pub subset: Vec<usize>,
    pub cls: UtilityClass,
    pub loss: f64,
    /// Winning noisy objective value.
    pub noisy_value: f64,
}

/// Samples a `k`-subset: the class via [`sample_class`] (or the tail sweep
/// for `gamma = 1`), then a uniform member of it.
pub fn canonical_select<R: Rng + ?Sized>(
    scores: &ScoreVector,
    k: usize,
    epsilon: f64,
    gamma: f64,
    noise: NoiseKind,
    rng: &mut R,
) -> Result<Selection> {
    check_args(scores, k, epsilon, gamma)?;
    let (cls, noisy_value, subset) = if gamma < 1.0 {
        let (cls, v) = sample_class(scores, k, epsilon, gamma, noise, rng)?;
        let subset = sample_member(&cls, k, scores, false, rng)?;
        (cls, v, subset)
    } else {
        let (t, v) = argmax_tail(scores, k, epsilon, noise, rng);
        let probe = UtilityClass { h: 0, t, log_size: 0.0 };
        let subset = sample_member(&probe, k, scores, true, rng)?;
        let mut ranks: Vec<usize> = subset.iter().map(|&i| scores.rank_of(i)).collect();
        ranks.sort_unstable();
        let (h, t) = class_of_sorted_ranks(&ranks);
        (UtilityClass::new(h, t, k)?, v, subset)
    };
    let loss = class_loss(cls.h, cls.t, gamma, scores)?;
    Ok(Selection { subset, cls, loss, noisy_value })
}

#[derive(Debug, Clone, PartialEq)]
enum LogProbs {
    /// One entry per class in sweep order: index 0 is the top class, then
    /// `(h, t)` at `1 + (t - k - 1) k + (k - 1 - h)`.
    Classes(Vec<f64>),
    /// `gamma = 1`: one entry per tail rank `t`, at `t - k`; classes sharing a
    /// tail split its mass in proportion to their sizes.
    Tails(Vec<f64>),
}

/// Exact probability of every utility class under Gumbel noise, in log space.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    d: usize,
    k: usize,
    epsilon: f64,
    gamma: f64,
    log_probs: LogProbs,
}

impl ClassDistribution {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Log-probability of class `(h, t)`.
    pub fn log_prob(&self, h: usize, t: usize) -> Result<f64> {
        validate_class(h, t, self.k)?;
        if t > self.d {
            return domain(format!("t = {t} exceeds d = {}", self.d));
        }
        match &self.log_probs {
            LogProbs::Classes(v) => Ok(if t == self.k { v[0] } else { v[1 + (t - self.k - 1) * self.k + (self.k - 1 - h)] }),
            LogProbs::Tails(v) => {
                if t == self.k {
                    return Ok(v[0]);
                }
                Ok(v[t - self.k] + log_class_size(h, t, self.k)? - log_class_size_sum(t, self.k)?)
            }
        }
    }

    pub fn prob(&self, h: usize, t: usize) -> Result<f64> {
        self.log_prob(h, t).map(f64::exp)
    }

    /// Probability of the exact top-`k`.
    pub fn top_log_prob(&self) -> f64 {
        match &self.log_probs {
            LogProbs::Classes(v) | LogProbs::Tails(v) => v[0],
        }
    }

    /// Visits every class as `(h, t, log_prob)` in sampling order.
    pub fn for_each(&self, mut visit: impl FnMut(usize, usize, f64)) {
        let k = self.k;
        match &self.log_probs {
            LogProbs::Classes(v) => {
                let mut i = 0;
                for_each_class_log_size(self.d, k, |h, t, _| {
                    visit(h, t, v[i]);
                    i += 1;
                });
            }
            LogProbs::Tails(v) => {
                let mut tail_sizes = vec![0.0; self.d - k + 1];
                for_each_tail_log_size(self.d, k, |t, m| tail_sizes[t - k] = m);
                for_each_class_log_size(self.d, k, |h, t, m| {
                    visit(h, t, v[t - k] + m - tail_sizes[t - k]);
                });
            }
        }
    }

    /// All classes as `(h, t, log_prob)`.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(class_count(self.d, self.k));
        self.for_each(|h, t, lp| out.push((h, t, lp)));
        out
    }

    /// Log-probability of each tail rank, indexed by `t - k`.
    pub fn tail_log_marginal(&self) -> Vec<f64> {
        match &self.log_probs {
            LogProbs::Tails(v) => v.clone(),
            LogProbs::Classes(_) => {
                let mut acc = vec![LogSumExp::default(); self.d - self.k + 1];
                self.for_each(|_, t, lp| acc[t - self.k].push(lp));
                acc.iter().map(LogSumExp::value).collect()
            }
        }
    }

    /// Log of the total mass; zero up to rounding.
    pub fn log_total(&self) -> f64 {
        let mut acc = LogSumExp::default();
        self.for_each(|_, _, lp| acc.push(lp));
        acc.value()
    }
}

/// Exact class probabilities of the canonical mechanism with Gumbel noise:
/// `P(h, t) ∝ |C(h, t)| exp((epsilon / 2) (gamma x(t) - (1 - gamma) x(h+1)))`.
pub fn exact_class_distribution(scores: &ScoreVector, k: usize, epsilon: f64, gamma: f64) -> Result<ClassDistribution> {
    check_args(scores, k, epsilon, gamma)?;
    let d = scores.len();
    let sorted = scores.sorted();
    let w_tail = 0.5 * epsilon * gamma;
    let w_head = 0.5 * epsilon * (1.0 - gamma);
    let log_probs = if gamma < 1.0 {
        let mut v = Vec::with_capacity(class_count(d, k));
        let mut acc = LogSumExp::default();
        for_each_class_log_size(d, k, |h, t, m| {
            let w = m + w_tail * sorted[t - 1] - w_head * sorted[h];
            acc.push(w);
            v.push(w);
        });
        let z = acc.value();
        v.iter_mut().for_each(|w| *w -= z);
        LogProbs::Classes(v)
    } else {
        let mut v = Vec::with_capacity(d - k + 1);
        let mut acc = LogSumExp::default();
        for_each_tail_log_size(d, k, |t, m| {
            let w = m + w_tail * sorted[t - 1];
            acc.push(w);
            v.push(w);
        });
        let z = acc.value();
        v.iter_mut().for_each(|w| *w -= z);
        LogProbs::Tails(v)
    };
    Ok(ClassDistribution { d, k, epsilon, gamma, log_probs })
}

/// As [`exact_class_distribution`], refusing noise kinds without a closed form.
pub fn exact_class_distribution_for(
    noise: NoiseKind,
    scores: &ScoreVector,
    k: usize,
    epsilon: f64,
    gamma: f64,
) -> Result<ClassDistribution> {
    if noise != NoiseKind::Gumbel {
        return Err(Error::Unsupported(format!(
            "exact class probabilities need Gumbel noise, got {noise}"
        )));
    }
    exact_class_distribution(scores, k, epsilon, gamma)
}
