#![allow(dead_code)]

use std::collections::BTreeMap;

use statrs::distribution::{Binomial, ChiSquared, ContinuousCDF, DiscreteCDF};

/// Asymptotic p-value of the two-sample Kolmogorov-Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len(), b.len());
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    kolmogorov_sf((ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d)
}

fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Chi-square goodness-of-fit p-value of `observed` counts against
/// `expected` probabilities. Cells with expected count below 5 are pooled.
pub fn chi2_gof(observed: &[u64], expected: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected.len());
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pooled_o, mut pooled_e) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected) {
        let e = p * n;
        if e < 5.0 {
            pooled_o += o as f64;
            pooled_e += e;
        } else {
            stat += (o as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_e >= 5.0 {
        stat += (pooled_o - pooled_e).powi(2) / pooled_e;
        cells += 1;
    } else {
        assert!(pooled_o <= pooled_e + 5.0 + 6.0 * pooled_e.sqrt(), "rare cells overfull: {pooled_o} vs {pooled_e}");
    }
    if cells < 2 {
        return 1.0;
    }
    ChiSquared::new((cells - 1) as f64).unwrap().sf(stat)
}

/// Chi-square p-value for a map of counts against a map of probabilities.
pub fn chi2_maps<K: Ord + Clone>(observed: &BTreeMap<K, u64>, expected: &BTreeMap<K, f64>) -> f64 {
    for k in observed.keys() {
        assert!(expected.contains_key(k), "outcome outside the expected support");
    }
    let obs: Vec<u64> = expected.keys().map(|k| observed.get(k).copied().unwrap_or(0)).collect();
    let exp: Vec<f64> = expected.values().copied().collect();
    chi2_gof(&obs, &exp)
}

/// `|hits / n - p|` in units of the binomial standard deviation.
pub fn binomial_z(hits: u64, n: u64, p: f64) -> f64 {
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    let diff = hits as f64 / n as f64 - p;
    if sd == 0.0 {
        if diff == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        diff.abs() / sd
    }
}

/// One-sided p-value `P(X >= hits)` for `X ~ Binomial(n, p)`.
pub fn binomial_upper_p(hits: u64, n: u64, p: f64) -> f64 {
    if hits == 0 {
        return 1.0;
    }
    Binomial::new(p, n).unwrap().sf(hits - 1)
}

/// Total-variation distance between two empirical distributions.
pub fn tv_distance<K: Ord>(a: &BTreeMap<K, u64>, b: &BTreeMap<K, u64>) -> f64 {
    let na: u64 = a.values().sum();
    let nb: u64 = b.values().sum();
    let mut keys: Vec<&K> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.iter()
        .map(|k| {
            let pa = a.get(k).copied().unwrap_or(0) as f64 / na as f64;
            let pb = b.get(k).copied().unwrap_or(0) as f64 / nb as f64;
            (pa - pb).abs()
        })
        .sum::<f64>()
        / 2.0
}

/// Softmax of `w * x`.
pub fn softmax(xs: &[f64], w: f64) -> Vec<f64> {
    let m = xs.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(w * x));
    let e: Vec<f64> = xs.iter().map(|&x| (w * x - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

/// Reproducible pseudo-random scores in `[-1, 5)`.
pub fn random_scores(d: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..d)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 6.0 - 1.0
        })
        .collect()
}
