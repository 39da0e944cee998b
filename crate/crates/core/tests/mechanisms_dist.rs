mod common;

use std::collections::BTreeMap;

use common::{binomial_z, chi2_gof, chi2_maps, random_scores, softmax, tv_distance};
use dptopk::analysis::tally;
use dptopk::mechanisms::{lipschitz_select, oneshot, peel, permute_and_flip_ref, MechanismParams};
use dptopk::noise::NoiseKind;
use dptopk::rng::{seeded, StreamRng};
use dptopk::ScoreVector;
use proptest::prelude::*;

const MILLION: u64 = 1_000_000;

fn counts_single(scores: &ScoreVector, params: &MechanismParams, trials: u64, seed: u64) -> BTreeMap<usize, u64> {
    tally(trials, seed, |r| Ok(lipschitz_select(scores, params, r)?[0])).unwrap()
}

#[test]
fn two_item_softmax_example() {
    let s = ScoreVector::new(vec![0.0, 3f64.ln()]).unwrap();
    let params = MechanismParams::new(2.0, 1.0, 1, NoiseKind::Gumbel).unwrap();
    let c = counts_single(&s, &params, MILLION, 1);
    let z = binomial_z(c[&1], MILLION, 0.75);
    assert!(z < 4.0, "z = {z}");
}

#[test]
fn gumbel_selection_follows_softmax() {
    for (d, seed) in [(2usize, 3u64), (5, 4), (8, 5)] {
        let raw = random_scores(d, seed);
        let s = ScoreVector::new(raw.clone()).unwrap();
        let eps = 1.5;
        let params = MechanismParams::new(eps, 1.0, 1, NoiseKind::Gumbel).unwrap();
        let c = counts_single(&s, &params, MILLION, seed);
        let p = softmax(&raw, eps / 2.0);
        for i in 0..d {
            let z = binomial_z(c.get(&i).copied().unwrap_or(0), MILLION, p[i]);
            assert!(z < 4.0, "d = {d}, item {i}: z = {z}");
        }
    }
}

#[test]
fn exponential_noise_is_permute_and_flip() {
    let raw = vec![0.4, 2.1, 1.3, 1.9];
    let s = ScoreVector::new(raw).unwrap();
    let params = MechanismParams::new(1.0, 1.0, 1, NoiseKind::Exponential).unwrap();
    let a = counts_single(&s, &params, MILLION, 7);
    let b = tally(MILLION, 8, |r| permute_and_flip_ref(&s, 1.0, 1.0, r)).unwrap();
    let tv = tv_distance(&a, &b);
    assert!(tv < 0.005, "TV = {tv}");
}

#[test]
fn permute_and_flip_uniform_on_ties() {
    let s = ScoreVector::new(vec![2.0; 6]).unwrap();
    let c = tally(MILLION, 9, |r| permute_and_flip_ref(&s, 1.0, 1.0, r)).unwrap();
    let obs: Vec<u64> = (0..6).map(|i| c[&i]).collect();
    assert!(chi2_gof(&obs, &[1.0 / 6.0; 6]) > 1e-3);
    let one = ScoreVector::new(vec![5.0]).unwrap();
    assert_eq!(permute_and_flip_ref(&one, 1.0, 1.0, &mut seeded(1)).unwrap(), 0);
}

/// Probability of each ordered selection sequence of `k` rounds of
/// softmax selection without replacement.
fn sequence_probs(raw: &[f64], k: usize, w: f64) -> BTreeMap<Vec<usize>, f64> {
    fn rec(raw: &[f64], left: &[usize], k: usize, w: f64, prefix: &mut Vec<usize>, p: f64, out: &mut BTreeMap<Vec<usize>, f64>) {
        if prefix.len() == k {
            out.insert(prefix.clone(), p);
            return;
        }
        let xs: Vec<f64> = left.iter().map(|&i| raw[i]).collect();
        let probs = softmax(&xs, w);
        for (j, &i) in left.iter().enumerate() {
            let rest: Vec<usize> = left.iter().copied().filter(|&x| x != i).collect();
            prefix.push(i);
            rec(raw, &rest, k, w, prefix, p * probs[j], out);
            prefix.pop();
        }
    }
    let mut out = BTreeMap::new();
    let all: Vec<usize> = (0..raw.len()).collect();
    rec(raw, &all, k, w, &mut Vec::new(), 1.0, &mut out);
    out
}

#[test]
fn peeling_two_rounds_matches_softmax_chain() {
    let raw = vec![1.0, 3.5, 2.0];
    let s = ScoreVector::new(raw.clone()).unwrap();
    let eps = 2.0;
    let seqs = sequence_probs(&raw, 2, eps / 2.0 / 2.0);
    let mut sets: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for (seq, p) in &seqs {
        let mut key = seq.clone();
        key.sort();
        *sets.entry(key).or_insert(0.0) += p;
    }
    let c = tally(MILLION, 21, |r| {
        let mut out = peel(&s, 2, eps, 1.0, NoiseKind::Gumbel, r)?;
        out.sort();
        Ok(out)
    })
    .unwrap();
    for (set, &p) in &sets {
        let z = binomial_z(c.get(set).copied().unwrap_or(0), MILLION, p);
        assert!(z < 4.0, "{set:?}: z = {z}");
    }
    assert!(chi2_maps(&c, &sets) > 1e-3);
}

#[test]
fn gumbel_peeling_equals_one_pass_top_k() {
    let raw = random_scores(5, 31);
    let s = ScoreVector::new(raw.clone()).unwrap();
    let (k, eps) = (3, 3.0);
    let seqs = sequence_probs(&raw, k, eps / k as f64 / 2.0);
    let peeled = tally(400_000, 32, |r| peel(&s, k, eps, 1.0, NoiseKind::Gumbel, r)).unwrap();
    let one_pass = tally(400_000, 33, |r| oneshot(&s, k, eps, 1.0, NoiseKind::Gumbel, r)).unwrap();
    assert!(chi2_maps(&peeled, &seqs) > 1e-3);
    assert!(chi2_maps(&one_pass, &seqs) > 1e-3);
}

#[test]
fn single_round_peeling_is_single_selection() {
    let raw = random_scores(6, 41);
    let s = ScoreVector::new(raw.clone()).unwrap();
    let c = tally(MILLION, 42, |r| Ok(peel(&s, 1, 1.0, 1.0, NoiseKind::Gumbel, r)?[0])).unwrap();
    let p = softmax(&raw, 0.5);
    let obs: Vec<u64> = (0..6).map(|i| c.get(&i).copied().unwrap_or(0)).collect();
    assert!(chi2_gof(&obs, &p) > 1e-3);
}

#[test]
fn full_selections_are_permutations() {
    let s = ScoreVector::new(random_scores(7, 5)).unwrap();
    let mut rng = seeded(3);
    for noise in NoiseKind::ALL {
        let mut a = peel(&s, 7, 1.0, 1.0, noise, &mut rng).unwrap();
        let mut b = oneshot(&s, 7, 1.0, 1.0, noise, &mut rng).unwrap();
        a.sort();
        b.sort();
        assert_eq!(a, (0..7).collect::<Vec<_>>());
        assert_eq!(b, (0..7).collect::<Vec<_>>());
    }
    let one = ScoreVector::new(vec![1.0]).unwrap();
    let p = MechanismParams::new(1.0, 1.0, 1, NoiseKind::Laplace).unwrap();
    assert_eq!(lipschitz_select(&one, &p, &mut rng).unwrap(), vec![0]);
}

#[test]
fn oneshot_laplace_coefficient() {
    let raw = random_scores(9, 77);
    let s = ScoreVector::new(raw.clone()).unwrap();
    let (k, eps, delta) = (3, 2.0, 0.5);
    let got = oneshot(&s, k, eps, delta, NoiseKind::Laplace, &mut seeded(4)).unwrap();
    let mut rng = seeded(4);
    let mut z: Vec<(f64, usize)> = raw
        .iter()
        .enumerate()
        .map(|(i, x)| (eps / (2.0 * k as f64 * delta) * x + NoiseKind::Laplace.sample(&mut rng), i))
        .collect();
    z.sort_by(|a, b| b.0.total_cmp(&a.0));
    let want: Vec<usize> = z[..k].iter().map(|p| p.1).collect();
    assert_eq!(got, want);
}

#[test]
fn identical_seeds_give_identical_output() {
    let s = ScoreVector::new(random_scores(20, 8)).unwrap();
    for noise in NoiseKind::ALL {
        let p = MechanismParams::new(1.0, 1.0, 4, noise).unwrap();
        let a = lipschitz_select(&s, &p, &mut seeded(99)).unwrap();
        let b = lipschitz_select(&s, &p, &mut seeded(99)).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            peel(&s, 4, 1.0, 1.0, noise, &mut seeded(5)).unwrap(),
            peel(&s, 4, 1.0, 1.0, noise, &mut seeded(5)).unwrap()
        );
    }
}

fn noise_kind() -> impl Strategy<Value = NoiseKind> {
    prop::sample::select(NoiseKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn outputs_ignore_a_common_shift(
        raw in prop::collection::vec(-50i32..50, 2..12),
        shift in -1000i32..1000,
        seed in any::<u64>(),
        noise in noise_kind(),
    ) {
        let raw: Vec<f64> = raw.into_iter().map(|x| f64::from(x) / 4.0).collect();
        let d = raw.len();
        let a = ScoreVector::new(raw).unwrap();
        let b = a.shifted(f64::from(shift)).unwrap();
        let k = 1 + (seed as usize) % (d - 1);
        let p = MechanismParams::new(1.0, 1.0, k, noise).unwrap();
        prop_assert_eq!(lipschitz_select(&a, &p, &mut seeded(seed)).unwrap(), lipschitz_select(&b, &p, &mut seeded(seed)).unwrap());
        prop_assert_eq!(peel(&a, k, 1.0, 1.0, noise, &mut seeded(seed)).unwrap(), peel(&b, k, 1.0, 1.0, noise, &mut seeded(seed)).unwrap());
        prop_assert_eq!(oneshot(&a, k, 1.0, 1.0, noise, &mut seeded(seed)).unwrap(), oneshot(&b, k, 1.0, 1.0, noise, &mut seeded(seed)).unwrap());
        prop_assert_eq!(permute_and_flip_ref(&a, 1.0, 1.0, &mut seeded(seed)).unwrap(), permute_and_flip_ref(&b, 1.0, 1.0, &mut seeded(seed)).unwrap());
    }
}

/// Largest excess of an empirical log-probability ratio over `epsilon`,
/// measured in units of its Monte Carlo error. Outcomes seen fewer than
/// 100 times on either side are skipped.
fn worst_ratio_excess(a: &BTreeMap<Vec<usize>, u64>, b: &BTreeMap<Vec<usize>, u64>, epsilon: f64) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for (key, &ca) in a {
        let cb = b.get(key).copied().unwrap_or(0);
        if ca < 100 || cb < 100 {
            continue;
        }
        let (ca, cb) = (ca as f64, cb as f64);
        let err = (1.0 / ca + 1.0 / cb).sqrt();
        worst = worst.max(((ca / cb).ln().abs() - epsilon) / err);
    }
    worst
}

fn neighbours(s: &ScoreVector, k: usize, rng: &mut StreamRng, random: usize) -> Vec<Vec<f64>> {
    let mut out = dptopk::analysis::extreme_neighbors(s, k);
    for i in 0..random {
        out.push(dptopk::analysis::random_neighbor(s.len(), i % 2 == 0, rng));
    }
    out
}

fn monte_carlo_audit(dims: &[usize], trials: u64, random_pairs: usize) {
    let mut rng = seeded(2024);
    let mut seed = 0u64;
    for &d in dims {
        let s = ScoreVector::new(random_scores(d, 500 + d as u64)).unwrap();
        for kappa in [1, 2] {
            let pairs = neighbours(&s, kappa, &mut rng, random_pairs);
            for noise in NoiseKind::ALL {
                for eps in [0.5, 1.0] {
                    let p = MechanismParams::new(eps, 1.0, kappa, noise).unwrap();
                    let run = |sv: &ScoreVector, seed: u64| {
                        tally(trials, seed, |r| {
                            let mut out = lipschitz_select(sv, &p, r)?;
                            out.sort();
                            Ok(out)
                        })
                        .unwrap()
                    };
                    seed += 1;
                    let base = run(&s, seed);
                    for delta in &pairs {
                        seed += 1;
                        let other = run(&s.perturbed(delta).unwrap(), seed);
                        let excess = worst_ratio_excess(&base, &other, eps);
                        assert!(excess <= 3.0, "d={d} {noise} kappa={kappa} eps={eps} delta={delta:?}: {excess} sigma");
                    }
                }
            }
        }
    }
}

#[test]
fn monte_carlo_privacy_audit() {
    monte_carlo_audit(&[5], 200_000, 2);
}

#[test]
#[ignore = "full-scale audit, takes many hours on one core"]
fn monte_carlo_privacy_audit_full() {
    monte_carlo_audit(&[2, 3, 4, 5, 6], 10_000_000, 46);
}

#[test]
fn exact_softmax_privacy_audit() {
    let mut rng = seeded(77);
    for d in 2..=6 {
        for eps in [0.5, 1.0] {
            let raw = random_scores(d, d as u64);
            let s = ScoreVector::new(raw.clone()).unwrap();
            for delta in neighbours(&s, 1, &mut rng, 50) {
                let moved: Vec<f64> = raw.iter().zip(&delta).map(|(x, e)| x + e).collect();
                let p = softmax(&raw, eps / 2.0);
                let q = softmax(&moved, eps / 2.0);
                for (a, b) in p.iter().zip(&q) {
                    assert!((a / b).ln().abs() <= eps + 1e-9);
                }
            }
        }
    }
}

#[test]
fn k_above_d_is_rejected() {
    let s = ScoreVector::new(vec![1.0, 2.0]).unwrap();
    let mut rng = seeded(0);
    assert!(peel(&s, 3, 1.0, 1.0, NoiseKind::Gumbel, &mut rng).is_err());
    assert!(oneshot(&s, 3, 1.0, 1.0, NoiseKind::Gumbel, &mut rng).is_err());
    assert!(peel(&s, 0, 1.0, 1.0, NoiseKind::Gumbel, &mut rng).is_err());
}
