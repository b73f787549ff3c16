use std::collections::{BTreeMap, HashMap};

use super::{EstimationError, LexPcfg};
use crate::events::EventCounts;
use crate::symbol::{Cat, Word};

/// Fitted weights stay below one so unseen events keep positive mass.
const LAMBDA_CEILING: f64 = 1.0 - 1e-6;

/// Splits counts into discounted explicit mass and the freed mass `γ`:
/// `p(v) = max(c(v) − d, 0)/N + γ · backoff(v)` with `γ = Σ min(c, d)/N`.
/// Reduces to the textbook `d·n₊/N` when every count is at least `d`, and
/// stays normalized for fractional counts below `d`.
pub(crate) fn discount_parts<K: Ord + Clone>(
    counts: &BTreeMap<K, f64>,
    d: f64,
) -> Option<(BTreeMap<K, f64>, f64)> {
    let total: f64 = counts.values().sum();
    if total <= 0.0 {
        return None;
    }
    let mut freed = 0.0;
    let explicit = counts
        .iter()
        .map(|(k, &c)| {
            freed += c.min(d);
            (k.clone(), (c - d).max(0.0) / total)
        })
        .collect();
    Some((explicit, freed / total))
}

/// Absolute discounting of `counts` against `backoff`. The result covers
/// the union of both supports.
pub fn absolute_discount<K: Ord + Clone>(
    counts: &BTreeMap<K, f64>,
    backoff: &BTreeMap<K, f64>,
    d: f64,
) -> Result<BTreeMap<K, f64>, EstimationError> {
    if !(0.0..1.0).contains(&d) {
        return Err(EstimationError::InvalidConfig(format!("discount {d} outside [0, 1)")));
    }
    let (explicit, gamma) = discount_parts(counts, d).ok_or(EstimationError::EmptyCounts)?;
    let mut out: BTreeMap<K, f64> = backoff.iter().map(|(k, &b)| (k.clone(), gamma * b)).collect();
    for (k, p) in explicit {
        *out.entry(k).or_insert(0.0) += p;
    }
    Ok(out)
}

/// `n₁ / (n₁ + 2 n₂)` over counts rounded to the nearest integer, kept
/// inside `[0.05, 0.95]`; `fallback` when no count rounds to one.
pub fn estimate_discount(counts: impl IntoIterator<Item = f64>, fallback: f64) -> f64 {
    let (mut n1, mut n2) = (0.0f64, 0.0f64);
    for c in counts {
        if (0.5..1.5).contains(&c) {
            n1 += 1.0;
        } else if (1.5..2.5).contains(&c) {
            n2 += 1.0;
        }
    }
    if n1 == 0.0 {
        return fallback;
    }
    (n1 / (n1 + 2.0 * n2)).clamp(0.05, 0.95)
}

/// One held-out rule event: its expected count and the probabilities the
/// lexicalized and backbone estimates assign to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketSample {
    pub bucket: usize,
    pub count: f64,
    pub p_lex: f64,
    pub p_backbone: f64,
}

/// Deleted-interpolation EM for the per-bucket weight of the lexicalized
/// estimate. Buckets without held-out mass keep their default. The result
/// is made nondecreasing by weighted pool-adjacent-violators.
pub fn fit_smoothing_weights(samples: &[BucketSample], defaults: &[f64; 5]) -> [f64; 5] {
    let mut fitted: [Option<(f64, f64)>; 5] = [None; 5];
    for (b, slot) in fitted.iter_mut().enumerate() {
        let mine: Vec<&BucketSample> = samples
            .iter()
            .filter(|s| s.bucket == b && s.count > 0.0 && (s.p_lex > 0.0 || s.p_backbone > 0.0))
            .collect();
        let mass: f64 = mine.iter().map(|s| s.count).sum();
        if mass <= 0.0 {
            continue;
        }
        let mut lambda = 0.5;
        for _ in 0..10_000 {
            let resp: f64 = mine
                .iter()
                .map(|s| {
                    let a = lambda * s.p_lex;
                    s.count * a / (a + (1.0 - lambda) * s.p_backbone)
                })
                .sum();
            let next = resp / mass;
            let done = (next - lambda).abs() < 1e-6;
            lambda = next;
            if done {
                break;
            }
        }
        *slot = Some((lambda.clamp(0.0, LAMBDA_CEILING), mass));
    }

    // Pool adjacent violators over the fitted buckets.
    let mut blocks: Vec<(f64, f64, Vec<usize>)> = Vec::new();
    for (b, f) in fitted.iter().enumerate() {
        if let Some((v, w)) = *f {
            blocks.push((v, w, vec![b]));
            while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
                let (v2, w2, m2) = blocks.pop().unwrap();
                let (v1, w1, m1) = blocks.last_mut().unwrap();
                *v1 = (*v1 * *w1 + v2 * w2) / (*w1 + w2);
                *w1 += w2;
                m1.extend(m2);
            }
        }
    }
    let mut out: [Option<f64>; 5] = [None; 5];
    for (v, _, members) in &blocks {
        for &b in members {
            out[b] = Some(*v);
        }
    }
    let mut result = [0.0; 5];
    for b in 0..5 {
        result[b] = match out[b] {
            Some(v) => v,
            None => {
                let lo = out[..b].iter().flatten().fold(0.0f64, |a, &x| a.max(x));
                let hi = out[b + 1..].iter().flatten().fold(1.0f64, |a, &x| a.min(x));
                defaults[b].clamp(lo, hi.max(lo))
            }
        };
    }
    result
}

/// Pairs held-out expected rule counts with the training estimates: the
/// unsmoothed lexicalized relative frequency and the model's backbone.
/// Contexts never seen in training carry no information and are skipped.
pub fn heldout_samples(heldout: &EventCounts, train_total: &EventCounts, model: &LexPcfg) -> Vec<BucketSample> {
    let g = model.grammar();
    let mut freq: HashMap<(Word, Cat), f64> = HashMap::new();
    for (e, c) in train_total.rules() {
        *freq.entry((e.head.clone(), g.rule(e.rule).lhs)).or_insert(0.0) += c;
    }
    heldout
        .rules()
        .filter_map(|(e, c)| {
            let f = freq.get(&(e.head.clone(), g.rule(e.rule).lhs)).copied().unwrap_or(0.0);
            (f > 0.0).then(|| BucketSample {
                bucket: model.smoothing().bucket(f),
                count: c,
                p_lex: train_total.rule(e) / f,
                p_backbone: model.rule_backbone[e.rule.index()].exp(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(pairs: &[(&'static str, f64)]) -> BTreeMap<&'static str, f64> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn worked_discount_example() {
        let counts = map(&[("a", 3.0), ("b", 1.0)]);
        let third = 1.0 / 3.0;
        let backoff = map(&[("a", third), ("b", third), ("c", third)]);
        let p = absolute_discount(&counts, &backoff, 0.5).unwrap();
        // (3 − ½)/4 + (½·2/4)/3, (1 − ½)/4 + 1/12, 1/12
        assert!((p["a"] - 17.0 / 24.0).abs() < 1e-15);
        assert!((p["b"] - 5.0 / 24.0).abs() < 1e-15);
        assert!((p["c"] - 1.0 / 12.0).abs() < 1e-15);
        assert!((p.values().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn point_mass_stays_a_point_mass() {
        let p = absolute_discount(&map(&[("a", 2.0)]), &map(&[("a", 1.0)]), 0.3).unwrap();
        assert_eq!(p.len(), 1);
        assert!((p["a"] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_discount_gives_relative_frequencies() {
        let counts = map(&[("a", 3.0), ("b", 1.0)]);
        let p = absolute_discount(&counts, &map(&[("c", 1.0)]), 0.0).unwrap();
        assert_eq!(p["a"], 0.75);
        assert_eq!(p["b"], 0.25);
        assert_eq!(p["c"], 0.0);
    }

    #[test]
    fn empty_counts_are_an_error() {
        assert!(matches!(
            absolute_discount(&map(&[]), &map(&[("a", 1.0)]), 0.5),
            Err(EstimationError::EmptyCounts)
        ));
    }

    #[test]
    fn discount_from_count_of_counts() {
        // n1 = 3, n2 = 1 → 3/5
        assert!((estimate_discount([1.0, 1.0, 0.9, 2.0, 7.0], 0.5) - 0.6).abs() < 1e-15);
        assert_eq!(estimate_discount([3.0, 4.0], 0.42), 0.42);
    }

    fn sample(bucket: usize, count: f64, p_lex: f64, p_backbone: f64) -> BucketSample {
        BucketSample {
            bucket,
            count,
            p_lex,
            p_backbone,
        }
    }

    #[test]
    fn backbone_data_drives_lambda_to_zero() {
        let s = [sample(2, 10.0, 0.0, 0.5), sample(2, 10.0, 0.0, 0.5)];
        let l = fit_smoothing_weights(&s, &[0.0, 0.3, 0.6, 0.8, 0.95]);
        assert!(l[2] < 1e-6);
    }

    #[test]
    fn lexicalized_data_drives_lambda_to_one() {
        let s = [sample(3, 10.0, 1.0, 0.0)];
        let l = fit_smoothing_weights(&s, &[0.0, 0.3, 0.6, 0.8, 0.95]);
        assert!(l[3] > 0.999);
        assert!(l[4] >= l[3]);
    }

    #[test]
    fn recovers_an_even_mixture() {
        let p_lex = [0.7, 0.2, 0.1, 0.0];
        let p_bb = [0.1, 0.1, 0.3, 0.5];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0.0; 4];
        for _ in 0..20_000 {
            let dist = if rng.gen_bool(0.5) { &p_lex } else { &p_bb };
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let k = dist
                .iter()
                .position(|&p| {
                    acc += p;
                    u < acc
                })
                .unwrap_or(3);
            counts[k] += 1.0;
        }
        let s: Vec<BucketSample> = (0..4).map(|k| sample(4, counts[k], p_lex[k], p_bb[k])).collect();
        let l = fit_smoothing_weights(&s, &[0.0; 5]);
        assert!((l[4] - 0.5).abs() < 0.05, "{}", l[4]);
    }

    #[test]
    fn violators_are_pooled() {
        let s = [sample(1, 10.0, 1.0, 0.0), sample(2, 30.0, 0.0, 1.0)];
        let l = fit_smoothing_weights(&s, &[0.0, 0.3, 0.6, 0.8, 0.95]);
        assert!((l[1] - l[2]).abs() < 1e-12);
        assert!((l[1] - 0.25).abs() < 1e-3);
        assert!(l.windows(2).all(|w| w[0] <= w[1]));
    }

    proptest! {
        #[test]
        fn discount_is_normalized(
            counts in prop::collection::vec(0.001f64..50.0, 1..8),
            extra in 0usize..4,
            d in 0.0f64..0.99,
        ) {
            let mut c = BTreeMap::new();
            for (i, &x) in counts.iter().enumerate() {
                c.insert(i, x);
            }
            let support = counts.len() + extra;
            let backoff: BTreeMap<usize, f64> = (0..support).map(|i| (i, 1.0 / support as f64)).collect();
            let p = absolute_discount(&c, &backoff, d).unwrap();
            prop_assert!((p.values().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.values().all(|&v| v >= 0.0));
            if d > 0.0 {
                prop_assert!(p.values().all(|&v| v > 0.0));
            }
        }

        #[test]
        fn fitted_lambdas_are_monotone(
            raw in prop::collection::vec((0usize..5, 0.1f64..20.0, 0.0f64..1.0, 0.0f64..1.0), 0..20),
        ) {
            let s: Vec<BucketSample> = raw.iter().map(|&(b, c, pl, pb)| sample(b, c, pl, pb)).collect();
            let l = fit_smoothing_weights(&s, &[0.0, 0.3, 0.6, 0.8, 0.95]);
            prop_assert!(l.windows(2).all(|w| w[0] <= w[1] + 1e-12), "{l:?}");
            prop_assert!(l.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }
}
