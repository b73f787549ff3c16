//! Information-theoretic and statistical comparison of frame distributions.
//! All logarithms are base 2.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};
use thiserror::Error;

use crate::lexicon::{Frame, FrameDistribution};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("no positive count")]
    EmptyCounts,
    #[error("invalid distribution: {0}")]
    Invalid(String),
    #[error("outcome `{0}` has positive probability under p but zero under q")]
    SupportViolation(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("fewer than two outcomes remain after merging sparse cells")]
    TooFewOutcomes,
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// A finite probability distribution. Zero-probability outcomes are not
/// stored.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T: Ord> {
    probs: BTreeMap<T, f64>,
}

impl<T: Ord + Clone + fmt::Display> Distribution<T> {
    /// Values must be nonnegative and sum to 1 within 1e-9.
    pub fn new(probs: impl IntoIterator<Item = (T, f64)>) -> Result<Self, EvalError> {
        let mut map = BTreeMap::new();
        for (k, p) in probs {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(EvalError::Invalid(format!("p({k}) = {p}")));
            }
            if p > 0.0 {
                *map.entry(k).or_insert(0.0) += p;
            }
        }
        let total: f64 = map.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(EvalError::Invalid(format!("probabilities sum to {total}")));
        }
        Ok(Distribution { probs: map })
    }

    /// Relative frequencies.
    pub fn empirical(counts: impl IntoIterator<Item = (T, f64)>) -> Result<Self, EvalError> {
        let counts: Vec<(T, f64)> = counts.into_iter().collect();
        if let Some((k, c)) = counts.iter().find(|(_, c)| !(*c >= 0.0 && c.is_finite())) {
            return Err(EvalError::Invalid(format!("count({k}) = {c}")));
        }
        let total: f64 = counts.iter().map(|(_, c)| c).sum();
        if total <= 0.0 {
            return Err(EvalError::EmptyCounts);
        }
        Self::new(counts.into_iter().map(|(k, c)| (k, c / total)))
    }

    pub fn prob(&self, k: &T) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, f64)> {
        self.probs.iter().map(|(k, &p)| (k, p))
    }

    pub fn support(&self) -> impl Iterator<Item = &T> {
        self.probs.keys()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl Distribution<Frame> {
    pub fn from_frames(d: &FrameDistribution) -> Result<Self, EvalError> {
        Self::new(d.probs.iter().map(|(f, &p)| (f.clone(), p)))
    }
}

/// Anything that assigns a probability to an outcome.
pub trait ProbabilityModel<T> {
    fn probability(&self, k: &T) -> f64;
}

impl<T: Ord + Clone + fmt::Display> ProbabilityModel<T> for Distribution<T> {
    fn probability(&self, k: &T) -> f64 {
        self.prob(k)
    }
}

pub fn entropy<T: Ord + Clone + fmt::Display>(p: &Distribution<T>) -> f64 {
    -p.iter().map(|(_, x)| x * x.log2()).sum::<f64>()
}

pub fn relative_entropy<T: Ord + Clone + fmt::Display>(
    p: &Distribution<T>,
    q: &impl ProbabilityModel<T>,
) -> Result<f64, EvalError> {
    let mut d = 0.0;
    for (k, x) in p.iter() {
        let y = q.probability(k);
        if y <= 0.0 {
            return Err(EvalError::SupportViolation(k.to_string()));
        }
        d += x * (x / y).log2();
    }
    Ok(d)
}

pub fn cross_entropy<T: Ord + Clone + fmt::Display>(
    p: &Distribution<T>,
    q: &impl ProbabilityModel<T>,
) -> Result<f64, EvalError> {
    let mut ce = 0.0;
    for (k, x) in p.iter() {
        let y = q.probability(k);
        if y <= 0.0 {
            return Err(EvalError::SupportViolation(k.to_string()));
        }
        ce -= x * y.log2();
    }
    Ok(ce)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyReport {
    pub entropy: f64,
    pub relative_entropy: f64,
    pub cross_entropy: f64,
}

pub fn entropy_report<T: Ord + Clone + fmt::Display>(
    p: &Distribution<T>,
    q: &impl ProbabilityModel<T>,
) -> Result<EntropyReport, EvalError> {
    Ok(EntropyReport {
        entropy: entropy(p),
        relative_entropy: relative_entropy(p, q)?,
        cross_entropy: cross_entropy(p, q)?,
    })
}

/// Mixing weight of the Poisson component when none is given.
pub const DEFAULT_POISSON_MIX: f64 = 0.05;
/// Lower bound on the Poisson rate, so that frames longer than every
/// observed one still receive mass.
pub const MIN_POISSON_RATE: f64 = 0.1;

/// `q'(f) = (1 - mix) q(f) + mix Pois(|f|; λ) |A|^-|f|`, a proper
/// distribution over every finite frame spelled with the alphabet `A`.
#[derive(Debug, Clone)]
pub struct PoissonSmoothed {
    base: Distribution<Frame>,
    alphabet: BTreeSet<String>,
    mix: f64,
    poisson: Poisson,
}

impl PoissonSmoothed {
    pub fn lambda(&self) -> f64 {
        self.poisson.lambda()
    }

    pub fn mix(&self) -> f64 {
        self.mix
    }

    pub fn alphabet(&self) -> &BTreeSet<String> {
        &self.alphabet
    }

    pub fn base(&self) -> &Distribution<Frame> {
        &self.base
    }

    /// Probability of frame length `k` under the Poisson component.
    pub fn length_prob(&self, k: usize) -> f64 {
        self.poisson.pmf(k as u64)
    }

    /// The Poisson component's probability of `f`, zero when `f` uses a
    /// symbol outside the alphabet.
    pub fn backoff_prob(&self, f: &Frame) -> f64 {
        if f.complements().iter().any(|c| !self.alphabet.contains(c)) {
            return 0.0;
        }
        let a = self.alphabet.len() as f64;
        self.length_prob(f.len()) * a.powi(-(f.len() as i32))
    }

    pub fn prob(&self, f: &Frame) -> f64 {
        (1.0 - self.mix) * self.base.prob(f) + self.mix * self.backoff_prob(f)
    }

    /// Mass of the Poisson component on frames longer than `max_len`.
    pub fn tail_mass(&self, max_len: usize) -> f64 {
        let head: f64 = (0..=max_len).map(|k| self.length_prob(k)).sum();
        self.mix * (1.0 - head).max(0.0)
    }
}

impl ProbabilityModel<Frame> for PoissonSmoothed {
    fn probability(&self, k: &Frame) -> f64 {
        self.prob(k)
    }
}

/// Smooths `q` against a length-Poisson over frames spelled with
/// `alphabet`. The rate is the mean frame length under `q`, floored at
/// [`MIN_POISSON_RATE`]; symbols used by `q` join the alphabet.
pub fn poisson_smooth(
    q: &Distribution<Frame>,
    alphabet: &[String],
    mix: f64,
) -> Result<PoissonSmoothed, EvalError> {
    if q.is_empty() {
        return Err(EvalError::EmptyCounts);
    }
    if !(mix > 0.0 && mix < 1.0) {
        return Err(EvalError::Parameter(format!("mix must lie in (0, 1): {mix}")));
    }
    let mut alpha: BTreeSet<String> = alphabet.iter().map(|s| s.to_lowercase()).collect();
    alpha.extend(q.support().flat_map(|f| f.complements().iter().cloned()));
    if alpha.is_empty() {
        return Err(EvalError::Parameter("empty alphabet".into()));
    }
    let mean: f64 = q.iter().map(|(f, p)| p * f.len() as f64).sum();
    let poisson = Poisson::new(mean.max(MIN_POISSON_RATE))
        .map_err(|e| EvalError::Parameter(e.to_string()))?;
    Ok(PoissonSmoothed { base: q.clone(), alphabet: alpha, mix, poisson })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquaredResult {
    pub statistic: f64,
    pub dof: usize,
    pub critical_value: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Outcomes pooled into the `other` cell.
    pub merged: Vec<String>,
}

/// Pearson test of homogeneity on the 2×K table of two count vectors at the
/// 95% level. Outcomes whose expected count falls below 1 in either row are
/// pooled into one `other` cell; outcomes absent from both rows are
/// dropped.
pub fn chi_squared_genre<T: Ord + Clone + fmt::Display>(
    c1: &BTreeMap<T, f64>,
    c2: &BTreeMap<T, f64>,
) -> Result<ChiSquaredResult, EvalError> {
    let keys: BTreeSet<&T> = c1.keys().chain(c2.keys()).collect();
    let get = |m: &BTreeMap<T, f64>, k: &T| m.get(k).copied().unwrap_or(0.0);
    let n1: f64 = c1.values().sum();
    let n2: f64 = c2.values().sum();
    let n = n1 + n2;
    if n1 <= 0.0 || n2 <= 0.0 {
        return Err(EvalError::EmptyCounts);
    }
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut other = (0.0, 0.0);
    let mut merged = Vec::new();
    for k in keys {
        let (a, b) = (get(c1, k), get(c2, k));
        let col = a + b;
        if col <= 0.0 {
            continue;
        }
        if col * n1 / n < 1.0 || col * n2 / n < 1.0 {
            other.0 += a;
            other.1 += b;
            merged.push(k.to_string());
        } else {
            cells.push((a, b));
        }
    }
    if other.0 + other.1 > 0.0 {
        cells.push(other);
    }
    if cells.len() < 2 {
        return Err(EvalError::TooFewOutcomes);
    }
    let mut statistic = 0.0;
    for &(a, b) in &cells {
        let col = a + b;
        for (obs, row) in [(a, n1), (b, n2)] {
            let e = col * row / n;
            statistic += (obs - e).powi(2) / e;
        }
    }
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| EvalError::Parameter(e.to_string()))?;
    let critical_value = dist.inverse_cdf(0.95);
    Ok(ChiSquaredResult {
        statistic,
        dof,
        critical_value,
        p_value: 1.0 - dist.cdf(statistic),
        significant: statistic > critical_value,
        merged,
    })
}

/// Hand-judged samples, one `frame<TAB>sentence` per line. Blank lines and
/// `#` comments are skipped.
pub fn read_frame_samples(text: &str) -> Result<Vec<(Frame, String)>, EvalError> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim().is_empty() || l.trim_start().starts_with('#') {
            continue;
        }
        let (f, s) = l.split_once('\t').ok_or_else(|| EvalError::Syntax {
            line: i + 1,
            message: "expected `frame<TAB>sentence`".into(),
        })?;
        out.push((f.parse().unwrap(), s.trim().to_string()));
    }
    Ok(out)
}

pub fn frame_counts(samples: &[(Frame, String)]) -> BTreeMap<Frame, f64> {
    let mut m = BTreeMap::new();
    for (f, _) in samples {
        *m.entry(f.clone()).or_insert(0.0) += 1.0;
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyRow {
    pub head: String,
    pub label: String,
    pub entropy: f64,
    pub vs_other: Option<f64>,
    pub vs_model: Option<f64>,
}

/// Tab-separated `head label H D_other D_model` rows under a header.
/// Missing divergences print as `-`.
pub fn format_entropy_rows(rows: &[EntropyRow]) -> String {
    let opt = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
    let mut out = String::from("head\tlabel\tH\tD_other\tD_model\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.3}\t{}\t{}",
            r.head,
            r.label,
            r.entropy,
            opt(r.vs_other),
            opt(r.vs_model)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn d(pairs: &[(&str, f64)]) -> Distribution<String> {
        Distribution::new(pairs.iter().map(|(k, p)| (k.to_string(), *p))).unwrap()
    }

    #[test]
    fn empirical_distributions() {
        let u = Distribution::empirical([("a", 1.0), ("b", 1.0)]).unwrap();
        assert_eq!(u.prob(&"a"), 0.5);
        let point = Distribution::empirical([("a", 5.0)]).unwrap();
        assert_eq!(point.prob(&"a"), 1.0);
        assert_eq!(Distribution::empirical([("a", 0.0)]), Err(EvalError::EmptyCounts));
        assert!(Distribution::new([("a", 0.7)]).is_err());
    }

    #[test]
    fn textbook_values() {
        let u4 = d(&[("a", 0.25), ("b", 0.25), ("c", 0.25), ("d", 0.25)]);
        assert_eq!(entropy(&u4), 2.0);
        let p = d(&[("a", 1.0)]);
        let q = d(&[("a", 0.5), ("b", 0.5)]);
        assert_eq!(relative_entropy(&p, &q).unwrap(), 1.0);
        assert_eq!(cross_entropy(&q, &q).unwrap(), 1.0);
        assert_eq!(cross_entropy(&p, &u4).unwrap(), 2.0);
        assert_eq!(relative_entropy(&q, &q).unwrap(), 0.0);
        assert_eq!(
            relative_entropy(&q, &p),
            Err(EvalError::SupportViolation("b".into()))
        );
    }

    fn frame_dist(pairs: &[(&str, f64)]) -> Distribution<Frame> {
        Distribution::new(pairs.iter().map(|(k, p)| (k.parse().unwrap(), *p))).unwrap()
    }

    fn alphabet() -> Vec<String> {
        ["np", "pp", "vtop", "sbar"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn poisson_smoothing_covers_unseen_frames() {
        let q = frame_dist(&[("np", 0.6), ("np pp", 0.3), ("intrans", 0.1)]);
        let s = poisson_smooth(&q, &alphabet(), DEFAULT_POISSON_MIX).unwrap();
        assert!((s.lambda() - 1.2).abs() < 1e-12);
        let sbar: Frame = "sbar".parse().unwrap();
        assert!(s.prob(&sbar) > 0.0);
        // Mass over every frame up to length 3, plus the tail, is one.
        let a = s.alphabet().iter().cloned().collect::<Vec<_>>();
        let mut total = 0.0;
        let mut frames = vec![Frame::intrans()];
        for _ in 0..3 {
            let mut next = Vec::new();
            for f in &frames {
                total += s.prob(f);
                for c in &a {
                    let mut v = f.complements().to_vec();
                    v.push(c.clone());
                    next.push(Frame::new(&v));
                }
            }
            frames = next;
        }
        total += frames.iter().map(|f| s.prob(f)).sum::<f64>();
        assert!((total + s.tail_mass(3) - 1.0).abs() < 1e-9, "{total}");
        assert!(poisson_smooth(&q, &alphabet(), 0.0).is_err());
    }

    #[test]
    fn poisson_component_partial_sums_match_the_cumulative_distribution() {
        use statrs::distribution::DiscreteCDF;
        let q = frame_dist(&[("np", 0.5), ("np pp", 0.5)]);
        let s = poisson_smooth(&q, &alphabet(), 0.05).unwrap();
        let reference = Poisson::new(1.5).unwrap();
        for l in 0..6 {
            let summed: f64 = (0..=l).map(|k| s.length_prob(k)).sum();
            assert!((summed - reference.cdf(l as u64)).abs() < 1e-12);
        }
    }

    #[test]
    fn small_mix_approaches_the_base() {
        let q = frame_dist(&[("np", 0.6), ("intrans", 0.4)]);
        let s = poisson_smooth(&q, &alphabet(), 1e-9).unwrap();
        for (f, p) in q.iter() {
            assert!((s.prob(f) - p).abs() < 1e-8);
        }
    }

    fn counts(v: &[f64]) -> BTreeMap<usize, f64> {
        v.iter().copied().enumerate().collect()
    }

    #[test]
    fn chi_squared_basics() {
        let a = counts(&[10.0, 20.0, 30.0]);
        let r = chi_squared_genre(&a, &a).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!(!r.significant);
        assert_eq!(r.dof, 2);
        let b = counts(&[20.0, 15.0, 30.0]);
        let once = chi_squared_genre(&a, &b).unwrap().statistic;
        let a2 = counts(&[20.0, 40.0, 60.0]);
        let b2 = counts(&[40.0, 30.0, 60.0]);
        let twice = chi_squared_genre(&a2, &b2).unwrap().statistic;
        assert!((twice - 2.0 * once).abs() < 1e-9);
    }

    #[test]
    fn sparse_cells_are_pooled() {
        let a = counts(&[50.0, 40.0, 0.5, 0.2]);
        let b = counts(&[45.0, 44.0, 0.3, 0.0]);
        let r = chi_squared_genre(&a, &b).unwrap();
        assert_eq!(r.merged, ["2", "3"]);
        assert_eq!(r.dof, 2);
        let lone = counts(&[5.0]);
        assert_eq!(chi_squared_genre(&lone, &lone), Err(EvalError::TooFewOutcomes));
    }

    #[test]
    fn frame_samples() {
        let s = read_frame_samples("np vtop\tThey allowed him to go.\n\n# c\nnp\tx\nnp\ty\n").unwrap();
        let c = frame_counts(&s);
        assert_eq!(c[&"np".parse::<Frame>().unwrap()], 2.0);
        assert!(read_frame_samples("np no tab").is_err());
    }

    #[test]
    fn entropy_rows_layout() {
        let rows = [EntropyRow {
            head: "allow".into(),
            label: "imag".into(),
            entropy: 2.0563,
            vs_other: Some(0.5),
            vs_model: None,
        }];
        assert_eq!(format_entropy_rows(&rows).lines().nth(1).unwrap(), "allow\timag\t2.056\t0.500\t-");
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..8).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(0.01f64..1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn cross_entropy_decomposes((p, q) in pair()) {
            prop_assume!(p.iter().sum::<f64>() > 1e-6);
            let p = Distribution::empirical(p.into_iter().enumerate()).unwrap();
            let q = Distribution::empirical(q.into_iter().enumerate()).unwrap();
            let h = entropy(&p);
            let dv = relative_entropy(&p, &q).unwrap();
            let ce = cross_entropy(&p, &q).unwrap();
            prop_assert!(dv >= -1e-12);
            prop_assert!((ce - h - dv).abs() < 1e-12);
            prop_assert_eq!(relative_entropy(&p, &p).unwrap(), 0.0);
        }

        #[test]
        fn entropy_ignores_labels(v in proptest::collection::vec(0.01f64..1.0, 1..8)) {
            let a = Distribution::empirical(v.iter().copied().enumerate()).unwrap();
            let b = Distribution::empirical(v.iter().copied().enumerate().map(|(i, c)| (100 - i, c))).unwrap();
            prop_assert!((entropy(&a) - entropy(&b)).abs() < 1e-12);
        }
    }
}
