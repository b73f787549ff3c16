use std::collections::{BTreeMap, BTreeSet};

use super::metrics::PrMetrics;
use super::{Frame, FrameDistribution, GoldLexicon};
use crate::symbol::Word;

/// Per-frame probability thresholds, shared by every head word.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CutoffTable {
    thresholds: BTreeMap<Frame, f64>,
}

impl CutoffTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// A table giving every listed frame the same threshold.
    pub fn uniform<'a>(frames: impl IntoIterator<Item = &'a Frame>, t: f64) -> Self {
        let mut c = Self::new();
        for f in frames {
            c.set(f.clone(), t);
        }
        c
    }

    /// Clamps `t` into `[0, 1]`.
    pub fn set(&mut self, f: Frame, t: f64) {
        self.thresholds.insert(f, t.clamp(0.0, 1.0));
    }

    pub fn get(&self, f: &Frame) -> Option<f64> {
        self.thresholds.get(f).copied()
    }

    /// Missing frames get threshold 1.
    pub fn threshold(&self, f: &Frame) -> f64 {
        self.get(f).unwrap_or(1.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Frame, f64)> {
        self.thresholds.iter().map(|(f, &t)| (f, t))
    }

    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }
}

/// Frames with positive probability reaching their threshold. The second
/// component lists frames of `d` the table has no entry for; they are
/// treated as threshold 1.
pub fn apply_cutoffs(d: &FrameDistribution, c: &CutoffTable) -> (BTreeSet<Frame>, Vec<Frame>) {
    let mut missing = Vec::new();
    let mut out = BTreeSet::new();
    for (f, &p) in &d.probs {
        let t = c.get(f).unwrap_or_else(|| {
            missing.push(f.clone());
            1.0
        });
        if p > 0.0 && p >= t {
            out.insert(f.clone());
        }
    }
    (out, missing)
}

fn sweep_point(dev: &[(&FrameDistribution, bool)], f: &Frame, t: f64) -> PrMetrics {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (d, gold) in dev {
        let p = d.prob(f);
        match (p > 0.0 && p >= t, *gold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    PrMetrics::from_counts(tp, fp, fn_)
}

/// Chooses per frame the threshold at which precision and recall cross on
/// the development words, preferring the best precision when the curves
/// cross more than once. Without a crossing the point with the smallest gap
/// wins. Dev words missing from `gold` are ignored.
pub fn find_cutoffs(dev: &BTreeMap<Word, FrameDistribution>, gold: &GoldLexicon) -> CutoffTable {
    let frames: BTreeSet<&Frame> = dev.values().flat_map(|d| d.probs.keys()).collect();
    let mut table = CutoffTable::new();
    for f in frames {
        let labelled: Vec<(&FrameDistribution, bool)> = dev
            .iter()
            .filter_map(|(w, d)| gold.frames(w).map(|g| (d, g.contains(f))))
            .collect();
        let mut candidates: Vec<f64> = labelled.iter().map(|(d, _)| d.prob(f)).collect();
        candidates.extend([0.0, 1.0]);
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();

        let points: Vec<(f64, PrMetrics)> = candidates
            .iter()
            .map(|&t| (t, sweep_point(&labelled, f, t)))
            .collect();
        let gap = |m: &PrMetrics| Some(m.precision? - m.recall?);
        let defined: Vec<(f64, f64, &PrMetrics)> = points
            .iter()
            .filter_map(|(t, m)| gap(m).map(|g| (*t, g, m)))
            .collect();

        let mut crossings: Vec<(f64, &PrMetrics)> = Vec::new();
        for (i, &(t, g, m)) in defined.iter().enumerate() {
            if g == 0.0 {
                crossings.push((t, m));
            }
            if let Some(&(t2, g2, m2)) = defined.get(i + 1) {
                if g * g2 < 0.0 {
                    crossings.push((t, m));
                    crossings.push((t2, m2));
                }
            }
        }
        let better = |a: &(f64, &PrMetrics), b: &(f64, &PrMetrics)| {
            let key = |x: &(f64, &PrMetrics)| (x.1.precision.unwrap_or(0.0), x.1.recall.unwrap_or(0.0), x.0);
            let (ka, kb) = (key(a), key(b));
            ka.0.total_cmp(&kb.0)
                .then(ka.1.total_cmp(&kb.1))
                .then(ka.2.total_cmp(&kb.2))
        };
        let pick = if !crossings.is_empty() {
            crossings.into_iter().max_by(|a, b| better(a, b)).map(|x| x.0)
        } else {
            defined
                .iter()
                .max_by(|a, b| {
                    b.1.abs()
                        .total_cmp(&a.1.abs())
                        .then_with(|| better(&(a.0, a.2), &(b.0, b.2)))
                })
                .map(|x| x.0)
        };
        table.set(f.clone(), pick.unwrap_or(1.0));
    }
    table
}
