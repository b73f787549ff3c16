use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use super::{CutoffTable, Frame, GoldLexicon, LexiconError};
use crate::symbol::Word;

/// Counts over (word, frame) pairs. Ratios with a zero denominator are
/// `None`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PrMetrics {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl PrMetrics {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |n: usize, d: usize| (d > 0).then(|| n as f64 / d as f64);
        PrMetrics {
            tp,
            fp,
            fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrReport {
    pub overall: PrMetrics,
    pub per_frame: BTreeMap<Frame, PrMetrics>,
    /// Words scored, i.e. those in both lexicons.
    pub words: usize,
}

/// Micro-averaged precision and recall over the words both lexicons list.
/// Only frames in `inventory` are scored; without one every frame either
/// side mentions counts.
pub fn precision_recall(
    proposed: &BTreeMap<Word, BTreeSet<Frame>>,
    gold: &GoldLexicon,
    inventory: Option<&BTreeSet<Frame>>,
) -> Result<PrReport, LexiconError> {
    let common: Vec<(&BTreeSet<Frame>, &BTreeSet<Frame>)> = proposed
        .iter()
        .filter_map(|(w, p)| gold.frames(w).map(|g| (p, g)))
        .collect();
    if common.is_empty() {
        return Err(LexiconError::EmptyIntersection);
    }
    let frames: BTreeSet<Frame> = match inventory {
        Some(inv) => inv.clone(),
        None => common.iter().flat_map(|(p, g)| p.iter().chain(g.iter())).cloned().collect(),
    };
    let mut counts: BTreeMap<&Frame, (usize, usize, usize)> = frames.iter().map(|f| (f, (0, 0, 0))).collect();
    for (p, g) in &common {
        for f in &frames {
            let c = counts.get_mut(f).unwrap();
            match (p.contains(f), g.contains(f)) {
                (true, true) => c.0 += 1,
                (true, false) => c.1 += 1,
                (false, true) => c.2 += 1,
                _ => {}
            }
        }
    }
    let (tp, fp, fn_) = counts
        .values()
        .fold((0, 0, 0), |a, c| (a.0 + c.0, a.1 + c.1, a.2 + c.2));
    Ok(PrReport {
        overall: PrMetrics::from_counts(tp, fp, fn_),
        per_frame: counts
            .into_iter()
            .map(|(f, (tp, fp, fn_))| (f.clone(), PrMetrics::from_counts(tp, fp, fn_)))
            .collect(),
        words: common.len(),
    })
}

/// Tab-separated rows `frame cutoff tp fp fn precision recall` with a
/// header and a closing `total` row. Absent ratios print as `-`.
pub fn format_report(report: &PrReport, cutoffs: &CutoffTable) -> String {
    let ratio = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
    let mut out = String::from("frame\tcutoff\ttp\tfp\tfn\tprecision\trecall\n");
    let mut row = |name: &str, cut: String, m: &PrMetrics| {
        let _ = writeln!(
            out,
            "{name}\t{cut}\t{}\t{}\t{}\t{}\t{}",
            m.tp,
            m.fp,
            m.fn_,
            ratio(m.precision),
            ratio(m.recall)
        );
    };
    for (f, m) in &report.per_frame {
        let cut = cutoffs.get(f).map_or("-".to_string(), |t| format!("{t:.4}"));
        row(&f.to_string(), cut, m);
    }
    row("total", "-".to_string(), &report.overall);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(names: &[&str]) -> BTreeSet<Frame> {
        names.iter().map(|n| n.parse().unwrap()).collect()
    }

    #[test]
    fn identical_lexicons_score_perfectly() {
        let mut gold = GoldLexicon::default();
        gold.insert(Word::new("a"), frames(&["np", "np pp"]));
        gold.insert(Word::new("b"), frames(&["intrans"]));
        let proposed: BTreeMap<Word, BTreeSet<Frame>> =
            gold.iter().map(|(w, f)| (w.clone(), f.clone())).collect();
        let r = precision_recall(&proposed, &gold, None).unwrap();
        assert_eq!(r.overall.precision, Some(1.0));
        assert_eq!(r.overall.recall, Some(1.0));
        assert_eq!(r.words, 2);
    }

    #[test]
    fn proposing_nothing_leaves_precision_absent() {
        let mut gold = GoldLexicon::default();
        gold.insert(Word::new("a"), frames(&["np"]));
        let proposed = BTreeMap::from([(Word::new("a"), BTreeSet::new())]);
        let r = precision_recall(&proposed, &gold, None).unwrap();
        assert_eq!(r.overall.precision, None);
        assert_eq!(r.overall.recall, Some(0.0));
    }

    #[test]
    fn inventory_restricts_scoring_and_disjoint_words_fail() {
        let mut gold = GoldLexicon::default();
        gold.insert(Word::new("a"), frames(&["np", "np that"]));
        let proposed = BTreeMap::from([(Word::new("a"), frames(&["np", "pp"]))]);
        let inv = frames(&["np", "pp"]);
        let r = precision_recall(&proposed, &gold, Some(&inv)).unwrap();
        assert_eq!((r.overall.tp, r.overall.fp, r.overall.fn_), (1, 1, 0));
        let other = BTreeMap::from([(Word::new("z"), frames(&["np"]))]);
        assert!(matches!(
            precision_recall(&other, &gold, None),
            Err(LexiconError::EmptyIntersection)
        ));
    }

    #[test]
    fn report_layout() {
        let r = PrReport {
            overall: PrMetrics::from_counts(1, 0, 1),
            per_frame: BTreeMap::from([("np".parse().unwrap(), PrMetrics::from_counts(1, 0, 1))]),
            words: 1,
        };
        let mut c = CutoffTable::new();
        c.set("np".parse().unwrap(), 0.021);
        let text = format_report(&r, &c);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "np\t0.0210\t1\t0\t1\t1.0000\t0.5000");
        assert_eq!(lines[2], "total\t-\t1\t0\t1\t1.0000\t0.5000");
    }
}
