//! Subcategorization frames read off a trained model, probability cutoffs,
//! and evaluation against a gold dictionary.

mod cutoffs;
mod gold;
mod metrics;

pub use cutoffs::{apply_cutoffs, find_cutoffs, CutoffTable};
pub use gold::{FrameMapping, GoldLexicon};
pub use metrics::{format_report, precision_recall, PrMetrics, PrReport};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::estimation::{inside_outside, LexPcfg};
use crate::grammar::HeadedGrammar;
use crate::parser::{lexicalize_forest, parse_with, ParseOptions, Sentence};
use crate::symbol::{Cat, RuleId, Word};

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("proposed and gold lexicons share no word")]
    EmptyIntersection,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The non-head daughters of a rule, lowercased and in order. The empty
/// frame prints as `intrans`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frame(Vec<String>);

impl Frame {
    pub fn new<S: AsRef<str>>(complements: &[S]) -> Self {
        Frame(complements.iter().map(|c| c.as_ref().to_lowercase()).collect())
    }

    pub fn intrans() -> Self {
        Frame(Vec::new())
    }

    pub fn of_rule(g: &HeadedGrammar, rule: RuleId) -> Self {
        let r = g.rule(rule);
        Frame::new(&r.complements().map(|c| g.name(c)).collect::<Vec<_>>())
    }

    pub fn complements(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            f.write_str("intrans")
        } else {
            f.write_str(&self.0.join(" "))
        }
    }
}

impl FromStr for Frame {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.is_empty() || (parts.len() == 1 && parts[0].eq_ignore_ascii_case("intrans")) {
            Ok(Frame::intrans())
        } else {
            Ok(Frame::new(&parts))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameDistribution {
    pub head: Word,
    pub cat: Cat,
    pub probs: BTreeMap<Frame, f64>,
    /// Set when the model has no data for `(head, cat)` and the
    /// distribution is the backbone's.
    pub backed_off: bool,
}

impl FrameDistribution {
    pub fn prob(&self, f: &Frame) -> f64 {
        self.probs.get(f).copied().unwrap_or(0.0)
    }
}

/// Marginalizes `p(rule | w, cat)` onto frames.
pub fn frame_distribution(p: &LexPcfg, w: &Word, cat: Cat) -> FrameDistribution {
    let g = p.grammar();
    let mut probs = BTreeMap::new();
    for (r, prob) in p.rule_distribution(w, cat) {
        *probs.entry(Frame::of_rule(g, r)).or_insert(0.0) += prob;
    }
    FrameDistribution {
        head: w.clone(),
        cat,
        probs,
        backed_off: p.pair_frequency(w, cat) == 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameCounts {
    pub counts: BTreeMap<Frame, f64>,
    /// Tokens of the word in the parsed sentences.
    pub occurrences: usize,
    pub skipped: usize,
}

impl FrameCounts {
    pub fn total(&self) -> f64 {
        self.counts.values().sum()
    }
}

/// Expected frame counts of `w` heading `cat`, summed over the parses of
/// `sentences`. Sentences without a parse are skipped and counted.
pub fn extract_frequencies(p: &LexPcfg, sentences: &[Sentence], w: &Word, cat: Cat) -> FrameCounts {
    let g = p.grammar();
    let mut out = FrameCounts::default();
    for s in sentences {
        let counts = parse_with(s, g, ParseOptions::default())
            .ok()
            .and_then(|f| inside_outside(&lexicalize_forest(f), g, p).ok());
        let Some(sc) = counts else {
            out.skipped += 1;
            continue;
        };
        out.occurrences += s.words().filter(|x| *x == w).count();
        for (e, c) in sc.counts.rules() {
            if &e.head == w && g.rule(e.rule).lhs == cat {
                *out.counts.entry(Frame::of_rule(g, e.rule)).or_insert(0.0) += c;
            }
        }
    }
    out
}

/// Every frame some rule expanding `cat` yields.
pub fn frames_of(g: &HeadedGrammar, cat: Cat) -> Vec<Frame> {
    let mut v: Vec<Frame> = g.rules_with_lhs(cat).iter().map(|&r| Frame::of_rule(g, r)).collect();
    v.sort();
    v.dedup();
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{m_step, MStepOptions, SmoothingConfig};
    use crate::events::{tree_events, EventCounts, LabeledTree};
    use crate::grammar::parse_grammar;
    use std::sync::Arc;

    fn grammar() -> Arc<HeadedGrammar> {
        Arc::new(
            parse_grammar(
                "start VFP;\nVFP -> VFC' | VFC' NP | VFC' NP PP;\nNP -> N' | N' PP;\nPP -> P' NP;\nVFC -> V';\n\
                 asked : V; saw : V; man : N; park : N; in : P;",
            )
            .unwrap(),
        )
    }

    fn model(trees: &[&str]) -> LexPcfg {
        let g = grammar();
        let mut c = EventCounts::new();
        for t in trees {
            c.merge(&tree_events(&LabeledTree::parse_bracketed(t, &g).unwrap(), &g).unwrap());
        }
        let cfg = SmoothingConfig::frozen();
        m_step(&c, &LexPcfg::uniform(g, cfg.clone()), &cfg, MStepOptions { epsilon: 0.0 }).unwrap()
    }

    const ASKED_NP: &str = "(VFP^asked (VFC^asked (V^asked)) (NP^man (N^man)))";
    const ASKED: &str = "(VFP^asked (VFC^asked (V^asked)))";

    #[test]
    fn frame_text_forms() {
        assert_eq!(Frame::intrans().to_string(), "intrans");
        assert_eq!("np pp".parse::<Frame>().unwrap(), Frame::new(&["NP", "PP"]));
        assert_eq!("intrans".parse::<Frame>().unwrap(), Frame::intrans());
        let g = grammar();
        let vfp = g.lookup("VFP").unwrap();
        let names: Vec<String> = frames_of(&g, vfp).iter().map(|f| f.to_string()).collect();
        assert_eq!(names, ["intrans", "np", "np pp"]);
    }

    #[test]
    fn single_rule_gives_a_point_mass() {
        let m = model(&[ASKED_NP]);
        let vfp = m.grammar().lookup("VFP").unwrap();
        let d = frame_distribution(&m, &Word::new("asked"), vfp);
        assert_eq!(d.prob(&"np".parse().unwrap()), 1.0);
        assert!(!d.backed_off);
        assert!((d.probs.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rules_marginalize_onto_frames() {
        let mut trees = vec![ASKED; 3];
        trees.extend([ASKED_NP; 7]);
        let m = model(&trees);
        let vfp = m.grammar().lookup("VFP").unwrap();
        let d = frame_distribution(&m, &Word::new("asked"), vfp);
        assert!((d.prob(&Frame::intrans()) - 0.3).abs() < 1e-12);
        assert!((d.prob(&"np".parse().unwrap()) - 0.7).abs() < 1e-12);
        let unseen = frame_distribution(&m, &Word::new("told"), vfp);
        assert!(unseen.backed_off);
    }

    #[test]
    fn ambiguous_attachment_splits_the_count() {
        let m = model(&[
            "(VFP^saw (VFC^saw (V^saw)) (NP^man (N^man)) (PP^in (P^in) (NP^park (N^park))))",
            "(VFP^saw (VFC^saw (V^saw)) (NP^man (N^man) (PP^in (P^in) (NP^park (N^park)))))",
        ]);
        let s = Sentence::parse_line("saw/V man/N in/P park/N").unwrap();
        let vfp = m.grammar().lookup("VFP").unwrap();
        let fc = extract_frequencies(&m, &[s.clone(), s], &Word::new("saw"), vfp);
        assert!((fc.counts[&"np pp".parse().unwrap()] - 1.0).abs() < 1e-12);
        assert!((fc.counts[&"np".parse().unwrap()] - 1.0).abs() < 1e-12);
        assert!(fc.total() <= fc.occurrences as f64 + 1e-12);
    }

    #[test]
    fn unambiguous_sentence_counts_one_frame() {
        let m = model(&[ASKED_NP]);
        let s = Sentence::parse_line("asked/V man/N").unwrap();
        let bad = Sentence::parse_line("man/N").unwrap();
        let vfp = m.grammar().lookup("VFP").unwrap();
        let fc = extract_frequencies(&m, &[s, bad], &Word::new("asked"), vfp);
        assert_eq!(fc.counts.len(), 1);
        assert!((fc.counts[&"np".parse().unwrap()] - 1.0).abs() < 1e-12);
        assert_eq!(fc.skipped, 1);
    }
}
