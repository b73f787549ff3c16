//! Inside and outside scores over a lexicalized forest, in the log domain.

use super::{log_add, log_sum, EstimationError};
use crate::events::{EventCounts, EventWeights, LexicalEvent, RuleEvent};
use crate::grammar::HeadedGrammar;
use crate::parser::LexForest;
use crate::symbol::{Cat, Word};

/// Inside log-scores of every lexicalized item, the per-and-node log-sums
/// over non-head daughter versions, and the sentence log-probability.
#[derive(Debug, Clone)]
pub struct InsideChart {
    pub inside: Vec<f64>,
    /// For each item and and-node, the log-sum over each non-head child's
    /// versions of lexical choice times inside; zero at the head position.
    pub side: Vec<Vec<Vec<f64>>>,
    pub log_z: f64,
}

#[derive(Debug, Clone)]
pub struct SentenceCounts {
    pub counts: EventCounts,
    pub log_inside: f64,
}

fn child_sum(f: &LexForest, w: &impl EventWeights, head: &Word, parent: Cat, child: usize, ins: &[f64]) -> f64 {
    let child_cat = f.forest().item(child).cat;
    log_sum(f.versions(child).iter().map(|&v| {
        w.lexical_logp(head, parent, child_cat, &f.item(v).head) + ins[v]
    }))
}

pub fn inside(f: &LexForest, g: &HeadedGrammar, w: &impl EventWeights) -> InsideChart {
    let n = f.items().len();
    let mut ins = vec![f64::NEG_INFINITY; n];
    let mut side = Vec::with_capacity(n);
    for id in 0..n {
        let li = f.item(id);
        let ands = f.ands(id);
        if ands.is_empty() {
            ins[id] = 0.0;
            side.push(Vec::new());
            continue;
        }
        let cat = f.forest().item(li.item).cat;
        let mut sides = Vec::with_capacity(ands.len());
        let mut total = f64::NEG_INFINITY;
        for a in ands {
            let s: Vec<f64> = a
                .children
                .iter()
                .enumerate()
                .map(|(k, &c)| {
                    if k == a.head {
                        0.0
                    } else {
                        child_sum(f, w, &li.head, cat, c, &ins)
                    }
                })
                .collect();
            let term = w.rule_logp(&li.head, a.rule) + ins[a.head_child] + s.iter().sum::<f64>();
            total = log_add(total, term);
            sides.push(s);
        }
        ins[id] = total;
        side.push(sides);
    }
    let top = Word::top();
    let log_z = log_sum(f.roots().iter().map(|&r| {
        w.lexical_logp(&top, Cat::START, g.start(), &f.item(r).head) + ins[r]
    }));
    InsideChart {
        inside: ins,
        side,
        log_z,
    }
}

/// Expected event counts given the sentence, `Σ_τ P(τ|σ) c_τ(z)`.
pub fn inside_outside(f: &LexForest, g: &HeadedGrammar, w: &impl EventWeights) -> Result<SentenceCounts, EstimationError> {
    let chart = inside(f, g, w);
    let z = chart.log_z;
    if !z.is_finite() {
        return Err(EstimationError::ZeroInside);
    }
    let ins = &chart.inside;
    let mut out = vec![f64::NEG_INFINITY; ins.len()];
    let mut counts = EventCounts::new();
    let top = Word::top();
    for &r in f.roots() {
        let head = &f.item(r).head;
        let lp = w.lexical_logp(&top, Cat::START, g.start(), head);
        out[r] = lp;
        counts.add_lexical(LexicalEvent::root(g.start(), head.clone()), (lp + ins[r] - z).exp());
    }
    for id in (0..ins.len()).rev() {
        if out[id] == f64::NEG_INFINITY || ins[id] == f64::NEG_INFINITY {
            continue;
        }
        let li = f.item(id);
        let cat = f.forest().item(li.item).cat;
        for (a, s) in f.ands(id).iter().zip(&chart.side[id]) {
            let rule_lp = w.rule_logp(&li.head, a.rule);
            let side_total: f64 = s.iter().sum();
            let base = out[id] + rule_lp + ins[a.head_child] + side_total;
            if base == f64::NEG_INFINITY {
                continue;
            }
            counts.add_rule(
                RuleEvent {
                    head: li.head.clone(),
                    rule: a.rule,
                },
                (base - z).exp(),
            );
            out[a.head_child] = log_add(out[a.head_child], base - ins[a.head_child]);
            for (k, &c) in a.children.iter().enumerate() {
                if k == a.head {
                    continue;
                }
                let child_cat = f.forest().item(c).cat;
                let rest = base - s[k];
                for &v in f.versions(c) {
                    let vh = &f.item(v).head;
                    let lp = w.lexical_logp(&li.head, cat, child_cat, vh);
                    out[v] = log_add(out[v], rest + lp);
                    counts.add_lexical(
                        LexicalEvent {
                            parent_head: li.head.clone(),
                            parent_cat: cat,
                            child_cat,
                            child_head: vh.clone(),
                        },
                        (rest + lp + ins[v] - z).exp(),
                    );
                }
            }
        }
    }
    counts.prune(1e-12);
    Ok(SentenceCounts {
        counts,
        log_inside: z,
    })
}

/// `Σ log P(σ)` over the forests.
pub fn corpus_log_likelihood<'a>(
    forests: impl IntoIterator<Item = &'a LexForest>,
    g: &HeadedGrammar,
    w: &impl EventWeights,
) -> Result<f64, EstimationError> {
    let mut total = 0.0;
    for f in forests {
        let z = inside(f, g, w).log_z;
        if !z.is_finite() {
            return Err(EstimationError::ZeroInside);
        }
        total += z;
    }
    Ok(total)
}
