use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::model::{head_distribution, lexicon_heads, Backed};
use super::smoothing::{discount_parts, estimate_discount};
use super::{DiscountSetting, EstimationError, LexPcfg, LexicalBackoff, SmoothingConfig};
use crate::events::EventCounts;
use crate::symbol::{Cat, Word};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MStepOptions {
    /// Pseudo-count added to every rule of the backbone.
    pub epsilon: f64,
}

impl Default for MStepOptions {
    fn default() -> Self {
        MStepOptions { epsilon: 0.5 }
    }
}

/// Re-estimates every table from aggregated expected counts. The grammar
/// and the head vocabularies are carried over from `prev`.
pub fn m_step(
    total: &EventCounts,
    prev: &LexPcfg,
    cfg: &SmoothingConfig,
    opts: MStepOptions,
) -> Result<LexPcfg, EstimationError> {
    if total.is_empty() {
        return Err(EstimationError::EmptyCounts);
    }
    cfg.validate()?;
    if !(opts.epsilon >= 0.0 && opts.epsilon.is_finite()) {
        return Err(EstimationError::InvalidConfig(format!(
            "rule floor must be nonnegative: {}",
            opts.epsilon
        )));
    }
    let g = prev.grammar_arc().clone();

    // Rule backbone and lexicalized rule tables.
    let mut backbone_counts = vec![0.0; g.rules().len()];
    let mut lexical_rules: BTreeMap<(Word, Cat), Vec<f64>> = BTreeMap::new();
    let mut pair_freq: BTreeMap<(Word, Cat), f64> = BTreeMap::new();
    for (e, c) in total.rules() {
        let r = g.rule(e.rule);
        backbone_counts[e.rule.index()] += c;
        let slots = g.rules_with_lhs(r.lhs).len();
        lexical_rules
            .entry((e.head.clone(), r.lhs))
            .or_insert_with(|| vec![0.0; slots])[g.slot_in_lhs(e.rule)] += c;
        *pair_freq.entry((e.head.clone(), r.lhs)).or_insert(0.0) += c;
        if !g.is_nonterminal(r.head) {
            *pair_freq.entry((e.head.clone(), r.head)).or_insert(0.0) += c;
        }
    }
    let mut backbone = vec![0.0; g.rules().len()];
    for n in g.nonterminals() {
        let ids = g.rules_with_lhs(n);
        let mass: f64 = ids.iter().map(|r| backbone_counts[r.index()]).sum::<f64>()
            + opts.epsilon * ids.len() as f64;
        for &r in ids {
            backbone[r.index()] = if mass > 0.0 {
                ((backbone_counts[r.index()] + opts.epsilon) / mass).ln()
            } else {
                -(ids.len() as f64).ln()
            };
        }
    }
    let mut rule_table = HashMap::new();
    for ((w, n), counts) in lexical_rules {
        let f: f64 = counts.iter().sum();
        let lambda = cfg.lambda_for(f);
        if lambda == 0.0 {
            continue;
        }
        let ids = g.rules_with_lhs(n);
        let dist: Vec<f64> = counts
            .iter()
            .zip(ids)
            .map(|(&c, r)| (lambda * c / f + (1.0 - lambda) * backbone[r.index()].exp()).ln())
            .collect();
        rule_table.insert((w, n), dist);
    }

    // Lexical-choice counts at the three back-off levels.
    let mut by_head: HashMap<Cat, BTreeMap<Word, f64>> = HashMap::new();
    let mut by_pair: BTreeMap<(Cat, Cat), BTreeMap<Word, f64>> = BTreeMap::new();
    let mut by_context: BTreeMap<(Word, Cat, Cat), BTreeMap<Word, f64>> = BTreeMap::new();
    for (e, c) in total.lexicals() {
        *by_head.entry(e.child_cat).or_default().entry(e.child_head.clone()).or_insert(0.0) += c;
        *by_pair
            .entry((e.parent_cat, e.child_cat))
            .or_default()
            .entry(e.child_head.clone())
            .or_insert(0.0) += c;
        *by_context
            .entry((e.parent_head.clone(), e.parent_cat, e.child_cat))
            .or_default()
            .entry(e.child_head.clone())
            .or_insert(0.0) += c;
    }
    let d = match cfg.discount {
        DiscountSetting::Fixed(d) => d,
        DiscountSetting::Estimate { fallback } => {
            estimate_discount(by_context.values().flat_map(|m| m.values().copied()), fallback)
        }
    };

    let mut vocab = lexicon_heads(&g);
    for (&x, dist) in &prev.head_unigram {
        let set = vocab.entry(x).or_default();
        set.extend(dist.keys().filter(|w| w.as_str() != crate::symbol::UNKNOWN_WORD).cloned());
    }
    for (&x, counts) in &by_head {
        vocab.entry(x).or_default().extend(counts.keys().cloned());
    }
    let mut cats: BTreeSet<Cat> = g.nonterminals().collect();
    cats.extend(vocab.keys().copied());
    let empty = BTreeMap::new();
    let head_unigram = cats
        .into_iter()
        .map(|x| {
            let v = vocab.remove(&x).unwrap_or_default();
            (x, head_distribution(by_head.get(&x).unwrap_or(&empty), &v, d))
        })
        .collect();

    let mut model = LexPcfg {
        grammar: g,
        smoothing: cfg.clone(),
        discount: d,
        rule_backbone: backbone,
        rule_table,
        head_unigram,
        lex_backbone: HashMap::new(),
        lex_table: HashMap::new(),
        pair_freq,
    };

    let mut lex_backbone = HashMap::with_capacity(by_pair.len());
    for ((n, x), counts) in &by_pair {
        let (explicit, gamma) = discount_parts(counts, d).ok_or(EstimationError::EmptyCounts)?;
        let explicit = explicit
            .into_iter()
            .map(|(v, p)| {
                let lp = (p + gamma * model.head_logp(*x, &v).exp()).ln();
                (v, lp)
            })
            .collect();
        lex_backbone.insert(
            (*n, *x),
            Backed {
                explicit,
                log_gamma: gamma.ln(),
            },
        );
    }
    model.lex_backbone = lex_backbone;

    let mut lex_table = HashMap::with_capacity(by_context.len());
    for ((w, n, x), counts) in &by_context {
        let (explicit, gamma) = match cfg.lexical_backoff {
            LexicalBackoff::Discount => {
                discount_parts(counts, d).ok_or(EstimationError::EmptyCounts)?
            }
            LexicalBackoff::Interpolate => {
                let mass: f64 = counts.values().sum();
                let lambda = cfg.lambda_for(mass);
                let explicit = counts.iter().map(|(v, &c)| (v.clone(), lambda * c / mass)).collect();
                (explicit, 1.0 - lambda)
            }
        };
        let explicit = explicit
            .into_iter()
            .map(|(v, p)| {
                let lp = (p + gamma * model.backoff_logp(*n, *x, &v).exp()).ln();
                (v, lp)
            })
            .collect();
        lex_table.insert(
            (w.clone(), *n, *x),
            Backed {
                explicit,
                log_gamma: gamma.ln(),
            },
        );
    }
    model.lex_table = lex_table;
    Ok(model)
}
