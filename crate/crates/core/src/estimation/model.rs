use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use super::smoothing::discount_parts;
use super::{DiscountSetting, SmoothingConfig};
use crate::events::EventWeights;
use crate::grammar::{HeadedGrammar, LexicalizedNonterminal};
use crate::parser::Sentence;
use crate::symbol::{Cat, RuleId, Word};

/// A distribution given by explicit log-probabilities for some outcomes and
/// a scaled back-off distribution for the rest.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Backed {
    pub explicit: HashMap<Word, f64>,
    pub log_gamma: f64,
}

/// A head-lexicalized PCFG. All probabilities are stored as natural logs.
///
/// Rule choice for `(w, n)` interpolates a lexicalized estimate with the
/// per-category backbone. Lexical choice backs off from `(w, n, x)` to
/// `(n, x)` to the head unigram of `x`, whose support is the words seen
/// heading `x` plus `<UNK>`.
#[derive(Debug, Clone)]
pub struct LexPcfg {
    pub(super) grammar: Arc<HeadedGrammar>,
    pub(super) smoothing: SmoothingConfig,
    pub(super) discount: f64,
    pub(super) rule_backbone: Vec<f64>,
    pub(super) rule_table: HashMap<(Word, Cat), Vec<f64>>,
    pub(super) head_unigram: HashMap<Cat, HashMap<Word, f64>>,
    pub(super) lex_backbone: HashMap<(Cat, Cat), Backed>,
    pub(super) lex_table: HashMap<(Word, Cat, Cat), Backed>,
    pub(super) pair_freq: BTreeMap<(Word, Cat), f64>,
}

impl PartialEq for LexPcfg {
    fn eq(&self, other: &Self) -> bool {
        self.smoothing == other.smoothing
            && self.discount.to_bits() == other.discount.to_bits()
            && self.rule_backbone == other.rule_backbone
            && self.rule_table == other.rule_table
            && self.head_unigram == other.head_unigram
            && self.lex_backbone == other.lex_backbone
            && self.lex_table == other.lex_table
            && self.pair_freq == other.pair_freq
            && (Arc::ptr_eq(&self.grammar, &other.grammar)
                || self.grammar.to_dsl() == other.grammar.to_dsl())
    }
}

/// Head words that the grammar's lexicon lets project to each category.
pub(super) fn lexicon_heads(g: &HeadedGrammar) -> HashMap<Cat, BTreeSet<Word>> {
    let mut out: HashMap<Cat, BTreeSet<Word>> = HashMap::new();
    for (w, tags) in g.lexicon() {
        for &t in tags {
            for &x in g.projections_of(t) {
                out.entry(x).or_default().insert(w.clone());
            }
        }
    }
    out
}

/// Smooths head counts against a uniform distribution over `vocab ∪ {<UNK>}`.
pub(super) fn head_distribution(
    counts: &BTreeMap<Word, f64>,
    vocab: &BTreeSet<Word>,
    d: f64,
) -> HashMap<Word, f64> {
    let unk = Word::unknown();
    let support = vocab.len() + usize::from(!vocab.contains(&unk));
    let uniform = 1.0 / support as f64;
    let mut out = HashMap::with_capacity(support);
    let parts = if counts.values().sum::<f64>() > 0.0 {
        discount_parts(counts, d)
    } else {
        None
    };
    for v in vocab.iter().chain(std::iter::once(&unk)) {
        let p = match &parts {
            Some((explicit, gamma)) => explicit.get(v).copied().unwrap_or(0.0) + gamma * uniform,
            None => uniform,
        };
        out.insert(v.clone(), p.ln());
    }
    out
}

impl LexPcfg {
    /// Uniform backbone and uniform head unigrams over the lexicon.
    pub fn uniform(grammar: Arc<HeadedGrammar>, smoothing: SmoothingConfig) -> Self {
        Self::initial(grammar, &[], smoothing)
    }

    /// Uniform backbone; head unigrams from the corpus' `(word, tag)`
    /// frequencies, each token's mass split evenly over its admissible tags
    /// and propagated to every category those tags project to.
    pub fn initial(grammar: Arc<HeadedGrammar>, corpus: &[Sentence], smoothing: SmoothingConfig) -> Self {
        let g = &*grammar;
        let rule_backbone = g
            .rule_ids()
            .map(|id| -(g.rules_with_lhs(g.rule(id).lhs).len() as f64).ln())
            .collect();
        let mut vocab = lexicon_heads(g);
        let mut counts: HashMap<Cat, BTreeMap<Word, f64>> = HashMap::new();
        for s in corpus {
            for tok in &s.tokens {
                let mut tags: Vec<Cat> = tok
                    .tags
                    .iter()
                    .filter_map(|t| g.lookup(t))
                    .filter(|&c| !g.is_nonterminal(c))
                    .filter(|c| g.tags_of(tok.word.as_str()).is_none_or(|lex| lex.contains(c)))
                    .collect();
                tags.sort();
                tags.dedup();
                let share = 1.0 / tags.len() as f64;
                for t in tags {
                    for &x in g.projections_of(t) {
                        *counts.entry(x).or_default().entry(tok.word.clone()).or_insert(0.0) += share;
                        vocab.entry(x).or_default().insert(tok.word.clone());
                    }
                }
            }
        }
        let d = match smoothing.discount {
            DiscountSetting::Fixed(d) => d,
            DiscountSetting::Estimate { fallback } => fallback,
        };
        let empty_counts = BTreeMap::new();
        let empty_vocab = BTreeSet::new();
        let head_unigram = g
            .nonterminals()
            .map(|x| {
                let c = counts.get(&x).unwrap_or(&empty_counts);
                let v = vocab.get(&x).unwrap_or(&empty_vocab);
                (x, head_distribution(c, v, d))
            })
            .collect();
        LexPcfg {
            grammar,
            smoothing,
            discount: d,
            rule_backbone,
            rule_table: HashMap::new(),
            head_unigram,
            lex_backbone: HashMap::new(),
            lex_table: HashMap::new(),
            pair_freq: BTreeMap::new(),
        }
    }

    pub fn grammar(&self) -> &HeadedGrammar {
        &self.grammar
    }

    pub fn grammar_arc(&self) -> &Arc<HeadedGrammar> {
        &self.grammar
    }

    pub fn smoothing(&self) -> &SmoothingConfig {
        &self.smoothing
    }

    /// The discount in effect when this model was estimated.
    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn rule_prob(&self, head: &Word, rule: RuleId) -> f64 {
        self.rule_logp(head, rule).exp()
    }

    /// `p(r | head, lhs)` for every rule expanding `lhs`, in declaration order.
    pub fn rule_distribution(&self, head: &Word, lhs: Cat) -> Vec<(RuleId, f64)> {
        self.grammar
            .rules_with_lhs(lhs)
            .iter()
            .map(|&r| (r, self.rule_prob(head, r)))
            .collect()
    }

    pub fn backbone_distribution(&self, lhs: Cat) -> Vec<(RuleId, f64)> {
        self.grammar
            .rules_with_lhs(lhs)
            .iter()
            .map(|&r| (r, self.rule_backbone[r.index()].exp()))
            .collect()
    }

    pub fn has_lexicalized_rules(&self, head: &Word, lhs: Cat) -> bool {
        self.rule_table.contains_key(&(head.clone(), lhs))
    }

    /// Expected frequency of `word` heading `cat` in the training data.
    pub fn pair_frequency(&self, word: &Word, cat: Cat) -> f64 {
        self.pair_freq.get(&(word.clone(), cat)).copied().unwrap_or(0.0)
    }

    pub fn pair_frequencies(&self) -> impl Iterator<Item = (&Word, Cat, f64)> {
        self.pair_freq.iter().map(|((w, c), &f)| (w, *c, f))
    }

    /// Words with positive frequency heading `cat`, most frequent first.
    pub fn heads_of(&self, cat: Cat) -> Vec<(Word, f64)> {
        let mut v: Vec<(Word, f64)> = self
            .pair_freq
            .iter()
            .filter(|((_, c), f)| *c == cat && **f > 0.0)
            .map(|((w, _), &f)| (w.clone(), f))
            .collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        v
    }

    /// The words (plus `<UNK>`) that lexical choices of category `x` range over.
    pub fn head_vocabulary(&self, x: Cat) -> Vec<Word> {
        let mut v: Vec<Word> = self
            .head_unigram
            .get(&x)
            .map(|m| m.keys().cloned().collect())
            .unwrap_or_default();
        v.sort();
        v
    }

    pub(super) fn head_logp(&self, x: Cat, v: &Word) -> f64 {
        match self.head_unigram.get(&x) {
            Some(m) => m
                .get(v)
                .or_else(|| m.get(crate::symbol::UNKNOWN_WORD))
                .copied()
                .unwrap_or(f64::NEG_INFINITY),
            None => f64::NEG_INFINITY,
        }
    }

    pub(super) fn backoff_logp(&self, n: Cat, x: Cat, v: &Word) -> f64 {
        match self.lex_backbone.get(&(n, x)) {
            Some(b) => b
                .explicit
                .get(v)
                .copied()
                .unwrap_or_else(|| b.log_gamma + self.head_logp(x, v)),
            None => self.head_logp(x, v),
        }
    }

    /// `p(v | head, n, x)` over the head vocabulary of `x`.
    pub fn lexical_distribution(&self, head: &Word, n: Cat, x: Cat) -> BTreeMap<Word, f64> {
        self.head_vocabulary(x)
            .into_iter()
            .map(|v| {
                let p = self.lexical_logp(head, n, x, &v).exp();
                (v, p)
            })
            .collect()
    }

    pub fn num_lexicalized_rule_contexts(&self) -> usize {
        self.rule_table.len()
    }

    pub fn num_lexicalized_choice_contexts(&self) -> usize {
        self.lex_table.len()
    }

    /// Checks that every stored conditional distribution sums to one.
    pub fn check_normalization(&self, tol: f64) -> Result<(), String> {
        let g = &*self.grammar;
        let check = |what: String, total: f64| {
            if (total - 1.0).abs() > tol {
                Err(format!("{what} sums to {total}"))
            } else {
                Ok(())
            }
        };
        for n in g.nonterminals() {
            let total: f64 = self.backbone_distribution(n).iter().map(|p| p.1).sum();
            check(format!("backbone of {}", g.name(n)), total)?;
        }
        let mut keys: Vec<&(Word, Cat)> = self.rule_table.keys().collect();
        keys.sort();
        for (w, n) in keys {
            let total: f64 = self.rule_distribution(w, *n).iter().map(|p| p.1).sum();
            check(format!("rules of ({w}, {})", g.name(*n)), total)?;
        }
        let mut xs: Vec<&Cat> = self.head_unigram.keys().collect();
        xs.sort();
        for &x in xs {
            let total: f64 = self.head_unigram[&x].values().map(|l| l.exp()).sum();
            check(format!("head unigram of {}", g.name(x)), total)?;
        }
        let mut bkeys: Vec<&(Cat, Cat)> = self.lex_backbone.keys().collect();
        bkeys.sort();
        for &(n, x) in bkeys {
            let total: f64 = self
                .head_vocabulary(x)
                .iter()
                .map(|v| self.backoff_logp(n, x, v).exp())
                .sum();
            check(format!("lexical backbone ({}, {})", g.name(n), g.name(x)), total)?;
        }
        let mut lkeys: Vec<&(Word, Cat, Cat)> = self.lex_table.keys().collect();
        lkeys.sort();
        for (w, n, x) in lkeys {
            let total: f64 = self.lexical_distribution(w, *n, *x).values().sum();
            check(format!("lexical choice ({w}, {}, {})", g.name(*n), g.name(*x)), total)?;
        }
        Ok(())
    }

    /// Events built from `lexnts` and the grammar whose probability is zero.
    /// Lexical choices range over each category's head vocabulary.
    pub fn zero_probability_events(&self, lexnts: &BTreeSet<LexicalizedNonterminal>) -> Vec<String> {
        let g = &*self.grammar;
        let mut bad = Vec::new();
        let mut contexts: Vec<(Word, Cat)> =
            lexnts.iter().map(|l| (l.word.clone(), l.category)).collect();
        contexts.push((Word::top(), Cat::START));
        for (w, n) in &contexts {
            if !n.is_start() {
                for &r in g.rules_with_lhs(*n) {
                    if self.rule_logp(w, r) == f64::NEG_INFINITY {
                        bad.push(format!("rule {} headed by {w}", g.rule_text(r)));
                    }
                }
            }
            for &x in g.complement_categories(*n) {
                for v in self.head_vocabulary(x) {
                    if self.lexical_logp(w, *n, x, &v) == f64::NEG_INFINITY {
                        bad.push(format!("choice of {v} for {} under ({w}, {})", g.name(x), g.name(*n)));
                    }
                }
            }
        }
        bad
    }
}

impl EventWeights for LexPcfg {
    fn rule_logp(&self, head: &Word, rule: RuleId) -> f64 {
        let lhs = self.grammar.rule(rule).lhs;
        match self.rule_table.get(&(head.clone(), lhs)) {
            Some(dist) => dist[self.grammar.slot_in_lhs(rule)],
            None => self.rule_backbone[rule.index()],
        }
    }

    fn lexical_logp(&self, parent_head: &Word, parent_cat: Cat, child_cat: Cat, child_head: &Word) -> f64 {
        match self
            .lex_table
            .get(&(parent_head.clone(), parent_cat, child_cat))
        {
            Some(b) => b.explicit.get(child_head).copied().unwrap_or_else(|| {
                b.log_gamma + self.backoff_logp(parent_cat, child_cat, child_head)
            }),
            None => self.backoff_logp(parent_cat, child_cat, child_head),
        }
    }
}

/// Backbone rule probabilities with every lexical choice weighted one, so a
/// lexicalized forest is scored exactly like its unlexicalized trees.
#[derive(Debug, Clone, Copy)]
pub struct Unlexicalized<'a>(pub &'a LexPcfg);

impl EventWeights for Unlexicalized<'_> {
    fn rule_logp(&self, _head: &Word, rule: RuleId) -> f64 {
        self.0.rule_backbone[rule.index()]
    }

    fn lexical_logp(&self, _: &Word, _: Cat, _: Cat, _: &Word) -> f64 {
        0.0
    }
}
