//! Synthetic corpora sampled from a known model, random grammars and
//! models, and a brute-force expected-count oracle.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::estimation::{m_step, EstimationError, LexPcfg, MStepOptions, SmoothingConfig};
use crate::events::{
    tree_events, tree_weight, EventCounts, EventWeights, LabeledTree, LexicalEvent, RuleEvent,
    TreeNode,
};
use crate::grammar::{GrammarBuilder, GrammarError, HeadedGrammar, NamedRule};
use crate::parser::{parse, Sentence, Token};
use crate::symbol::{Cat, RuleId, Word};

/// Largest sentence the oracle accepts.
pub const ORACLE_MAX_TOKENS: usize = 8;
/// Largest grammar the oracle accepts.
pub const ORACLE_MAX_RULES: usize = 12;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("{rejected} of {attempts} derivations exceeded the depth cap; use a model with less recursion")]
    TooManyRejections { attempts: usize, rejected: usize },
    #[error("oracle limited to {ORACLE_MAX_TOKENS} tokens and {ORACLE_MAX_RULES} rules")]
    Guard,
    #[error("sentence has no parse")]
    NoParse,
    #[error("every tree of the sentence has probability zero")]
    ZeroProbability,
    #[error("invalid generator settings: {0}")]
    Invalid(String),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub sentences: usize,
    /// Derivations deeper than this are rejected and redrawn.
    pub max_depth: usize,
    pub seed: u64,
    /// Give every token all of its lexicon tags rather than the sampled one.
    pub all_tags: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec { sentences: 100, max_depth: 20, seed: 0, all_tags: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub sentences: Vec<Sentence>,
    pub trees: Vec<LabeledTree>,
    pub attempts: usize,
    pub rejected: usize,
}

impl SynthCorpus {
    /// One `word/TAG` line per sentence.
    pub fn corpus_text(&self) -> String {
        self.sentences.iter().map(|s| format!("{s}\n")).collect()
    }

    /// One bracketed tree per line.
    pub fn trees_text(&self, g: &HeadedGrammar) -> String {
        self.trees.iter().map(|t| format!("{}\n", t.to_bracketed(g))).collect()
    }

    pub fn tokens(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

/// Whether `w` can head `x`.
pub fn can_head(g: &HeadedGrammar, w: &Word, x: Cat) -> bool {
    g.tags_of(w.as_str())
        .is_some_and(|tags| tags.iter().any(|&t| g.projects(t, x)))
}

fn pick<T: Clone>(rng: &mut impl Rng, options: &[(T, f64)]) -> Option<T> {
    let total: f64 = options.iter().map(|o| o.1).sum();
    if !(total > 0.0) {
        return None;
    }
    let mut u = rng.gen::<f64>() * total;
    for (x, p) in options {
        if u < *p {
            return Some(x.clone());
        }
        u -= p;
    }
    options.iter().rev().find(|o| o.1 > 0.0).map(|o| o.0.clone())
}

/// Top-down sampler. Choices incompatible with the lexicon are removed and
/// the rest renormalized, which is a no-op for models built by
/// [`random_model`].
pub struct Sampler<'a> {
    model: &'a LexPcfg,
    rules: HashMap<(Word, Cat), Vec<(RuleId, f64)>>,
    heads: HashMap<(Word, Cat, Cat), Vec<(Word, f64)>>,
}

impl<'a> Sampler<'a> {
    pub fn new(model: &'a LexPcfg) -> Self {
        Sampler { model, rules: HashMap::new(), heads: HashMap::new() }
    }

    fn rule_options(&mut self, head: &Word, cat: Cat) -> &[(RuleId, f64)] {
        let m = self.model;
        self.rules.entry((head.clone(), cat)).or_insert_with(|| {
            let g = m.grammar();
            m.rule_distribution(head, cat)
                .into_iter()
                .filter(|&(r, p)| p > 0.0 && can_head(g, head, g.rule(r).head))
                .collect()
        })
    }

    fn head_options(&mut self, parent: &Word, n: Cat, x: Cat) -> &[(Word, f64)] {
        let m = self.model;
        self.heads.entry((parent.clone(), n, x)).or_insert_with(|| {
            let g = m.grammar();
            m.lexical_distribution(parent, n, x)
                .into_iter()
                .filter(|(v, p)| *p > 0.0 && !Word::is_reserved(v.as_str()) && can_head(g, v, x))
                .collect()
        })
    }

    fn expand(&mut self, rng: &mut impl Rng, cat: Cat, head: Word, depth: usize, cap: usize) -> Option<TreeNode> {
        let g = self.model.grammar();
        if !g.is_nonterminal(cat) {
            return Some(TreeNode::leaf(head, cat));
        }
        if depth >= cap {
            return None;
        }
        let r = pick(rng, self.rule_options(&head, cat))?;
        let rule = g.rule(r).clone();
        let mut children = Vec::with_capacity(rule.arity());
        for (i, d) in rule.daughters().enumerate() {
            let child_head = if i == rule.head_position() {
                head.clone()
            } else {
                pick(rng, self.head_options(&head, cat, d))?
            };
            children.push(self.expand(rng, d, child_head, depth + 1, cap)?);
        }
        Some(TreeNode { cat, head, rule: Some(r), children })
    }

    /// One derivation, or `None` when it exceeds `max_depth` or reaches a
    /// context with no admissible choice.
    pub fn sample(&mut self, rng: &mut impl Rng, max_depth: usize) -> Option<LabeledTree> {
        let g = self.model.grammar();
        let start = g.start();
        let root = pick(rng, self.head_options(&Word::top(), Cat::START, start))?;
        self.expand(rng, start, root, 0, max_depth).map(LabeledTree::new)
    }
}

fn tree_sentence(t: &LabeledTree, g: &HeadedGrammar, all_tags: bool) -> Sentence {
    let tokens = t
        .leaves()
        .into_iter()
        .map(|(w, tag)| {
            let tags = match (all_tags, g.tags_of(w.as_str())) {
                (true, Some(ts)) => ts.iter().map(|&c| g.name(c).to_string()).collect(),
                _ => vec![g.name(tag).to_string()],
            };
            Token { word: w, tags }
        })
        .collect();
    Sentence::new(tokens)
}

/// Samples `spec.sentences` trees from `model`. Sentence `i` draws from
/// its own ChaCha stream, so any prefix of the corpus is independent of
/// the requested size.
pub fn generate(model: &LexPcfg, spec: &GeneratorSpec) -> Result<SynthCorpus, SynthError> {
    if spec.max_depth == 0 {
        return Err(SynthError::Invalid("max_depth must be positive".into()));
    }
    let g = model.grammar();
    let mut sampler = Sampler::new(model);
    let mut out = SynthCorpus { sentences: Vec::new(), trees: Vec::new(), attempts: 0, rejected: 0 };
    for i in 0..spec.sentences {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(i as u64);
        loop {
            out.attempts += 1;
            if let Some(t) = sampler.sample(&mut rng, spec.max_depth) {
                out.sentences.push(tree_sentence(&t, g, spec.all_tags));
                out.trees.push(t);
                break;
            }
            out.rejected += 1;
            if out.attempts >= 20 && 2 * out.rejected > out.attempts {
                return Err(SynthError::TooManyRejections { attempts: out.attempts, rejected: out.rejected });
            }
        }
    }
    Ok(out)
}

/// Every event a derivation could use: rule events for heads the lexicon
/// admits and lexical choices among admissible heads.
pub fn constructible_events(g: &HeadedGrammar) -> EventCounts {
    let mut out = EventCounts::new();
    let words: Vec<&Word> = g.words().collect();
    let heads = |x: Cat| words.iter().filter(move |w| can_head(g, w, x)).map(|w| (*w).clone());
    for v in heads(g.start()) {
        out.add_lexical(LexicalEvent::root(g.start(), v), 1.0);
    }
    for r in g.rule_ids() {
        let rule = g.rule(r);
        for w in heads(rule.head) {
            out.add_rule(RuleEvent { head: w.clone(), rule: r }, 1.0);
            for x in rule.complements() {
                for v in heads(x) {
                    out.add_lexical(
                        LexicalEvent { parent_head: w.clone(), parent_cat: rule.lhs, child_cat: x, child_head: v },
                        1.0,
                    );
                }
            }
        }
    }
    out
}

/// A model whose every constructible event has a random positive weight,
/// estimated by one M step from those weights as counts. `skew` > 1 makes
/// the distributions more peaked.
pub fn random_model(
    g: std::sync::Arc<HeadedGrammar>,
    rng: &mut impl Rng,
    skew: f64,
    smoothing: SmoothingConfig,
) -> Result<LexPcfg, SynthError> {
    let mut counts = EventCounts::new();
    for (e, _) in constructible_events(&g).iter() {
        counts.add(e, 0.05 + rng.gen::<f64>().powf(skew) * 10.0);
    }
    let prev = LexPcfg::uniform(g, smoothing.clone());
    Ok(m_step(&counts, &prev, &smoothing, MStepOptions { epsilon: 0.0 })?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomGrammarSpec {
    pub nonterminals: usize,
    pub terminals: usize,
    pub words: usize,
    pub max_rules: usize,
    pub max_flanks: usize,
    /// Some derivation of the start symbol must be at most this long.
    pub max_tokens: usize,
}

impl Default for RandomGrammarSpec {
    fn default() -> Self {
        RandomGrammarSpec { nonterminals: 4, terminals: 3, words: 4, max_rules: 10, max_flanks: 2, max_tokens: 6 }
    }
}

/// A random grammar without recursion: a rule for `N{i}` only uses
/// categories `N{j}` with `j > i`, and terminals. Words carry one or two
/// tags, so tagging is ambiguous.
pub fn random_grammar(rng: &mut impl Rng, spec: &RandomGrammarSpec) -> Result<HeadedGrammar, SynthError> {
    if spec.nonterminals == 0 || spec.terminals == 0 || spec.words == 0 || spec.max_rules < spec.nonterminals {
        return Err(SynthError::Invalid(format!("{spec:?}")));
    }
    for _ in 0..1000 {
        let terminals: Vec<String> = (0..spec.terminals).map(|i| format!("T{i}")).collect();
        let nts: Vec<String> = (0..spec.nonterminals).map(|i| format!("N{i}")).collect();
        let mut b = GrammarBuilder::new();
        b.start(&nts[0]);
        let mut used_tags = BTreeSet::new();
        for w in 0..spec.words {
            let mut tags = vec![rng.gen_range(0..spec.terminals)];
            if rng.gen_bool(0.4) {
                tags.push(rng.gen_range(0..spec.terminals));
            }
            tags.sort_unstable();
            tags.dedup();
            used_tags.extend(tags.iter().copied());
            let names: Vec<&str> = tags.iter().map(|&t| terminals[t].as_str()).collect();
            b.word(&format!("w{w}"), &names);
        }
        if used_tags.len() < spec.terminals {
            continue;
        }
        let mut heads_used = BTreeSet::new();
        let mut rules = 0;
        for i in 0..spec.nonterminals {
            let n = 1 + usize::from(rng.gen_bool(0.5));
            for _ in 0..n {
                let lower = spec.nonterminals - i - 1;
                let head = if lower > 0 && rng.gen_bool(0.5) {
                    nts[rng.gen_range(i + 1..spec.nonterminals)].clone()
                } else {
                    let t = rng.gen_range(0..spec.terminals);
                    heads_used.insert(t);
                    terminals[t].clone()
                };
                let flank = |rng: &mut dyn rand::RngCore| -> Vec<String> {
                    if lower == 0 {
                        return Vec::new();
                    }
                    let k = rng.gen_range(0..=spec.max_flanks.min(1));
                    (0..k).map(|_| nts[rng.gen_range(i + 1..spec.nonterminals)].clone()).collect()
                };
                let left = flank(rng);
                let right = if left.len() < spec.max_flanks { flank(rng) } else { Vec::new() };
                let l: Vec<&str> = left.iter().map(String::as_str).collect();
                let r: Vec<&str> = right.iter().map(String::as_str).collect();
                b.rule(NamedRule::new(&nts[i], &l, &head, &r));
                rules += 1;
            }
        }
        if rules > spec.max_rules || heads_used.len() < spec.terminals {
            continue;
        }
        if let Ok(g) = b.build() {
            let short = min_yields(&g)[g.start().index()].is_some_and(|m| m <= spec.max_tokens);
            if short && g.rules().iter().collect::<BTreeSet<_>>().len() == g.rules().len() {
                return Ok(g);
            }
        }
    }
    Err(SynthError::Invalid("no grammar satisfies the constraints".into()))
}

/// Fewest leaves any derivation from each category can have, or `None`
/// for categories that derive nothing.
pub fn min_yields(g: &HeadedGrammar) -> Vec<Option<usize>> {
    let mut out: Vec<Option<usize>> = g
        .cats()
        .map(|c| (!g.is_nonterminal(c)).then_some(1))
        .collect();
    loop {
        let mut changed = false;
        for r in g.rules() {
            let total: Option<usize> = r.daughters().map(|d| out[d.index()]).sum();
            if let Some(t) = total {
                if out[r.lhs.index()].is_none_or(|old| t < old) {
                    out[r.lhs.index()] = Some(t);
                    changed = true;
                }
            }
        }
        if !changed {
            return out;
        }
    }
}

/// A derivation drawn from the grammar alone with at most `max_tokens`
/// leaves. Each node picks uniformly among the rules that still fit the
/// remaining budget. `None` when no derivation is short enough.
pub fn random_sentence(
    g: &HeadedGrammar,
    rng: &mut impl Rng,
    max_tokens: usize,
    all_tags: bool,
) -> Option<Sentence> {
    fn grow(
        g: &HeadedGrammar,
        min: &[Option<usize>],
        rng: &mut dyn rand::RngCore,
        cat: Cat,
        budget: usize,
        out: &mut Vec<(Word, Cat)>,
    ) {
        if !g.is_nonterminal(cat) {
            let words: Vec<&Word> = g
                .lexicon()
                .iter()
                .filter(|(_, tags)| tags.contains(&cat))
                .map(|(w, _)| w)
                .collect();
            out.push((words[rng.gen_range(0..words.len())].clone(), cat));
            return;
        }
        let need = |r: RuleId| -> Option<usize> { g.rule(r).daughters().map(|d| min[d.index()]).sum() };
        let fits: Vec<RuleId> = g
            .rules_with_lhs(cat)
            .iter()
            .copied()
            .filter(|&r| need(r).is_some_and(|n| n <= budget))
            .collect();
        let r = g.rule(fits[rng.gen_range(0..fits.len())]);
        let daughters: Vec<Cat> = r.daughters().collect();
        let mut left = budget;
        for (k, &d) in daughters.iter().enumerate() {
            let reserve: usize = daughters[k + 1..].iter().map(|x| min[x.index()].unwrap()).sum();
            let before = out.len();
            grow(g, min, rng, d, left - reserve, out);
            left -= out.len() - before;
        }
    }
    let min = min_yields(g);
    if min[g.start().index()]? > max_tokens {
        return None;
    }
    let mut leaves = Vec::new();
    grow(g, &min, rng, g.start(), max_tokens, &mut leaves);
    let tokens = leaves
        .into_iter()
        .map(|(w, t)| {
            let tags: Vec<String> = if all_tags {
                g.tags_of(w.as_str()).unwrap().iter().map(|&c| g.name(c).to_string()).collect()
            } else {
                vec![g.name(t).to_string()]
            };
            Token { word: w, tags }
        })
        .collect();
    Some(Sentence::new(tokens))
}

/// Expected event counts by enumerating every tree of the sentence and
/// weighting its events by the tree's posterior probability.
pub fn oracle_expected_counts(
    s: &Sentence,
    g: &HeadedGrammar,
    w: &impl EventWeights,
) -> Result<EventCounts, SynthError> {
    if s.len() > ORACLE_MAX_TOKENS || g.rules().len() > ORACLE_MAX_RULES {
        return Err(SynthError::Guard);
    }
    let forest = parse(s, g).map_err(|_| SynthError::NoParse)?;
    let mut scored = Vec::new();
    for t in forest.enumerate_trees(usize::MAX) {
        let events = tree_events(&t, g).map_err(|_| SynthError::NoParse)?;
        let lp = tree_weight(&events, w, g).map_or(f64::NEG_INFINITY, |tw| tw.log_prob);
        scored.push((events, lp));
    }
    let top = scored.iter().map(|s| s.1).fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(SynthError::ZeroProbability);
    }
    let z: f64 = scored.iter().map(|s| (s.1 - top).exp()).sum();
    let mut out = EventCounts::new();
    for (events, lp) in scored {
        let post = (lp - top).exp() / z;
        if post > 0.0 {
            let mut e = events;
            e.scale(post);
            out.merge(&e);
        }
    }
    Ok(out)
}
