//! The event space of a headed grammar, event-labeled trees and their weights.
//!
//! A rule event is the choice of a rule given the lexicalized mother
//! `(head word, lhs)`. A lexical-choice event is the choice of a non-head
//! daughter's head word given the mother's head word, the mother's category
//! and the daughter's category. The sentence head is chosen by the lexical
//! event `⟨<TOP>, <START>, s, v⟩`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::grammar::HeadedGrammar;
use crate::symbol::{Cat, RuleId, Word};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleEvent {
    pub head: Word,
    pub rule: RuleId,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LexicalEvent {
    pub parent_head: Word,
    pub parent_cat: Cat,
    pub child_cat: Cat,
    pub child_head: Word,
}

impl LexicalEvent {
    /// The event choosing the sentence head `head` for the start category.
    pub fn root(start: Cat, head: Word) -> Self {
        LexicalEvent {
            parent_head: Word::top(),
            parent_cat: Cat::START,
            child_cat: start,
            child_head: head,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Rule(RuleEvent),
    Lexical(LexicalEvent),
}

impl Event {
    pub fn display<'a>(&'a self, g: &'a HeadedGrammar) -> impl fmt::Display + 'a {
        EventDisplay { event: self, g }
    }
}

struct EventDisplay<'a> {
    event: &'a Event,
    g: &'a HeadedGrammar,
}

impl fmt::Display for EventDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.event {
            Event::Rule(r) => write!(f, "⟨{}, {}⟩", r.head, self.g.rule_text(r.rule)),
            Event::Lexical(l) => write!(
                f,
                "⟨{}, {}, {}, {}⟩",
                l.parent_head,
                self.g.name(l.parent_cat),
                self.g.name(l.child_cat),
                l.child_head
            ),
        }
    }
}

/// Log-probabilities of events under some parameter setting.
pub trait EventWeights {
    fn rule_logp(&self, head: &Word, rule: RuleId) -> f64;
    fn lexical_logp(&self, parent_head: &Word, parent_cat: Cat, child_cat: Cat, child_head: &Word)
        -> f64;

    fn event_logp(&self, e: &Event) -> f64 {
        match e {
            Event::Rule(r) => self.rule_logp(&r.head, r.rule),
            Event::Lexical(l) => {
                self.lexical_logp(&l.parent_head, l.parent_cat, l.child_cat, &l.child_head)
            }
        }
    }
}

/// Explicit event probabilities with a fallback for everything unlisted.
#[derive(Debug, Clone)]
pub struct FixedWeights {
    pub rules: HashMap<RuleEvent, f64>,
    pub lexical: HashMap<LexicalEvent, f64>,
    pub default: f64,
}

impl FixedWeights {
    pub fn uniform(p: f64) -> Self {
        FixedWeights {
            rules: HashMap::new(),
            lexical: HashMap::new(),
            default: p,
        }
    }

    pub fn set(&mut self, e: Event, p: f64) {
        match e {
            Event::Rule(r) => {
                self.rules.insert(r, p);
            }
            Event::Lexical(l) => {
                self.lexical.insert(l, p);
            }
        }
    }
}

impl EventWeights for FixedWeights {
    fn rule_logp(&self, head: &Word, rule: RuleId) -> f64 {
        let key = RuleEvent {
            head: head.clone(),
            rule,
        };
        self.rules.get(&key).copied().unwrap_or(self.default).ln()
    }

    fn lexical_logp(&self, parent_head: &Word, parent_cat: Cat, child_cat: Cat, child_head: &Word) -> f64 {
        let key = LexicalEvent {
            parent_head: parent_head.clone(),
            parent_cat,
            child_cat,
            child_head: child_head.clone(),
        };
        self.lexical.get(&key).copied().unwrap_or(self.default).ln()
    }
}

/// Sparse nonnegative counts over events; zero entries are never stored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventCounts {
    rules: BTreeMap<RuleEvent, f64>,
    lexical: BTreeMap<LexicalEvent, f64>,
}

impl EventCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_rule(&mut self, e: RuleEvent, c: f64) {
        debug_assert!(c >= 0.0 && c.is_finite(), "bad count {c}");
        if c > 0.0 {
            *self.rules.entry(e).or_insert(0.0) += c;
        }
    }

    pub fn add_lexical(&mut self, e: LexicalEvent, c: f64) {
        debug_assert!(c >= 0.0 && c.is_finite(), "bad count {c}");
        if c > 0.0 {
            *self.lexical.entry(e).or_insert(0.0) += c;
        }
    }

    pub fn add(&mut self, e: Event, c: f64) {
        match e {
            Event::Rule(r) => self.add_rule(r, c),
            Event::Lexical(l) => self.add_lexical(l, c),
        }
    }

    pub fn get(&self, e: &Event) -> f64 {
        match e {
            Event::Rule(r) => self.rule(r),
            Event::Lexical(l) => self.lexical(l),
        }
    }

    pub fn rule(&self, e: &RuleEvent) -> f64 {
        self.rules.get(e).copied().unwrap_or(0.0)
    }

    pub fn lexical(&self, e: &LexicalEvent) -> f64 {
        self.lexical.get(e).copied().unwrap_or(0.0)
    }

    pub fn rules(&self) -> impl Iterator<Item = (&RuleEvent, f64)> {
        self.rules.iter().map(|(k, &v)| (k, v))
    }

    pub fn lexicals(&self) -> impl Iterator<Item = (&LexicalEvent, f64)> {
        self.lexical.iter().map(|(k, &v)| (k, v))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Event, f64)> + '_ {
        self.rules()
            .map(|(k, v)| (Event::Rule(k.clone()), v))
            .chain(self.lexicals().map(|(k, v)| (Event::Lexical(k.clone()), v)))
    }

    pub fn len(&self) -> usize {
        self.rules.len() + self.lexical.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty() && self.lexical.is_empty()
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: &EventCounts) {
        for (k, v) in other.rules() {
            self.add_rule(k.clone(), v);
        }
        for (k, v) in other.lexicals() {
            self.add_lexical(k.clone(), v);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        assert!(factor >= 0.0);
        self.rules.values_mut().for_each(|v| *v *= factor);
        self.lexical.values_mut().for_each(|v| *v *= factor);
        self.prune(0.0);
    }

    /// Drops entries at or below `threshold`.
    pub fn prune(&mut self, threshold: f64) {
        self.rules.retain(|_, v| *v > threshold);
        self.lexical.retain(|_, v| *v > threshold);
    }

    pub fn total(&self) -> f64 {
        self.rules.values().sum::<f64>() + self.lexical.values().sum::<f64>()
    }

    /// Largest absolute difference over the union of keys.
    pub fn max_abs_diff(&self, other: &EventCounts) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, v) in self.rules() {
            worst = worst.max((v - other.rule(k)).abs());
        }
        for (k, v) in other.rules() {
            worst = worst.max((v - self.rule(k)).abs());
        }
        for (k, v) in self.lexicals() {
            worst = worst.max((v - other.lexical(k)).abs());
        }
        for (k, v) in other.lexicals() {
            worst = worst.max((v - self.lexical(k)).abs());
        }
        worst
    }
}

/// A node of a lexicalized tree. Leaves carry no rule and no children; their
/// `head` is the word and `cat` its terminal category.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeNode {
    pub cat: Cat,
    pub head: Word,
    pub rule: Option<RuleId>,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn leaf(word: Word, tag: Cat) -> Self {
        TreeNode {
            cat: tag,
            head: word,
            rule: None,
            children: Vec::new(),
        }
    }

    /// An internal node whose head word is taken from its head daughter.
    pub fn internal(g: &HeadedGrammar, rule: RuleId, children: Vec<TreeNode>) -> Self {
        let r = g.rule(rule);
        let head = children[r.head_position()].head.clone();
        TreeNode {
            cat: r.lhs,
            head,
            rule: Some(rule),
            children,
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.rule.is_none()
    }

    fn count_nodes(&self) -> usize {
        1 + self.children.iter().map(|c| c.count_nodes()).sum::<usize>()
    }

    fn collect_yield(&self, out: &mut Vec<(Word, Cat)>) {
        if self.is_leaf() {
            out.push((self.head.clone(), self.cat));
        }
        for c in &self.children {
            c.collect_yield(out);
        }
    }

    fn write_bracketed(&self, g: &HeadedGrammar, out: &mut String) {
        out.push('(');
        out.push_str(g.name(self.cat));
        out.push('^');
        out.push_str(self.head.as_str());
        for c in &self.children {
            out.push(' ');
            c.write_bracketed(g, out);
        }
        out.push(')');
    }
}

/// A complete tree rooted in the start category.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LabeledTree {
    pub root: TreeNode,
}

impl LabeledTree {
    pub fn new(root: TreeNode) -> Self {
        LabeledTree { root }
    }

    pub fn node_count(&self) -> usize {
        self.root.count_nodes()
    }

    /// The `(word, tag)` leaves from left to right.
    pub fn leaves(&self) -> Vec<(Word, Cat)> {
        let mut out = Vec::new();
        self.root.collect_yield(&mut out);
        out
    }

    /// `(CAT^head child…)`; leaves print as `(TAG^word)`.
    pub fn to_bracketed(&self, g: &HeadedGrammar) -> String {
        let mut s = String::new();
        self.root.write_bracketed(g, &mut s);
        s
    }

    /// Reads the bracketed form back, rebuilding rule ids from the grammar.
    pub fn parse_bracketed(text: &str, g: &HeadedGrammar) -> Result<LabeledTree, EventError> {
        let mut p = BracketReader {
            chars: text.trim().char_indices().peekable(),
            text: text.trim(),
            g,
        };
        let root = p.node()?;
        if p.chars.peek().is_some() {
            return Err(EventError::Malformed("trailing text after tree".into()));
        }
        Ok(LabeledTree { root })
    }
}

struct BracketReader<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    text: &'a str,
    g: &'a HeadedGrammar,
}

impl BracketReader<'_> {
    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some((_, c)) if c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn node(&mut self) -> Result<TreeNode, EventError> {
        self.skip_ws();
        match self.chars.next() {
            Some((_, '(')) => {}
            _ => return Err(EventError::Malformed("expected `(`".into())),
        }
        let begin = self.chars.peek().map(|(i, _)| *i).unwrap_or(self.text.len());
        let mut end = begin;
        while let Some(&(i, c)) = self.chars.peek() {
            if c.is_whitespace() || c == '(' || c == ')' {
                break;
            }
            end = i + c.len_utf8();
            self.chars.next();
        }
        let label = &self.text[begin..end];
        let (cat_name, head) = label
            .split_once('^')
            .ok_or_else(|| EventError::Malformed(format!("label `{label}` lacks `^head`")))?;
        let cat = self
            .g
            .lookup(cat_name)
            .ok_or_else(|| EventError::Malformed(format!("unknown category `{cat_name}`")))?;
        let mut children = Vec::new();
        loop {
            self.skip_ws();
            match self.chars.peek() {
                Some((_, ')')) => {
                    self.chars.next();
                    break;
                }
                Some((_, '(')) => children.push(self.node()?),
                _ => return Err(EventError::Malformed("unbalanced brackets".into())),
            }
        }
        if children.is_empty() {
            return Ok(TreeNode::leaf(Word::new(head), cat));
        }
        let cats: Vec<Cat> = children.iter().map(|c| c.cat).collect();
        let rule = self
            .g
            .rules_with_lhs(cat)
            .iter()
            .copied()
            .find(|&id| {
                let r = self.g.rule(id);
                r.daughters().eq(cats.iter().copied()) && children[r.head_position()].head.as_str() == head
            })
            .ok_or_else(|| EventError::Malformed(format!("no rule licenses node `{label}`")))?;
        Ok(TreeNode {
            cat,
            head: Word::new(head),
            rule: Some(rule),
            children,
        })
    }
}

#[derive(Debug, Error)]
pub enum EventError {
    #[error("tree is not licensed by the grammar: {0}")]
    Unlicensed(String),
    #[error("event {0} has zero probability")]
    ZeroProbability(String),
    #[error("malformed tree: {0}")]
    Malformed(String),
}

/// Counts the event labels of a tree: one rule event per internal node, one
/// lexical event per non-head daughter, and the root head choice.
pub fn tree_events(t: &LabeledTree, g: &HeadedGrammar) -> Result<EventCounts, EventError> {
    if t.root.cat != g.start() {
        return Err(EventError::Unlicensed(format!(
            "root category {} is not the start symbol",
            g.name(t.root.cat)
        )));
    }
    let mut counts = EventCounts::new();
    counts.add_lexical(LexicalEvent::root(g.start(), t.root.head.clone()), 1.0);
    node_events(&t.root, g, &mut counts)?;
    Ok(counts)
}

fn node_events(n: &TreeNode, g: &HeadedGrammar, out: &mut EventCounts) -> Result<(), EventError> {
    let Some(rule_id) = n.rule else {
        if g.is_nonterminal(n.cat) {
            return Err(EventError::Unlicensed(format!(
                "leaf labeled with nonterminal {}",
                g.name(n.cat)
            )));
        }
        if let Some(tags) = g.tags_of(n.head.as_str()) {
            if !tags.contains(&n.cat) {
                return Err(EventError::Unlicensed(format!(
                    "word {} cannot carry tag {}",
                    n.head,
                    g.name(n.cat)
                )));
            }
        }
        return Ok(());
    };
    let r = g.rule(rule_id);
    if r.lhs != n.cat || r.arity() != n.children.len() || !r.daughters().eq(n.children.iter().map(|c| c.cat)) {
        return Err(EventError::Unlicensed(format!(
            "node {} does not match rule {}",
            g.name(n.cat),
            g.rule_text(rule_id)
        )));
    }
    let h = r.head_position();
    if n.children[h].head != n.head {
        return Err(EventError::Unlicensed(format!(
            "node headed by {} but its head daughter is headed by {}",
            n.head, n.children[h].head
        )));
    }
    out.add_rule(
        RuleEvent {
            head: n.head.clone(),
            rule: rule_id,
        },
        1.0,
    );
    for (i, c) in n.children.iter().enumerate() {
        if i != h {
            out.add_lexical(
                LexicalEvent {
                    parent_head: n.head.clone(),
                    parent_cat: n.cat,
                    child_cat: c.cat,
                    child_head: c.head.clone(),
                },
                1.0,
            );
        }
        node_events(c, g, out)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeWeight {
    pub log_prob: f64,
    /// `exp(log_prob)`, `None` when it underflows to zero.
    pub prob: Option<f64>,
}

/// Evaluates the event monomial `∏ p(z)^c(z)` in the log domain.
pub fn tree_weight(
    counts: &EventCounts,
    weights: &impl EventWeights,
    g: &HeadedGrammar,
) -> Result<TreeWeight, EventError> {
    let mut log_prob = 0.0;
    for (event, c) in counts.iter() {
        let lp = weights.event_logp(&event);
        if lp == f64::NEG_INFINITY || lp.is_nan() {
            return Err(EventError::ZeroProbability(event.display(g).to_string()));
        }
        log_prob += c * lp;
    }
    let p = log_prob.exp();
    Ok(TreeWeight {
        log_prob,
        prob: (p > 0.0).then_some(p),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;

    /// `big big problem` as an N1, the sentence category.
    fn adjectives() -> HeadedGrammar {
        parse_grammar(
            "start N1;\nN1 -> A1 N1';\nN1 -> N';\nA1 -> A';\nbig : A;\nproblem : N;",
        )
        .unwrap()
    }

    fn big_big_problem(g: &HeadedGrammar) -> LabeledTree {
        LabeledTree::parse_bracketed(
            "(N1^problem (A1^big (A^big)) (N1^problem (A1^big (A^big)) (N1^problem (N^problem))))",
            g,
        )
        .unwrap()
    }

    #[test]
    fn repeated_modifier_event_has_exponent_two() {
        let g = adjectives();
        let t = big_big_problem(&g);
        let c = tree_events(&t, &g).unwrap();
        let n1 = g.lookup("N1").unwrap();
        let a1 = g.lookup("A1").unwrap();
        let e = LexicalEvent {
            parent_head: Word::new("problem"),
            parent_cat: n1,
            child_cat: a1,
            child_head: Word::new("big"),
        };
        assert_eq!(c.lexical(&e), 2.0);
        // root choice, 2 modifier choices, 3 N1 expansions, 2 A1 expansions
        assert_eq!(c.total(), 8.0);
        assert_eq!(c.lexical(&LexicalEvent::root(n1, Word::new("problem"))), 1.0);
    }

    #[test]
    fn single_rule_tree_counts_are_one() {
        let g = parse_grammar("start S; S -> A'; w : A;").unwrap();
        let t = LabeledTree::parse_bracketed("(S^w (A^w))", &g).unwrap();
        let c = tree_events(&t, &g).unwrap();
        assert_eq!(c.len(), 2);
        assert!(c.iter().all(|(_, v)| v == 1.0));
    }

    #[test]
    fn isomorphic_subtrees_under_distinct_heads_are_distinct_events() {
        let g = parse_grammar("start S; S -> X S' | X'; X -> T'; a : T; b : T;").unwrap();
        // the two X subtrees have the same shape but different heads
        let t = LabeledTree::parse_bracketed("(S^b (X^a (T^a)) (S^b (X^b (T^b))))", &g).unwrap();
        let c = tree_events(&t, &g).unwrap();
        let x_rule = g.rules_with_lhs(g.lookup("X").unwrap())[0];
        for w in ["a", "b"] {
            let e = RuleEvent {
                head: Word::new(w),
                rule: x_rule,
            };
            assert_eq!(c.rule(&e), 1.0, "{w}");
        }
        // two S expansions, two X expansions, root choice, modifier choice
        assert_eq!(c.len(), 6);
    }

    #[test]
    fn weight_of_unit_parameters_is_one() {
        let g = adjectives();
        let c = tree_events(&big_big_problem(&g), &g).unwrap();
        let w = tree_weight(&c, &FixedWeights::uniform(1.0), &g).unwrap();
        assert_eq!(w.log_prob, 0.0);
        assert_eq!(w.prob, Some(1.0));
    }

    #[test]
    fn weight_is_the_monomial_value() {
        let g = adjectives();
        let r0 = RuleEvent {
            head: Word::new("x"),
            rule: RuleId(0),
        };
        let r1 = RuleEvent {
            head: Word::new("y"),
            rule: RuleId(1),
        };
        let mut c = EventCounts::new();
        c.add_rule(r0.clone(), 1.0);
        c.add_rule(r1.clone(), 2.0);
        let mut p = FixedWeights::uniform(1.0);
        p.set(Event::Rule(r0), 0.5);
        p.set(Event::Rule(r1), 0.1);
        let w = tree_weight(&c, &p, &g).unwrap();
        assert!((w.prob.unwrap() - 0.005).abs() < 1e-15);
    }

    #[test]
    fn hand_evaluated_adjective_tree() {
        let g = adjectives();
        let n1 = g.lookup("N1").unwrap();
        let a1 = g.lookup("A1").unwrap();
        let [mod_rule, base_rule, adj_rule] = [RuleId(0), RuleId(1), RuleId(2)];
        let mut p = FixedWeights::uniform(1.0);
        let problem = Word::new("problem");
        let big = Word::new("big");
        p.set(Event::Lexical(LexicalEvent::root(n1, problem.clone())), 0.2);
        p.set(Event::Rule(RuleEvent { head: problem.clone(), rule: mod_rule }), 0.3);
        p.set(Event::Rule(RuleEvent { head: problem.clone(), rule: base_rule }), 0.7);
        p.set(Event::Rule(RuleEvent { head: big.clone(), rule: adj_rule }), 1.0);
        p.set(
            Event::Lexical(LexicalEvent {
                parent_head: problem,
                parent_cat: n1,
                child_cat: a1,
                child_head: big,
            }),
            0.05,
        );
        // 0.2 · 0.3² · 0.7 · 1² · 0.05²
        let expected = 0.2 * 0.3 * 0.3 * 0.7 * 0.05 * 0.05;
        let c = tree_events(&big_big_problem(&g), &g).unwrap();
        let w = tree_weight(&c, &p, &g).unwrap();
        assert!((w.prob.unwrap() - expected).abs() < 1e-18);
    }

    #[test]
    fn zero_probability_is_an_error() {
        let g = adjectives();
        let c = tree_events(&big_big_problem(&g), &g).unwrap();
        assert!(matches!(
            tree_weight(&c, &FixedWeights::uniform(0.0), &g),
            Err(EventError::ZeroProbability(_))
        ));
    }

    #[test]
    fn mislabeled_node_is_rejected() {
        let g = adjectives();
        let mut t = big_big_problem(&g);
        t.root.head = Word::new("big");
        assert!(matches!(tree_events(&t, &g), Err(EventError::Unlicensed(_))));
    }

    #[test]
    fn bracketed_round_trip() {
        let g = adjectives();
        let t = big_big_problem(&g);
        let text = t.to_bracketed(&g);
        assert_eq!(LabeledTree::parse_bracketed(&text, &g).unwrap(), t);
    }

    #[test]
    fn merge_is_order_independent() {
        let mk = |w: &str, c: f64| {
            let mut e = EventCounts::new();
            e.add_rule(RuleEvent { head: Word::new(w), rule: RuleId(0) }, c);
            e.add_lexical(LexicalEvent::root(Cat(0), Word::new(w)), c * 2.0);
            e
        };
        let (a, b, c) = (mk("a", 0.25), mk("b", 1.5), mk("a", 0.125));
        let mut left = a.clone();
        left.merge(&b);
        left.merge(&c);
        let mut right = c.clone();
        let mut bc = b.clone();
        bc.merge(&a);
        right.merge(&bc);
        assert_eq!(left, right);
    }
}
