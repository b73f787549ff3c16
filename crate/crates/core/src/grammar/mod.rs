//! Headed context-free grammars.
//!
//! A grammar is the tuple (N, T, W, L, R, s): nonterminal and terminal
//! categories, words, a lexicon relating words to terminal categories,
//! headed rules `⟨lhs, left, head, right⟩`, and a start symbol. Grammars are
//! immutable once built; [`GrammarBuilder`] is the only way to make one.

mod dsl;
mod states;

pub use dsl::{parse_grammar, parse_grammar_builder};
pub use states::{generate_state_rules, StateRules};

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::symbol::{Cat, RuleId, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CategoryKind {
    Terminal,
    Nonterminal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Category {
    pub name: String,
    pub kind: CategoryKind,
    /// Participates in chunk summing during sum-max decoding.
    pub chunk: bool,
}

/// A rule `lhs -> left… head' right…`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HeadedRule {
    pub lhs: Cat,
    pub left: Vec<Cat>,
    pub head: Cat,
    pub right: Vec<Cat>,
}

impl HeadedRule {
    pub fn arity(&self) -> usize {
        self.left.len() + 1 + self.right.len()
    }

    /// Position of the head among the daughters.
    pub fn head_position(&self) -> usize {
        self.left.len()
    }

    pub fn daughter(&self, i: usize) -> Cat {
        let h = self.left.len();
        match i.cmp(&h) {
            std::cmp::Ordering::Less => self.left[i],
            std::cmp::Ordering::Equal => self.head,
            std::cmp::Ordering::Greater => self.right[i - h - 1],
        }
    }

    pub fn daughters(&self) -> impl Iterator<Item = Cat> + '_ {
        self.left
            .iter()
            .copied()
            .chain(std::iter::once(self.head))
            .chain(self.right.iter().copied())
    }

    /// Non-head daughters in order, i.e. the complement sequence `left · right`.
    pub fn complements(&self) -> impl Iterator<Item = Cat> + '_ {
        self.left.iter().chain(self.right.iter()).copied()
    }
}

/// A rule spelled with category names, before interning.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NamedRule {
    pub lhs: String,
    pub left: Vec<String>,
    pub head: String,
    pub right: Vec<String>,
}

impl NamedRule {
    pub fn new(lhs: &str, left: &[&str], head: &str, right: &[&str]) -> Self {
        NamedRule {
            lhs: lhs.to_string(),
            left: left.iter().map(|s| s.to_string()).collect(),
            head: head.to_string(),
            right: right.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for NamedRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ->", self.lhs)?;
        for c in &self.left {
            write!(f, " {c}")?;
        }
        write!(f, " {}'", self.head)?;
        for c in &self.right {
            write!(f, " {c}")?;
        }
        Ok(())
    }
}

/// The grammar conditions a valid grammar must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Condition {
    /// N and T are disjoint.
    Disjoint,
    /// Every word has at least one terminal category.
    Lexicon,
    /// Every nonterminal expands; every terminal is used on some right-hand side.
    Productions,
    /// The start symbol is a nonterminal.
    Start,
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Condition::Disjoint => "(i)",
            Condition::Lexicon => "(iii)",
            Condition::Productions => "(iv)",
            Condition::Start => "(v)",
        };
        write!(f, "condition {s}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub condition: Condition,
    pub symbol: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.condition, self.message)
    }
}

#[derive(Debug, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{}rule for `{lhs}` has no head marker", line_prefix(*.line))]
    MissingHead { line: Option<usize>, lhs: String },
    #[error("{}rule for `{lhs}` has {count} head markers", line_prefix(*.line))]
    MultipleHeads {
        line: Option<usize>,
        lhs: String,
        count: usize,
    },
    #[error("{}undeclared category `{name}`", line_prefix(*.line))]
    Undeclared { line: Option<usize>, name: String },
    #[error("missing start declaration")]
    MissingStart,
    #[error("start symbol `{0}` is not a nonterminal")]
    StartNotNonterminal(String),
    #[error("category `{0}` is used both as a terminal and as a nonterminal")]
    NotDisjoint(String),
    #[error("{}non-head daughter `{name}` is a terminal category", line_prefix(*.line))]
    TerminalFlank { line: Option<usize>, name: String },
    #[error("unary rules form a cycle through `{0}`")]
    UnaryCycle(String),
    #[error("generated category `{0}` collides with an existing category")]
    NameCollision(String),
    #[error("state rules need at least one phrasal category")]
    EmptyPhrasal,
    #[error("invalid grammar: {}", join_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
}

fn line_prefix(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone)]
struct PendingRule {
    rule: NamedRule,
    line: Option<usize>,
}

/// Collects grammar statements by name and interns them into a [`HeadedGrammar`].
#[derive(Debug, Clone, Default)]
pub struct GrammarBuilder {
    start: Option<String>,
    rules: Vec<PendingRule>,
    lexicon: Vec<(String, Vec<String>, Option<usize>)>,
    chunks: Vec<(String, Option<usize>)>,
    nonterminals: Vec<String>,
    terminals: Vec<String>,
}

impl GrammarBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start(&mut self, name: &str) -> &mut Self {
        self.start = Some(name.to_string());
        self
    }

    pub fn rule(&mut self, rule: NamedRule) -> &mut Self {
        self.rules.push(PendingRule { rule, line: None });
        self
    }

    pub(crate) fn rule_at(&mut self, rule: NamedRule, line: usize) -> &mut Self {
        self.rules.push(PendingRule {
            rule,
            line: Some(line),
        });
        self
    }

    pub fn word(&mut self, word: &str, tags: &[&str]) -> &mut Self {
        self.lexicon.push((
            word.to_string(),
            tags.iter().map(|t| t.to_string()).collect(),
            None,
        ));
        self
    }

    pub(crate) fn word_at(&mut self, word: &str, tags: Vec<String>, line: usize) -> &mut Self {
        self.lexicon.push((word.to_string(), tags, Some(line)));
        self
    }

    pub fn chunk(&mut self, name: &str) -> &mut Self {
        self.chunks.push((name.to_string(), None));
        self
    }

    pub(crate) fn chunk_at(&mut self, name: &str, line: usize) -> &mut Self {
        self.chunks.push((name.to_string(), Some(line)));
        self
    }

    /// Declares a nonterminal explicitly, whether or not any rule expands it.
    pub fn nonterminal(&mut self, name: &str) -> &mut Self {
        self.nonterminals.push(name.to_string());
        self
    }

    /// Declares a terminal explicitly, whether or not any word carries it.
    pub fn terminal(&mut self, name: &str) -> &mut Self {
        self.terminals.push(name.to_string());
        self
    }

    /// Builds and validates; any diagnostic from [`validate`] is an error.
    pub fn build(&self) -> Result<HeadedGrammar, GrammarError> {
        let g = self.build_unchecked()?;
        let diagnostics = validate(&g);
        if diagnostics.is_empty() {
            Ok(g)
        } else {
            Err(GrammarError::Invalid(diagnostics))
        }
    }

    /// Builds without checking the grammar conditions. Structural errors
    /// (unknown names, terminal flanks, unary cycles) are still reported.
    pub fn build_unchecked(&self) -> Result<HeadedGrammar, GrammarError> {
        let start = self.start.clone().ok_or(GrammarError::MissingStart)?;

        fn push_new(name: &str, list: &mut Vec<String>, seen: &mut BTreeSet<String>) {
            if seen.insert(name.to_string()) {
                list.push(name.to_string());
            }
        }
        let mut nonterminal_names: Vec<String> = Vec::new();
        let mut seen_nt = BTreeSet::new();
        for r in &self.rules {
            push_new(&r.rule.lhs, &mut nonterminal_names, &mut seen_nt);
        }
        for n in &self.nonterminals {
            push_new(n, &mut nonterminal_names, &mut seen_nt);
        }

        let mut terminal_names: Vec<String> = Vec::new();
        let mut seen_t = BTreeSet::new();
        for (_, tags, _) in &self.lexicon {
            for t in tags {
                push_new(t, &mut terminal_names, &mut seen_t);
            }
        }
        for t in &self.terminals {
            push_new(t, &mut terminal_names, &mut seen_t);
        }
        if let Some(name) = terminal_names.iter().find(|t| seen_nt.contains(*t)) {
            return Err(GrammarError::NotDisjoint(name.clone()));
        }
        if seen_t.contains(&start) {
            return Err(GrammarError::StartNotNonterminal(start));
        }
        // A start symbol that nothing expands is still a nonterminal.
        push_new(&start, &mut nonterminal_names, &mut seen_nt);

        let mut categories = Vec::new();
        let mut by_name = HashMap::new();
        for name in &nonterminal_names {
            by_name.insert(name.clone(), Cat(categories.len() as u32));
            categories.push(Category {
                name: name.clone(),
                kind: CategoryKind::Nonterminal,
                chunk: false,
            });
        }
        for name in &terminal_names {
            by_name.insert(name.clone(), Cat(categories.len() as u32));
            categories.push(Category {
                name: name.clone(),
                kind: CategoryKind::Terminal,
                chunk: false,
            });
        }

        let lookup = |name: &str, line: Option<usize>| -> Result<Cat, GrammarError> {
            by_name.get(name).copied().ok_or(GrammarError::Undeclared {
                line,
                name: name.to_string(),
            })
        };

        let mut rules = Vec::new();
        let mut seen_rules = BTreeSet::new();
        for pending in &self.rules {
            let r = &pending.rule;
            let flank = |names: &[String]| -> Result<Vec<Cat>, GrammarError> {
                names
                    .iter()
                    .map(|n| {
                        let c = lookup(n, pending.line)?;
                        if categories[c.index()].kind == CategoryKind::Terminal {
                            Err(GrammarError::TerminalFlank {
                                line: pending.line,
                                name: n.clone(),
                            })
                        } else {
                            Ok(c)
                        }
                    })
                    .collect()
            };
            let rule = HeadedRule {
                lhs: lookup(&r.lhs, pending.line)?,
                left: flank(&r.left)?,
                head: lookup(&r.head, pending.line)?,
                right: flank(&r.right)?,
            };
            if seen_rules.insert(rule.clone()) {
                rules.push(rule);
            }
        }

        for (name, line) in &self.chunks {
            let c = lookup(name, *line)?;
            categories[c.index()].chunk = true;
        }

        let mut lexicon: BTreeMap<Word, Vec<Cat>> = BTreeMap::new();
        for (word, tags, _) in &self.lexicon {
            let entry = lexicon.entry(Word::new(word)).or_default();
            for t in tags {
                let c = by_name[t.as_str()];
                if !entry.contains(&c) {
                    entry.push(c);
                }
            }
        }

        let start = by_name[start.as_str()];
        HeadedGrammar::assemble(categories, by_name, lexicon, rules, start)
    }
}

/// A validated headed context-free grammar with precomputed indexes.
#[derive(Debug, Clone)]
pub struct HeadedGrammar {
    categories: Vec<Category>,
    by_name: HashMap<String, Cat>,
    lexicon: BTreeMap<Word, Vec<Cat>>,
    rules: Vec<HeadedRule>,
    start: Cat,
    rules_by_lhs: Vec<Vec<RuleId>>,
    slot_in_lhs: Vec<usize>,
    unary_by_daughter: Vec<Vec<RuleId>>,
    branching_by_first: Vec<Vec<RuleId>>,
    /// Topological rank: a unary daughter always ranks below its mother.
    rank: Vec<usize>,
    by_rank: Vec<Cat>,
    /// Nonterminals reachable from each category through head projection.
    projections: Vec<Vec<Cat>>,
    complement_cats: Vec<Vec<Cat>>,
    left_corner: Vec<bool>,
    right_corner: Vec<bool>,
}

impl HeadedGrammar {
    fn assemble(
        categories: Vec<Category>,
        by_name: HashMap<String, Cat>,
        lexicon: BTreeMap<Word, Vec<Cat>>,
        rules: Vec<HeadedRule>,
        start: Cat,
    ) -> Result<Self, GrammarError> {
        let n = categories.len();
        let mut rules_by_lhs = vec![Vec::new(); n];
        let mut slot_in_lhs = Vec::with_capacity(rules.len());
        let mut unary_by_daughter = vec![Vec::new(); n];
        let mut branching_by_first = vec![Vec::new(); n];
        let mut complement_cats: Vec<Vec<Cat>> = vec![Vec::new(); n];
        for (i, r) in rules.iter().enumerate() {
            let id = RuleId(i as u32);
            slot_in_lhs.push(rules_by_lhs[r.lhs.index()].len());
            rules_by_lhs[r.lhs.index()].push(id);
            if r.arity() == 1 {
                unary_by_daughter[r.head.index()].push(id);
            } else {
                branching_by_first[r.daughter(0).index()].push(id);
            }
            for c in r.complements() {
                if !complement_cats[r.lhs.index()].contains(&c) {
                    complement_cats[r.lhs.index()].push(c);
                }
            }
        }

        // Kahn's algorithm over unary edges daughter -> mother.
        let mut indegree = vec![0usize; n];
        for r in &rules {
            if r.arity() == 1 {
                indegree[r.lhs.index()] += 1;
            }
        }
        let mut queue: VecDeque<usize> = (0..n).filter(|&c| indegree[c] == 0).collect();
        let mut by_rank = Vec::with_capacity(n);
        while let Some(c) = queue.pop_front() {
            by_rank.push(Cat(c as u32));
            for &rid in &unary_by_daughter[c] {
                let m = rules[rid.index()].lhs.index();
                indegree[m] -= 1;
                if indegree[m] == 0 {
                    queue.push_back(m);
                }
            }
        }
        if by_rank.len() < n {
            let stuck = (0..n).find(|&c| indegree[c] > 0).unwrap();
            return Err(GrammarError::UnaryCycle(categories[stuck].name.clone()));
        }
        let mut rank = vec![0; n];
        for (i, c) in by_rank.iter().enumerate() {
            rank[c.index()] = i;
        }

        let mut head_parents: Vec<Vec<Cat>> = vec![Vec::new(); n];
        for r in &rules {
            if !head_parents[r.head.index()].contains(&r.lhs) {
                head_parents[r.head.index()].push(r.lhs);
            }
        }
        let projections = (0..n)
            .map(|c| {
                let mut seen = vec![false; n];
                let mut stack = head_parents[c].clone();
                let mut out = Vec::new();
                while let Some(p) = stack.pop() {
                    if !seen[p.index()] {
                        seen[p.index()] = true;
                        out.push(p);
                        stack.extend(head_parents[p.index()].iter().copied());
                    }
                }
                out.sort();
                out
            })
            .collect();

        let corner = |pick: &dyn Fn(&HeadedRule) -> Cat| {
            let mut mark = vec![false; n];
            let mut stack = vec![start];
            while let Some(c) = stack.pop() {
                if mark[c.index()] {
                    continue;
                }
                mark[c.index()] = true;
                for &rid in &rules_by_lhs[c.index()] {
                    stack.push(pick(&rules[rid.index()]));
                }
            }
            mark
        };
        let left_corner = corner(&|r| r.daughter(0));
        let right_corner = corner(&|r| r.daughter(r.arity() - 1));

        Ok(HeadedGrammar {
            categories,
            by_name,
            lexicon,
            rules,
            start,
            rules_by_lhs,
            slot_in_lhs,
            unary_by_daughter,
            branching_by_first,
            rank,
            by_rank,
            projections,
            complement_cats,
            left_corner,
            right_corner,
        })
    }

    pub fn start(&self) -> Cat {
        self.start
    }

    pub fn categories(&self) -> &[Category] {
        &self.categories
    }

    pub fn category(&self, c: Cat) -> &Category {
        &self.categories[c.index()]
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len()
    }

    pub fn cats(&self) -> impl Iterator<Item = Cat> {
        (0..self.categories.len() as u32).map(Cat)
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = Cat> + '_ {
        self.cats().filter(|&c| self.is_nonterminal(c))
    }

    pub fn terminals(&self) -> impl Iterator<Item = Cat> + '_ {
        self.cats().filter(|&c| !self.is_nonterminal(c))
    }

    /// Category name; the virtual root parent prints as `<START>`.
    pub fn name(&self, c: Cat) -> &str {
        if c.is_start() {
            "<START>"
        } else {
            &self.categories[c.index()].name
        }
    }

    pub fn lookup(&self, name: &str) -> Option<Cat> {
        if name == "<START>" {
            return Some(Cat::START);
        }
        self.by_name.get(name).copied()
    }

    pub fn is_nonterminal(&self, c: Cat) -> bool {
        self.categories[c.index()].kind == CategoryKind::Nonterminal
    }

    pub fn is_chunk(&self, c: Cat) -> bool {
        !c.is_start() && self.categories[c.index()].chunk
    }

    pub fn rules(&self) -> &[HeadedRule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &HeadedRule {
        &self.rules[id.index()]
    }

    pub fn rule_ids(&self) -> impl Iterator<Item = RuleId> {
        (0..self.rules.len() as u32).map(RuleId)
    }

    pub fn rules_with_lhs(&self, lhs: Cat) -> &[RuleId] {
        &self.rules_by_lhs[lhs.index()]
    }

    /// Position of a rule within the rules sharing its left-hand side.
    pub fn slot_in_lhs(&self, id: RuleId) -> usize {
        self.slot_in_lhs[id.index()]
    }

    pub(crate) fn unary_with_daughter(&self, c: Cat) -> &[RuleId] {
        &self.unary_by_daughter[c.index()]
    }

    pub(crate) fn branching_with_first(&self, c: Cat) -> &[RuleId] {
        &self.branching_by_first[c.index()]
    }

    pub(crate) fn cats_by_rank(&self) -> &[Cat] {
        &self.by_rank
    }

    pub(crate) fn rank(&self, c: Cat) -> usize {
        self.rank[c.index()]
    }

    pub(crate) fn is_left_corner(&self, c: Cat) -> bool {
        self.left_corner[c.index()]
    }

    pub(crate) fn is_right_corner(&self, c: Cat) -> bool {
        self.right_corner[c.index()]
    }

    /// Distinct non-head daughter categories over all rules expanding `lhs`.
    /// For [`Cat::START`] this is the start symbol alone.
    pub fn complement_categories(&self, lhs: Cat) -> &[Cat] {
        if lhs.is_start() {
            std::slice::from_ref(&self.start)
        } else {
            &self.complement_cats[lhs.index()]
        }
    }

    /// Renders a rule as `LHS -> A B' C`.
    pub fn rule_text(&self, id: RuleId) -> String {
        self.named_rule(id).to_string()
    }

    pub fn named_rule(&self, id: RuleId) -> NamedRule {
        let r = self.rule(id);
        let names = |cs: &[Cat]| cs.iter().map(|&c| self.name(c).to_string()).collect();
        NamedRule {
            lhs: self.name(r.lhs).to_string(),
            left: names(&r.left),
            head: self.name(r.head).to_string(),
            right: names(&r.right),
        }
    }

    /// Finds a rule by its parts.
    pub fn find_rule(&self, lhs: Cat, left: &[Cat], head: Cat, right: &[Cat]) -> Option<RuleId> {
        self.rules_with_lhs(lhs).iter().copied().find(|&id| {
            let r = self.rule(id);
            r.head == head && r.left == left && r.right == right
        })
    }

    pub fn lexicon(&self) -> &BTreeMap<Word, Vec<Cat>> {
        &self.lexicon
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.lexicon.keys()
    }

    pub fn tags_of(&self, word: &str) -> Option<&[Cat]> {
        self.lexicon.get(word).map(|v| v.as_slice())
    }

    /// Nonterminals `n` such that a head chain leads from `c` up to `n`.
    pub fn projections_of(&self, c: Cat) -> &[Cat] {
        &self.projections[c.index()]
    }

    /// Whether some word of category `tag` can head `target` (or `tag == target`).
    pub fn projects(&self, tag: Cat, target: Cat) -> bool {
        tag == target || self.projections[tag.index()].binary_search(&target).is_ok()
    }

    /// The lexicalized nonterminals of the grammar's own lexicon.
    pub fn lexicalized_nonterminals(&self) -> BTreeSet<LexicalizedNonterminal> {
        let mut out = BTreeSet::new();
        for (w, tags) in &self.lexicon {
            for &t in tags {
                for &n in self.projections_of(t) {
                    out.insert(LexicalizedNonterminal {
                        word: w.clone(),
                        category: n,
                    });
                }
            }
        }
        out
    }

    /// A builder holding this grammar's statements, for extension.
    pub fn to_builder(&self) -> GrammarBuilder {
        let mut b = GrammarBuilder::new();
        b.start(self.name(self.start));
        for id in self.rule_ids() {
            b.rule(self.named_rule(id));
        }
        for (w, tags) in &self.lexicon {
            let names: Vec<&str> = tags.iter().map(|&t| self.name(t)).collect();
            b.word(w.as_str(), &names);
        }
        for c in &self.categories {
            if c.chunk {
                b.chunk(&c.name);
            }
            match c.kind {
                CategoryKind::Nonterminal => b.nonterminal(&c.name),
                CategoryKind::Terminal => b.terminal(&c.name),
            };
        }
        b
    }

    /// Adds right-branching state rules over `phrasal` categories.
    pub fn with_state_rules(&self, phrasal: &[&str]) -> Result<HeadedGrammar, GrammarError> {
        let generated = generate_state_rules(self, phrasal)?;
        let mut b = self.to_builder();
        for r in generated.rules {
            b.rule(r);
        }
        b.build()
    }

    /// Serializes to the grammar DSL.
    pub fn to_dsl(&self) -> String {
        dsl::write_grammar(self)
    }
}

/// A word that can head a nonterminal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LexicalizedNonterminal {
    pub word: Word,
    pub category: Cat,
}

/// Least fixpoint of head projection over the lexicon.
///
/// Starting from the lexicon pairs `(w, t)`, any rule with head `n` lifts
/// `(w, n)` to `(w, lhs)`. Only nonterminal pairs are returned.
pub fn projection_closure(g: &HeadedGrammar) -> BTreeSet<LexicalizedNonterminal> {
    let seed = g
        .lexicon()
        .iter()
        .flat_map(|(w, tags)| tags.iter().map(move |&t| (w.clone(), t)));
    close_projection(g, seed)
        .into_iter()
        .filter(|(_, c)| g.is_nonterminal(*c))
        .map(|(word, category)| LexicalizedNonterminal { word, category })
        .collect()
}

/// Closes an arbitrary set of `(word, category)` pairs under projection.
pub fn close_projection(
    g: &HeadedGrammar,
    seed: impl IntoIterator<Item = (Word, Cat)>,
) -> BTreeSet<(Word, Cat)> {
    let mut parents: HashMap<Cat, Vec<Cat>> = HashMap::new();
    for r in g.rules() {
        parents.entry(r.head).or_default().push(r.lhs);
    }
    let mut done = BTreeSet::new();
    let mut work: Vec<(Word, Cat)> = seed.into_iter().collect();
    while let Some(pair) = work.pop() {
        if done.contains(&pair) {
            continue;
        }
        if let Some(ps) = parents.get(&pair.1) {
            for &p in ps {
                work.push((pair.0.clone(), p));
            }
        }
        done.insert(pair);
    }
    done
}

/// Reports every violated grammar condition. Empty iff the grammar is valid.
pub fn validate(g: &HeadedGrammar) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut names = BTreeSet::new();
    for c in g.categories() {
        if !names.insert(c.name.as_str()) {
            out.push(Diagnostic {
                condition: Condition::Disjoint,
                symbol: c.name.clone(),
                message: format!("category `{}` is declared twice", c.name),
            });
        }
    }
    for (w, tags) in g.lexicon() {
        let terminal = tags.iter().filter(|&&t| !g.is_nonterminal(t)).count();
        if terminal == 0 || terminal != tags.len() {
            out.push(Diagnostic {
                condition: Condition::Lexicon,
                symbol: w.to_string(),
                message: format!("word `{w}` must map to terminal categories only, and at least one"),
            });
        }
    }
    let mut expanded = vec![false; g.num_categories()];
    let mut used = vec![false; g.num_categories()];
    for r in g.rules() {
        expanded[r.lhs.index()] = true;
        for d in r.daughters() {
            used[d.index()] = true;
        }
    }
    for c in g.cats() {
        let cat = g.category(c);
        match cat.kind {
            CategoryKind::Nonterminal if !expanded[c.index()] => out.push(Diagnostic {
                condition: Condition::Productions,
                symbol: cat.name.clone(),
                message: format!("nonterminal `{}` is not the left-hand side of any rule", cat.name),
            }),
            CategoryKind::Terminal if !used[c.index()] => out.push(Diagnostic {
                condition: Condition::Productions,
                symbol: cat.name.clone(),
                message: format!("terminal `{}` occurs on no right-hand side", cat.name),
            }),
            _ => {}
        }
    }
    if !g.is_nonterminal(g.start()) {
        out.push(Diagnostic {
            condition: Condition::Start,
            symbol: g.name(g.start()).to_string(),
            message: "start symbol is not a nonterminal".to_string(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> HeadedGrammar {
        let mut b = GrammarBuilder::new();
        b.start("M")
            .rule(NamedRule::new("N", &[], "T", &[]))
            .rule(NamedRule::new("M", &[], "N", &[]))
            .word("w", &["T"]);
        b.build().unwrap()
    }

    fn pairs(g: &HeadedGrammar, set: &BTreeSet<LexicalizedNonterminal>) -> Vec<(String, String)> {
        set.iter()
            .map(|l| (l.word.to_string(), g.name(l.category).to_string()))
            .collect()
    }

    #[test]
    fn projection_follows_single_chain() {
        let g = chain();
        let mut got = pairs(&g, &projection_closure(&g));
        got.sort();
        assert_eq!(
            got,
            vec![("w".into(), "M".into()), ("w".into(), "N".into())]
        );
    }

    #[test]
    fn projection_ignores_flanking_daughters() {
        let mut b = GrammarBuilder::new();
        b.start("N")
            .rule(NamedRule::new("N", &["X"], "T", &["Y"]))
            .rule(NamedRule::new("X", &[], "U", &[]))
            .rule(NamedRule::new("Y", &[], "U", &[]))
            .word("w", &["T"])
            .word("u", &["U"]);
        let g = b.build().unwrap();
        let got = pairs(&g, &projection_closure(&g));
        assert!(got.contains(&("w".into(), "N".into())));
        assert!(!got.contains(&("u".into(), "N".into())));
    }

    #[test]
    fn closure_is_a_fixpoint_and_closed_under_rules() {
        let g = chain();
        let closed = projection_closure(&g);
        let again = close_projection(
            &g,
            closed
                .iter()
                .map(|l| (l.word.clone(), l.category))
                .chain(g.lexicon().iter().flat_map(|(w, ts)| ts.iter().map(move |&t| (w.clone(), t)))),
        );
        let again: BTreeSet<_> = again.into_iter().filter(|(_, c)| g.is_nonterminal(*c)).collect();
        assert_eq!(again.len(), closed.len());
        assert_eq!(g.lexicalized_nonterminals(), closed);
    }

    #[test]
    fn validate_reports_unexpanded_nonterminal() {
        let mut b = GrammarBuilder::new();
        b.start("S")
            .rule(NamedRule::new("S", &[], "A", &[]))
            .nonterminal("X")
            .word("w", &["A"]);
        let g = b.build_unchecked().unwrap();
        let d = validate(&g);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].condition, Condition::Productions);
        assert_eq!(d[0].symbol, "X");
        assert!(d[0].to_string().contains("(iv)"));
        assert!(matches!(b.build(), Err(GrammarError::Invalid(_))));
    }

    #[test]
    fn validate_reports_unused_terminal() {
        let mut b = GrammarBuilder::new();
        b.start("S")
            .rule(NamedRule::new("S", &[], "A", &[]))
            .word("w", &["A"])
            .word("v", &["B"]);
        let g = b.build_unchecked().unwrap();
        let d = validate(&g);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].symbol, "B");
        assert_eq!(d[0].condition, Condition::Productions);
    }

    #[test]
    fn valid_grammar_has_no_diagnostics() {
        assert!(validate(&chain()).is_empty());
    }

    #[test]
    fn unary_cycle_is_rejected() {
        let mut b = GrammarBuilder::new();
        b.start("A")
            .rule(NamedRule::new("A", &[], "B", &[]))
            .rule(NamedRule::new("B", &[], "A", &[]))
            .rule(NamedRule::new("B", &[], "T", &[]))
            .word("w", &["T"]);
        assert!(matches!(b.build(), Err(GrammarError::UnaryCycle(_))));
    }

    #[test]
    fn terminal_flank_is_rejected() {
        let mut b = GrammarBuilder::new();
        b.start("S")
            .rule(NamedRule::new("S", &["T"], "T", &[]))
            .word("w", &["T"]);
        assert!(matches!(b.build(), Err(GrammarError::TerminalFlank { .. })));
    }

    #[test]
    fn overlapping_terminal_and_nonterminal_is_rejected() {
        let mut b = GrammarBuilder::new();
        b.start("S")
            .rule(NamedRule::new("S", &[], "A", &[]))
            .rule(NamedRule::new("A", &[], "T", &[]))
            .word("w", &["A"]);
        assert!(matches!(b.build(), Err(GrammarError::NotDisjoint(_))));
    }

    #[test]
    fn unary_rank_orders_daughters_first() {
        let g = chain();
        let t = g.lookup("T").unwrap();
        let n = g.lookup("N").unwrap();
        let m = g.lookup("M").unwrap();
        assert!(g.rank(t) < g.rank(n) && g.rank(n) < g.rank(m));
    }
}
