//! Bottom-up CKY-style chart construction for rules of any arity.

use std::collections::BTreeMap;

use super::forest::{AndNode, Item, ItemId, ParseForest};
use super::{ParseError, ParseOptions, Sentence};
use crate::grammar::HeadedGrammar;
use crate::symbol::{Cat, RuleId};

pub fn parse(s: &Sentence, g: &HeadedGrammar) -> Result<ParseForest, ParseError> {
    parse_with(s, g, ParseOptions::default())
}

pub fn parse_with(
    s: &Sentence,
    g: &HeadedGrammar,
    opts: ParseOptions,
) -> Result<ParseForest, ParseError> {
    let n = s.len();
    if n == 0 {
        return Err(ParseError::EmptySentence);
    }
    let tags = allowed_tags(s, g, opts.open_lexicon)?;
    let mut chart = Chart::new(n, g, opts.filter);

    for (i, cands) in tags.iter().enumerate() {
        for &t in cands {
            chart.item(i, i + 1, t);
        }
        chart.close_unary(i, i + 1);
    }
    for len in 2..=n {
        for i in 0..=n - len {
            let j = i + len;
            for e in i + 1..j {
                let firsts: Vec<(Cat, ItemId)> =
                    chart.cell(i, e).iter().map(|(&c, &id)| (c, id)).collect();
                for (c, first) in firsts {
                    for &rid in g.branching_with_first(c) {
                        if !chart.allowed(i, j, g.rule(rid).lhs) {
                            continue;
                        }
                        let mut kids = vec![first];
                        chart.match_rest(rid, 1, e, j, &mut kids);
                    }
                }
            }
            chart.close_unary(i, j);
        }
    }
    let root = *chart.cell(0, n).get(&g.start()).ok_or(ParseError::NoParse)?;
    Ok(chart.finish(root, s))
}

fn allowed_tags(s: &Sentence, g: &HeadedGrammar, open: bool) -> Result<Vec<Vec<Cat>>, ParseError> {
    s.tokens
        .iter()
        .enumerate()
        .map(|(position, tok)| {
            if tok.tags.is_empty() {
                return Err(ParseError::EmptyTags {
                    position,
                    word: tok.word.to_string(),
                });
            }
            let mut from_token: Vec<Cat> = tok
                .tags
                .iter()
                .filter_map(|t| g.lookup(t))
                .filter(|&c| !g.is_nonterminal(c))
                .collect();
            from_token.sort();
            from_token.dedup();
            match g.tags_of(tok.word.as_str()) {
                Some(lex) => Ok(from_token.into_iter().filter(|c| lex.contains(c)).collect()),
                None if open => Ok(from_token),
                None => Err(ParseError::UnknownWord(tok.word.to_string())),
            }
        })
        .collect()
}

struct Chart<'g> {
    n: usize,
    g: &'g HeadedGrammar,
    filter: bool,
    cells: Vec<BTreeMap<Cat, ItemId>>,
    items: Vec<Item>,
    ands: Vec<Vec<AndNode>>,
}

impl<'g> Chart<'g> {
    fn new(n: usize, g: &'g HeadedGrammar, filter: bool) -> Self {
        Chart {
            n,
            g,
            filter,
            cells: vec![BTreeMap::new(); (n + 1) * (n + 1)],
            items: Vec::new(),
            ands: Vec::new(),
        }
    }

    fn cell(&self, i: usize, j: usize) -> &BTreeMap<Cat, ItemId> {
        &self.cells[i * (self.n + 1) + j]
    }

    /// An item at the left edge must lie on the left spine of some tree, and
    /// likewise for the right edge.
    fn allowed(&self, i: usize, j: usize, c: Cat) -> bool {
        !self.filter
            || ((i != 0 || self.g.is_left_corner(c)) && (j != self.n || self.g.is_right_corner(c)))
    }

    fn item(&mut self, i: usize, j: usize, c: Cat) -> Option<ItemId> {
        if !self.allowed(i, j, c) {
            return None;
        }
        let idx = i * (self.n + 1) + j;
        if let Some(&id) = self.cells[idx].get(&c) {
            return Some(id);
        }
        let id = self.items.len();
        self.items.push(Item {
            start: i,
            end: j,
            cat: c,
        });
        self.ands.push(Vec::new());
        self.cells[idx].insert(c, id);
        Some(id)
    }

    fn add(&mut self, i: usize, j: usize, rid: RuleId, children: Vec<ItemId>) {
        let r = self.g.rule(rid);
        let head = r.head_position();
        if let Some(id) = self.item(i, j, r.lhs) {
            self.ands[id].push(AndNode {
                rule: rid,
                head,
                children,
            });
        }
    }

    /// Extends a partial match of `rid` whose daughters before `k` cover up
    /// to position `p`, requiring the remaining daughters to end at `j`.
    fn match_rest(&mut self, rid: RuleId, k: usize, p: usize, j: usize, kids: &mut Vec<ItemId>) {
        let r = self.g.rule(rid);
        let arity = r.arity();
        if k == arity {
            if p == j {
                let start = self.items[kids[0]].start;
                self.add(start, j, rid, kids.clone());
            }
            return;
        }
        let want = r.daughter(k);
        let remaining = arity - k - 1;
        for e in p + 1..=j - remaining {
            if let Some(&id) = self.cell(p, e).get(&want) {
                kids.push(id);
                self.match_rest(rid, k + 1, e, j, kids);
                kids.pop();
            }
        }
    }

    fn close_unary(&mut self, i: usize, j: usize) {
        if self.cell(i, j).is_empty() {
            return;
        }
        for &c in self.g.cats_by_rank() {
            let Some(&id) = self.cell(i, j).get(&c) else {
                continue;
            };
            for &rid in self.g.unary_with_daughter(c) {
                self.add(i, j, rid, vec![id]);
            }
        }
    }

    /// Keeps the items reachable from the root, renumbered bottom-up.
    fn finish(self, root: ItemId, s: &Sentence) -> ParseForest {
        let mut reachable = vec![false; self.items.len()];
        let mut stack = vec![root];
        reachable[root] = true;
        while let Some(id) = stack.pop() {
            for a in &self.ands[id] {
                for &c in &a.children {
                    if !reachable[c] {
                        reachable[c] = true;
                        stack.push(c);
                    }
                }
            }
        }
        let mut order: Vec<ItemId> = (0..self.items.len()).filter(|&i| reachable[i]).collect();
        order.sort_by_key(|&id| {
            let it = self.items[id];
            (it.end - it.start, it.start, self.g.rank(it.cat))
        });
        let mut new_id = vec![usize::MAX; self.items.len()];
        for (k, &old) in order.iter().enumerate() {
            new_id[old] = k;
        }
        let items: Vec<Item> = order.iter().map(|&old| self.items[old]).collect();
        let mut ands: Vec<Vec<AndNode>> = Vec::with_capacity(order.len());
        for &old in &order {
            let mut list: Vec<AndNode> = self.ands[old]
                .iter()
                .map(|a| AndNode {
                    rule: a.rule,
                    head: a.head,
                    children: a.children.iter().map(|&c| new_id[c]).collect(),
                })
                .collect();
            list.sort_by_cached_key(|a| {
                let starts: Vec<usize> = a.children.iter().map(|&c| items[c].start).collect();
                (a.rule, starts)
            });
            ands.push(list);
        }
        ParseForest {
            words: s.tokens.iter().map(|t| t.word.clone()).collect(),
            items,
            ands,
            root: new_id[root],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::parse_grammar;
    use crate::parser::Token;

    fn sent(tokens: &[(&str, &[&str])]) -> Sentence {
        Sentence::new(tokens.iter().map(|(w, t)| Token::new(w, t)).collect())
    }

    #[test]
    fn single_tree() {
        let g = parse_grammar("start S; S -> A'; w : A;").unwrap();
        let f = parse(&sent(&[("w", &["A"])]), &g).unwrap();
        assert_eq!(f.count_trees(), 1);
        assert_eq!(f.enumerate_trees(10).len(), 1);
    }

    #[test]
    fn tag_constraint_blocks_parse() {
        let g = parse_grammar("start S; S -> A' | B'; w : A; v : B;").unwrap();
        assert_eq!(parse(&sent(&[("w", &["B"])]), &g).unwrap_err(), ParseError::NoParse);
    }

    #[test]
    fn two_trees_share_the_root() {
        let g = parse_grammar("start S; S -> A' | B'; w : A B;").unwrap();
        let f = parse(&sent(&[("w", &["A", "B"])]), &g).unwrap();
        assert_eq!(f.count_trees(), 2);
        assert_eq!(f.ands(f.root()).len(), 2);
        let trees = f.enumerate_trees(10);
        assert_eq!(trees.len(), 2);
        assert_ne!(trees[0], trees[1]);
        assert_eq!(f.enumerate_trees(1), f.enumerate_trees(1));
        assert_eq!(f.enumerate_trees(1)[0], trees[0]);
    }

    #[test]
    fn errors_for_empty_input() {
        let g = parse_grammar("start S; S -> A'; w : A;").unwrap();
        assert_eq!(parse(&sent(&[]), &g).unwrap_err(), ParseError::EmptySentence);
        assert!(matches!(
            parse(&sent(&[("w", &[])]), &g),
            Err(ParseError::EmptyTags { position: 0, .. })
        ));
    }

    #[test]
    fn unknown_words_follow_lexicon_mode() {
        let g = parse_grammar("start S; S -> A'; w : A;").unwrap();
        let s = sent(&[("zebra", &["A"])]);
        assert!(parse(&s, &g).is_ok());
        let strict = ParseOptions {
            open_lexicon: false,
            ..Default::default()
        };
        assert_eq!(parse_with(&s, &g, strict).unwrap_err(), ParseError::UnknownWord("zebra".into()));
    }

    #[test]
    fn ternary_rule_and_attachment_ambiguity() {
        let g = parse_grammar(
            "start VP;\nVP -> V' NP | V' NP PP;\nNP -> N' | N' PP;\nPP -> P' NP;\n\
             saw : V; man : N; park : N; in : P;",
        )
        .unwrap();
        let s = sent(&[("saw", &["V"]), ("man", &["N"]), ("in", &["P"]), ("park", &["N"])]);
        let f = parse(&s, &g).unwrap();
        assert_eq!(f.count_trees(), 2);
        for t in f.enumerate_trees(5) {
            let words: Vec<String> = t.leaves().iter().map(|(w, _)| w.to_string()).collect();
            assert_eq!(words, ["saw", "man", "in", "park"]);
        }
    }

    #[test]
    fn items_are_stored_children_first() {
        let g = parse_grammar("start S; S -> S S' | A'; A -> X'; w : X;").unwrap();
        let s = sent(&[("w", &["X"]), ("w", &["X"]), ("w", &["X"]), ("w", &["X"])]);
        let f = parse(&s, &g).unwrap();
        for id in 0..f.items().len() {
            for a in f.ands(id) {
                assert!(a.children.iter().all(|&c| c < id));
            }
        }
        // Catalan(3) bracketings of four tokens
        assert_eq!(f.count_trees(), 5);
    }
}
