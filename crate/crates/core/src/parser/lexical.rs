//! Head-word splitting of a packed forest.
//!
//! Every item is split into one version per head word it can have. An
//! and-node of a version fixes the version of its head child only; each
//! non-head child stays unlexicalized, and weights sum or maximize over its
//! versions. This keeps the forest linear in the number of head words per
//! item rather than exponential in the rule arity.

use std::collections::BTreeMap;

use super::forest::{product, ItemId, ParseForest};
use crate::events::{LabeledTree, TreeNode};
use crate::symbol::{RuleId, Word};

pub type LexItemId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexItem {
    pub item: ItemId,
    pub head: Word,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexAnd {
    pub rule: RuleId,
    /// Position of the head daughter.
    pub head: usize,
    pub head_child: LexItemId,
    /// All daughters, unlexicalized.
    pub children: Vec<ItemId>,
}

#[derive(Debug, Clone)]
pub struct LexForest {
    forest: ParseForest,
    items: Vec<LexItem>,
    ands: Vec<Vec<LexAnd>>,
    versions: Vec<Vec<LexItemId>>,
}

pub fn lexicalize_forest(forest: ParseForest) -> LexForest {
    let n = forest.items.len();
    let mut items = Vec::new();
    let mut ands: Vec<Vec<LexAnd>> = Vec::new();
    let mut versions = vec![Vec::new(); n];
    for id in 0..n {
        if forest.is_leaf(id) {
            versions[id].push(items.len());
            items.push(LexItem {
                item: id,
                head: forest.words[forest.items[id].start].clone(),
            });
            ands.push(Vec::new());
            continue;
        }
        let mut by_word: BTreeMap<Word, Vec<LexAnd>> = BTreeMap::new();
        for a in &forest.ands[id] {
            for &v in &versions[a.children[a.head]] {
                by_word
                    .entry(items[v].head.clone())
                    .or_default()
                    .push(LexAnd {
                        rule: a.rule,
                        head: a.head,
                        head_child: v,
                        children: a.children.clone(),
                    });
            }
        }
        for (head, list) in by_word {
            versions[id].push(items.len());
            items.push(LexItem { item: id, head });
            ands.push(list);
        }
    }
    LexForest {
        forest,
        items,
        ands,
        versions,
    }
}

impl LexForest {
    pub fn forest(&self) -> &ParseForest {
        &self.forest
    }

    pub fn items(&self) -> &[LexItem] {
        &self.items
    }

    pub fn item(&self, id: LexItemId) -> &LexItem {
        &self.items[id]
    }

    pub fn ands(&self, id: LexItemId) -> &[LexAnd] {
        &self.ands[id]
    }

    /// The head-word versions of an unlexicalized item, ordered by word.
    pub fn versions(&self, item: ItemId) -> &[LexItemId] {
        &self.versions[item]
    }

    pub fn roots(&self) -> &[LexItemId] {
        &self.versions[self.forest.root]
    }

    pub fn num_and_nodes(&self) -> usize {
        self.ands.iter().map(Vec::len).sum()
    }

    pub fn count_trees(&self) -> u128 {
        let mut count = vec![0u128; self.items.len()];
        let mut item_total = vec![0u128; self.forest.items.len()];
        for id in 0..self.items.len() {
            let it = self.items[id].item;
            count[id] = if self.ands[id].is_empty() {
                1
            } else {
                self.ands[id].iter().fold(0u128, |acc, a| {
                    let prod = a.children.iter().enumerate().fold(1u128, |p, (k, &c)| {
                        let f = if k == a.head { count[a.head_child] } else { item_total[c] };
                        p.saturating_mul(f)
                    });
                    acc.saturating_add(prod)
                })
            };
            item_total[it] = item_total[it].saturating_add(count[id]);
        }
        item_total[self.forest.root]
    }

    /// Up to `limit` trees, root versions in word order.
    pub fn enumerate_trees(&self, limit: usize) -> Vec<LabeledTree> {
        assert!(limit >= 1, "limit must be positive");
        let mut memo: Vec<Vec<TreeNode>> = Vec::with_capacity(self.items.len());
        for id in 0..self.items.len() {
            let li = &self.items[id];
            if self.ands[id].is_empty() {
                let cat = self.forest.items[li.item].cat;
                memo.push(vec![TreeNode::leaf(li.head.clone(), cat)]);
                continue;
            }
            let mut out = Vec::new();
            for a in &self.ands[id] {
                let merged: Vec<Vec<TreeNode>> = a
                    .children
                    .iter()
                    .enumerate()
                    .map(|(k, &c)| {
                        if k == a.head {
                            memo[a.head_child].clone()
                        } else {
                            self.versions[c]
                                .iter()
                                .flat_map(|&v| memo[v].iter().cloned())
                                .take(limit)
                                .collect()
                        }
                    })
                    .collect();
                let lists: Vec<&[TreeNode]> = merged.iter().map(Vec::as_slice).collect();
                let cat = self.forest.items[li.item].cat;
                product(&lists, limit - out.len(), |kids| {
                    out.push(TreeNode {
                        cat,
                        head: li.head.clone(),
                        rule: Some(a.rule),
                        children: kids,
                    })
                });
                if out.len() >= limit {
                    break;
                }
            }
            memo.push(out);
        }
        self.roots()
            .iter()
            .flat_map(|&r| memo[r].iter().cloned())
            .take(limit)
            .map(LabeledTree::new)
            .collect()
    }
}
