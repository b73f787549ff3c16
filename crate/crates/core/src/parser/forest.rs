use crate::events::{LabeledTree, TreeNode};
use crate::symbol::{Cat, RuleId, Word};

pub type ItemId = usize;

/// A chart constituent: category `cat` over tokens `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Item {
    pub start: usize,
    pub end: usize,
    pub cat: Cat,
}

/// One way of building an item: a rule applied to child items in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AndNode {
    pub rule: RuleId,
    pub head: usize,
    pub children: Vec<ItemId>,
}

/// A packed forest. Items are stored children first, so a forward pass over
/// item ids is bottom-up. Items without and-nodes are tagged tokens.
#[derive(Debug, Clone)]
pub struct ParseForest {
    pub(super) words: Vec<Word>,
    pub(super) items: Vec<Item>,
    pub(super) ands: Vec<Vec<AndNode>>,
    pub(super) root: ItemId,
}

impl ParseForest {
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> Item {
        self.items[id]
    }

    pub fn ands(&self, id: ItemId) -> &[AndNode] {
        &self.ands[id]
    }

    pub fn is_leaf(&self, id: ItemId) -> bool {
        self.ands[id].is_empty()
    }

    pub fn root(&self) -> ItemId {
        self.root
    }

    pub fn num_and_nodes(&self) -> usize {
        self.ands.iter().map(Vec::len).sum()
    }

    /// Number of trees, saturating at `u128::MAX`.
    pub fn count_trees(&self) -> u128 {
        let mut count = vec![0u128; self.items.len()];
        for id in 0..self.items.len() {
            count[id] = if self.is_leaf(id) {
                1
            } else {
                self.ands[id].iter().fold(0u128, |acc, a| {
                    let prod = a
                        .children
                        .iter()
                        .fold(1u128, |p, &c| p.saturating_mul(count[c]));
                    acc.saturating_add(prod)
                })
            };
        }
        count[self.root]
    }

    /// Up to `limit` distinct trees in a fixed order: and-nodes in stored
    /// order, then children varying rightmost-fastest.
    pub fn enumerate_trees(&self, limit: usize) -> Vec<LabeledTree> {
        assert!(limit >= 1, "limit must be positive");
        let mut memo: Vec<Option<Vec<TreeNode>>> = vec![None; self.items.len()];
        for id in 0..=self.root {
            let trees = if self.is_leaf(id) {
                let it = self.items[id];
                vec![TreeNode::leaf(self.words[it.start].clone(), it.cat)]
            } else {
                let mut out = Vec::new();
                for a in &self.ands[id] {
                    if a.children.iter().any(|&c| memo[c].is_none()) {
                        continue;
                    }
                    let lists: Vec<&[TreeNode]> =
                        a.children.iter().map(|&c| memo[c].as_deref().unwrap()).collect();
                    product(&lists, limit - out.len(), |kids| {
                        out.push(TreeNode {
                            cat: self.items[id].cat,
                            head: kids[a.head].head.clone(),
                            rule: Some(a.rule),
                            children: kids,
                        })
                    });
                    if out.len() >= limit {
                        break;
                    }
                }
                out
            };
            memo[id] = Some(trees);
        }
        memo[self.root]
            .take()
            .unwrap_or_default()
            .into_iter()
            .map(LabeledTree::new)
            .collect()
    }
}

/// Calls `emit` on up to `limit` elements of the cartesian product of
/// `lists`, in lexicographic order.
pub(super) fn product(lists: &[&[TreeNode]], limit: usize, mut emit: impl FnMut(Vec<TreeNode>)) {
    if limit == 0 || lists.iter().any(|l| l.is_empty()) {
        return;
    }
    let mut idx = vec![0usize; lists.len()];
    let mut emitted = 0;
    loop {
        emit(idx.iter().zip(lists).map(|(&i, l)| l[i].clone()).collect());
        emitted += 1;
        if emitted >= limit {
            return;
        }
        let mut k = lists.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}
