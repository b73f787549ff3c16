//! Best-tree extraction from lexicalized forests.
//!
//! Ties go to the earliest candidate: and-nodes are ordered by rule
//! declaration and then by split points, head-word versions by word.

use thiserror::Error;

use crate::estimation::inside;
use crate::events::{tree_events, tree_weight, EventWeights, LabeledTree, TreeNode};
use crate::grammar::HeadedGrammar;
use crate::parser::{LexForest, LexItemId};
use crate::symbol::{Cat, Word};

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTree {
    pub tree: LabeledTree,
    /// Log of the objective the decoder maximized.
    pub score: f64,
    /// Log-probability of `tree` under the model.
    pub log_prob: f64,
}

impl ScoredTree {
    /// `(CAT^head child…)<TAB>score`
    pub fn to_line(&self, g: &HeadedGrammar) -> String {
        format!("{}\t{:.6}", self.tree.to_bracketed(g), self.score)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("every tree of the forest has probability zero")]
    ZeroProbability,
}

struct Best {
    score: Vec<f64>,
    /// Chosen and-node and, per daughter, the chosen version.
    choice: Vec<Option<(usize, Vec<LexItemId>)>>,
}

/// Max-product pass. Items for which `fixed` returns a score keep that
/// score; their structure is still chosen by the max-product choice.
fn best_pass(
    f: &LexForest,
    w: &impl EventWeights,
    fixed: &dyn Fn(LexItemId) -> Option<f64>,
) -> Best {
    let n = f.items().len();
    let mut score = vec![f64::NEG_INFINITY; n];
    let mut choice = vec![None; n];
    for id in 0..n {
        let li = f.item(id);
        if f.ands(id).is_empty() {
            score[id] = 0.0;
            continue;
        }
        let cat = f.forest().item(li.item).cat;
        let mut top = f64::NEG_INFINITY;
        let mut pick = None;
        for (ai, a) in f.ands(id).iter().enumerate() {
            let mut s = w.rule_logp(&li.head, a.rule);
            let mut kids = Vec::with_capacity(a.children.len());
            for (k, &c) in a.children.iter().enumerate() {
                if k == a.head {
                    s += score[a.head_child];
                    kids.push(a.head_child);
                    continue;
                }
                let child_cat = f.forest().item(c).cat;
                let (bv, bs) = best_version(f, w, &li.head, cat, child_cat, c, &score);
                s += bs;
                kids.push(bv);
            }
            if s > top || pick.is_none() {
                top = s;
                pick = Some((ai, kids));
            }
        }
        choice[id] = pick;
        score[id] = fixed(id).unwrap_or(top);
    }
    Best { score, choice }
}

fn best_version(
    f: &LexForest,
    w: &impl EventWeights,
    head: &Word,
    parent: Cat,
    child_cat: Cat,
    child: usize,
    score: &[f64],
) -> (LexItemId, f64) {
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for &v in f.versions(child) {
        let s = w.lexical_logp(head, parent, child_cat, &f.item(v).head) + score[v];
        if s > best.1 || best.0 == usize::MAX {
            best = (v, s);
        }
    }
    best
}

fn build(f: &LexForest, choice: &[Option<(usize, Vec<LexItemId>)>], id: LexItemId) -> TreeNode {
    let li = f.item(id);
    let cat = f.forest().item(li.item).cat;
    match &choice[id] {
        None => TreeNode::leaf(li.head.clone(), cat),
        Some((ai, kids)) => TreeNode {
            cat,
            head: li.head.clone(),
            rule: Some(f.ands(id)[*ai].rule),
            children: kids.iter().map(|&k| build(f, choice, k)).collect(),
        },
    }
}

fn root_pick(f: &LexForest, g: &HeadedGrammar, w: &impl EventWeights, score: &[f64]) -> Option<(LexItemId, f64)> {
    let top = Word::top();
    let mut best: Option<(LexItemId, f64)> = None;
    for &r in f.roots() {
        let s = w.lexical_logp(&top, Cat::START, g.start(), &f.item(r).head) + score[r];
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((r, s));
        }
    }
    best.filter(|(_, s)| *s > f64::NEG_INFINITY)
}

fn finish(
    f: &LexForest,
    g: &HeadedGrammar,
    w: &impl EventWeights,
    choice: &[Option<(usize, Vec<LexItemId>)>],
    root: LexItemId,
    score: f64,
) -> ScoredTree {
    let tree = LabeledTree::new(build(f, choice, root));
    let log_prob = tree_events(&tree, g)
        .ok()
        .and_then(|c| tree_weight(&c, w, g).ok())
        .map_or(f64::NEG_INFINITY, |tw| tw.log_prob);
    ScoredTree { tree, score, log_prob }
}

/// The most probable tree.
pub fn viterbi(f: &LexForest, g: &HeadedGrammar, w: &impl EventWeights) -> Result<ScoredTree, DecodeError> {
    let best = best_pass(f, w, &|_| None);
    let (root, score) = root_pick(f, g, w, &best.score).ok_or(DecodeError::ZeroProbability)?;
    Ok(finish(f, g, w, &best.choice, root, score))
}

/// Maximizes over analyses above the chunk level while summing over the
/// analyses inside each chunk. The returned chunk structure is the most
/// probable one inside the chosen chunk item.
pub fn sum_max(f: &LexForest, g: &HeadedGrammar, w: &impl EventWeights) -> Result<ScoredTree, DecodeError> {
    sum_max_with(f, g, w, &|c| g.is_chunk(c))
}

pub fn sum_max_with(
    f: &LexForest,
    g: &HeadedGrammar,
    w: &impl EventWeights,
    is_chunk: &dyn Fn(Cat) -> bool,
) -> Result<ScoredTree, DecodeError> {
    let chart = inside(f, g, w);
    let fixed = |id: LexItemId| {
        let cat = f.forest().item(f.item(id).item).cat;
        is_chunk(cat).then(|| chart.inside[id])
    };
    let mixed = best_pass(f, w, &fixed);
    let (root, score) = root_pick(f, g, w, &mixed.score).ok_or(DecodeError::ZeroProbability)?;
    // Inside chunks, follow the pure max-product choices.
    let plain = best_pass(f, w, &|_| None);
    let mut choice = mixed.choice;
    mark_chunks(f, &mut choice, &plain.choice, root, is_chunk);
    Ok(finish(f, g, w, &choice, root, score))
}

fn mark_chunks(
    f: &LexForest,
    choice: &mut [Option<(usize, Vec<LexItemId>)>],
    plain: &[Option<(usize, Vec<LexItemId>)>],
    id: LexItemId,
    is_chunk: &dyn Fn(Cat) -> bool,
) {
    let cat = f.forest().item(f.item(id).item).cat;
    if is_chunk(cat) {
        copy_subtree(choice, plain, id);
        return;
    }
    if let Some((_, kids)) = choice[id].clone() {
        for k in kids {
            mark_chunks(f, choice, plain, k, is_chunk);
        }
    }
}

fn copy_subtree(
    choice: &mut [Option<(usize, Vec<LexItemId>)>],
    plain: &[Option<(usize, Vec<LexItemId>)>],
    id: LexItemId,
) {
    choice[id] = plain[id].clone();
    if let Some((_, kids)) = &plain[id] {
        for &k in kids {
            copy_subtree(choice, plain, k);
        }
    }
}
