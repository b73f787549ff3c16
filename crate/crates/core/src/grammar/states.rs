//! Finite-state cover rules over phrasal categories.
//!
//! For phrasal categories `P` and start `S` the generated rules are
//!
//! ```text
//! S      -> ST_X'                 for each X
//! ST_X   -> X' | X' ST_X_Y        for each X, Y
//! ST_X_Y -> Y' | Y' ST_Y_Z        for each X, Y, Z
//! ```
//!
//! so any sequence of phrasal constituents parses as a right-branching chain
//! whose states remember the previous and current category.

use std::collections::BTreeSet;

use super::{GrammarError, HeadedGrammar, NamedRule};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateRules {
    pub entry_states: Vec<String>,
    pub pair_states: Vec<String>,
    pub rules: Vec<NamedRule>,
}

fn entry_name(x: &str) -> String {
    format!("ST_{x}")
}

fn pair_name(x: &str, y: &str) -> String {
    format!("ST_{x}_{y}")
}

pub fn generate_state_rules(
    g: &HeadedGrammar,
    phrasal: &[&str],
) -> Result<StateRules, GrammarError> {
    if phrasal.is_empty() {
        return Err(GrammarError::EmptyPhrasal);
    }
    let mut seen = BTreeSet::new();
    let phrasal: Vec<&str> = phrasal.iter().copied().filter(|p| seen.insert(*p)).collect();
    for p in &phrasal {
        match g.lookup(p) {
            Some(c) if g.is_nonterminal(c) => {}
            _ => {
                return Err(GrammarError::Undeclared {
                    line: None,
                    name: p.to_string(),
                })
            }
        }
    }

    let entry_states: Vec<String> = phrasal.iter().map(|x| entry_name(x)).collect();
    let pair_states: Vec<String> = phrasal
        .iter()
        .flat_map(|x| phrasal.iter().map(move |y| pair_name(x, y)))
        .collect();
    let mut fresh = BTreeSet::new();
    for name in entry_states.iter().chain(&pair_states) {
        if g.lookup(name).is_some() || !fresh.insert(name.as_str()) {
            return Err(GrammarError::NameCollision(name.clone()));
        }
    }

    let start = g.name(g.start());
    let mut rules = Vec::new();
    for x in &phrasal {
        let ex = entry_name(x);
        rules.push(NamedRule::new(start, &[], &ex, &[]));
        rules.push(NamedRule::new(&ex, &[], x, &[]));
        for y in &phrasal {
            rules.push(NamedRule::new(&ex, &[], x, &[&pair_name(x, y)]));
        }
    }
    for x in &phrasal {
        for y in &phrasal {
            let xy = pair_name(x, y);
            rules.push(NamedRule::new(&xy, &[], y, &[]));
            for z in &phrasal {
                rules.push(NamedRule::new(&xy, &[], y, &[&pair_name(y, z)]));
            }
        }
    }
    Ok(StateRules {
        entry_states,
        pair_states,
        rules,
    })
}
