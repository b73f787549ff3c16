//! Line-oriented grammar text format.
//!
//! ```text
//! # comment
//! start S;
//! @chunk NC;
//! VFP -> VFC' NP PP;
//! NP -> NC' | NC' PP;
//! asked : VVD;
//! ```
//! Exactly one daughter per alternative carries the `'` head mark.

use std::fmt::Write;

use super::{GrammarBuilder, GrammarError, HeadedGrammar, NamedRule};

pub fn parse_grammar(text: &str) -> Result<HeadedGrammar, GrammarError> {
    parse_grammar_builder(text)?.build()
}

pub fn parse_grammar_builder(text: &str) -> Result<GrammarBuilder, GrammarError> {
    let mut b = GrammarBuilder::new();
    let mut start_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        for stmt in content.split(';') {
            let tokens: Vec<&str> = stmt.split_whitespace().collect();
            if tokens.is_empty() {
                continue;
            }
            let syntax = |message: &str| GrammarError::Syntax {
                line,
                message: message.to_string(),
            };
            match tokens.as_slice() {
                ["start", name] => {
                    if start_seen {
                        return Err(syntax("duplicate start declaration"));
                    }
                    start_seen = true;
                    b.start(name);
                }
                ["start", ..] => return Err(syntax("expected `start <CAT>`")),
                ["@chunk", names @ ..] => {
                    if names.is_empty() {
                        return Err(syntax("expected `@chunk <CAT>`"));
                    }
                    for n in names {
                        b.chunk_at(n, line);
                    }
                }
                [lhs, "->", rhs @ ..] => {
                    for alt in rhs.split(|t| *t == "|") {
                        b.rule_at(parse_alternative(lhs, alt, line)?, line);
                    }
                }
                [word, ":", tags @ ..] => {
                    if tags.is_empty() {
                        return Err(syntax("lexicon entry without tags"));
                    }
                    b.word_at(word, tags.iter().map(|t| t.to_string()).collect(), line);
                }
                _ => return Err(syntax(&format!("unrecognized statement `{}`", stmt.trim()))),
            }
        }
    }
    if !start_seen {
        return Err(GrammarError::MissingStart);
    }
    Ok(b)
}

fn parse_alternative(lhs: &str, alt: &[&str], line: usize) -> Result<NamedRule, GrammarError> {
    if alt.is_empty() {
        return Err(GrammarError::Syntax {
            line,
            message: format!("empty right-hand side for `{lhs}`"),
        });
    }
    let marks: Vec<usize> = alt
        .iter()
        .enumerate()
        .filter(|(_, t)| t.ends_with('\''))
        .map(|(i, _)| i)
        .collect();
    match marks.len() {
        0 => Err(GrammarError::MissingHead {
            line: Some(line),
            lhs: lhs.to_string(),
        }),
        1 => {
            let h = marks[0];
            let head = alt[h].trim_end_matches('\'');
            if head.is_empty() || alt[h].len() - head.len() != 1 {
                return Err(GrammarError::Syntax {
                    line,
                    message: format!("malformed head marker `{}`", alt[h]),
                });
            }
            let own = |ts: &[&str]| ts.iter().map(|t| t.to_string()).collect();
            Ok(NamedRule {
                lhs: lhs.to_string(),
                left: own(&alt[..h]),
                head: head.to_string(),
                right: own(&alt[h + 1..]),
            })
        }
        count => Err(GrammarError::MultipleHeads {
            line: Some(line),
            lhs: lhs.to_string(),
            count,
        }),
    }
}

pub(super) fn write_grammar(g: &HeadedGrammar) -> String {
    let mut out = String::new();
    writeln!(out, "start {};", g.name(g.start())).unwrap();
    for c in g.categories() {
        if c.chunk {
            writeln!(out, "@chunk {};", c.name).unwrap();
        }
    }
    for id in g.rule_ids() {
        writeln!(out, "{};", g.named_rule(id)).unwrap();
    }
    for (w, tags) in g.lexicon() {
        write!(out, "{w} :").unwrap();
        for &t in tags {
            write!(out, " {}", g.name(t)).unwrap();
        }
        out.push_str(";\n");
    }
    out
}
