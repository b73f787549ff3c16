//! Line-oriented model files.
//!
//! ```text
//! lexpcfg-model v1
//! SMOOTH <4 bounds> <5 lambdas> <d> <discount|interpolate> <estimate:F|fixed>
//! UR <n> <α…> ' <h> <β…> <logp>          backbone rule
//! R <w> <n> <α…> ' <h> <β…> <logp>       lexicalized rule
//! H <x> <v> <logp>                        head unigram
//! UL <n> <x> <v> <logp>                   unlexicalized lexical choice
//! ULB <n> <x> <log γ>                     its back-off weight
//! L <w> <n> <x> <v> <logp>                lexicalized lexical choice
//! LB <w> <n> <x> <log γ>                  its back-off weight
//! F <w> <cat> <count>                     pair frequency
//! END <number of records>
//! ```
//! Floats are written with 17 significant digits, so a save/load round
//! trip reproduces every table bit for bit.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use super::model::Backed;
use super::{DiscountSetting, EstimationError, LexPcfg, LexicalBackoff, SmoothingConfig};
use crate::grammar::HeadedGrammar;
use crate::symbol::{Cat, RuleId, Word};

const HEADER: &str = "lexpcfg-model v1";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn rule_tokens(g: &HeadedGrammar, id: RuleId) -> String {
    let r = g.rule(id);
    let mut s = g.name(r.lhs).to_string();
    for &c in &r.left {
        s.push(' ');
        s.push_str(g.name(c));
    }
    s.push_str(" ' ");
    s.push_str(g.name(r.head));
    for &c in &r.right {
        s.push(' ');
        s.push_str(g.name(c));
    }
    s
}

fn sorted<K: Ord + Clone, V>(m: &HashMap<K, V>) -> Vec<(&K, &V)> {
    let mut v: Vec<(&K, &V)> = m.iter().collect();
    v.sort_by(|a, b| a.0.cmp(b.0));
    v
}

pub fn write_model(p: &LexPcfg) -> String {
    let g = p.grammar();
    let mut out = String::new();
    let mut records = 0usize;
    let mut line = |out: &mut String, text: String| {
        out.push_str(&text);
        out.push('\n');
        records += 1;
    };
    out.push_str(HEADER);
    out.push('\n');

    let s = &p.smoothing;
    let mut smooth = String::from("SMOOTH");
    for b in s.bucket_bounds {
        write!(smooth, " {}", num(b)).unwrap();
    }
    for l in s.lambda {
        write!(smooth, " {}", num(l)).unwrap();
    }
    write!(smooth, " {}", num(p.discount)).unwrap();
    smooth.push_str(match s.lexical_backoff {
        LexicalBackoff::Discount => " discount",
        LexicalBackoff::Interpolate => " interpolate",
    });
    match s.discount {
        DiscountSetting::Estimate { fallback } => write!(smooth, " estimate:{}", num(fallback)).unwrap(),
        DiscountSetting::Fixed(_) => smooth.push_str(" fixed"),
    }
    line(&mut out, smooth);

    for id in g.rule_ids() {
        line(&mut out, format!("UR {} {}", rule_tokens(g, id), num(p.rule_backbone[id.index()])));
    }
    let mut rule_keys: Vec<&(Word, Cat)> = p.rule_table.keys().collect();
    rule_keys.sort();
    for key in rule_keys {
        let dist = &p.rule_table[key];
        for (&id, lp) in g.rules_with_lhs(key.1).iter().zip(dist) {
            line(&mut out, format!("R {} {} {}", key.0, rule_tokens(g, id), num(*lp)));
        }
    }
    for (x, dist) in sorted(&p.head_unigram) {
        for (v, lp) in sorted(dist) {
            line(&mut out, format!("H {} {} {}", g.name(*x), v, num(*lp)));
        }
    }
    for ((n, x), b) in sorted(&p.lex_backbone) {
        line(&mut out, format!("ULB {} {} {}", g.name(*n), g.name(*x), num(b.log_gamma)));
        for (v, lp) in sorted(&b.explicit) {
            line(&mut out, format!("UL {} {} {} {}", g.name(*n), g.name(*x), v, num(*lp)));
        }
    }
    for ((w, n, x), b) in sorted(&p.lex_table) {
        line(&mut out, format!("LB {} {} {} {}", w, g.name(*n), g.name(*x), num(b.log_gamma)));
        for (v, lp) in sorted(&b.explicit) {
            line(&mut out, format!("L {} {} {} {} {}", w, g.name(*n), g.name(*x), v, num(*lp)));
        }
    }
    for ((w, c), f) in &p.pair_freq {
        line(&mut out, format!("F {} {} {}", w, g.name(*c), num(*f)));
    }
    writeln!(out, "END {records}").unwrap();
    out
}

/// Writes to a sibling temporary file first so a failed save never leaves a
/// partial model at `path`.
pub fn save_model(p: &LexPcfg, path: &Path) -> Result<(), EstimationError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, write_model(p))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_model(path: &Path, grammar: Arc<HeadedGrammar>) -> Result<LexPcfg, EstimationError> {
    read_model(&std::fs::read_to_string(path)?, grammar)
}

struct Reader<'a> {
    g: &'a HeadedGrammar,
    line: usize,
}

impl Reader<'_> {
    fn err(&self, message: impl Into<String>) -> EstimationError {
        EstimationError::Format {
            line: self.line,
            message: message.into(),
        }
    }

    fn float(&self, s: &str) -> Result<f64, EstimationError> {
        s.parse().map_err(|_| self.err(format!("bad number `{s}`")))
    }

    fn cat(&self, s: &str) -> Result<Cat, EstimationError> {
        self.g
            .lookup(s)
            .ok_or_else(|| EstimationError::GrammarMismatch(format!("line {}: unknown category `{s}`", self.line)))
    }

    fn rule(&self, toks: &[&str]) -> Result<RuleId, EstimationError> {
        let mark = toks
            .iter()
            .position(|&t| t == "'")
            .ok_or_else(|| self.err("rule lacks the head marker"))?;
        if mark == 0 || mark + 1 >= toks.len() {
            return Err(self.err("malformed rule"));
        }
        let lhs = self.cat(toks[0])?;
        let left = toks[1..mark].iter().map(|t| self.cat(t)).collect::<Result<Vec<_>, _>>()?;
        let head = self.cat(toks[mark + 1])?;
        let right = toks[mark + 2..].iter().map(|t| self.cat(t)).collect::<Result<Vec<_>, _>>()?;
        self.g.find_rule(lhs, &left, head, &right).ok_or_else(|| {
            EstimationError::GrammarMismatch(format!("line {}: rule `{}` not in grammar", self.line, toks.join(" ")))
        })
    }
}

fn word(s: &str) -> Word {
    Word::new(s)
}

pub fn read_model(text: &str, grammar: Arc<HeadedGrammar>) -> Result<LexPcfg, EstimationError> {
    let g = &*grammar;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == HEADER => {}
        Some(h) => return Err(EstimationError::Version(h.trim().to_string())),
        None => return Err(EstimationError::Format { line: 1, message: "empty file".into() }),
    }
    let mut rd = Reader { g, line: 1 };
    let mut smoothing: Option<(SmoothingConfig, f64)> = None;
    let mut backbone: Vec<Option<f64>> = vec![None; g.rules().len()];
    let mut rule_rows: BTreeMap<(Word, Cat), Vec<Option<f64>>> = BTreeMap::new();
    let mut head_unigram: HashMap<Cat, HashMap<Word, f64>> = HashMap::new();
    let mut lex_backbone: HashMap<(Cat, Cat), Backed> = HashMap::new();
    let mut lex_table: HashMap<(Word, Cat, Cat), Backed> = HashMap::new();
    let mut pair_freq = BTreeMap::new();
    let mut records = 0usize;
    let mut ended = false;

    for raw in lines {
        rd.line += 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if ended {
            return Err(rd.err("content after END"));
        }
        let last = || rd.float(toks[toks.len() - 1]);
        match toks[0] {
            "END" => {
                let n: usize = toks
                    .get(1)
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| rd.err("END needs a record count"))?;
                if n != records {
                    return Err(rd.err(format!("expected {n} records, found {records}")));
                }
                ended = true;
                continue;
            }
            "SMOOTH" if toks.len() == 13 => {
                let f: Vec<f64> = toks[1..11].iter().map(|t| rd.float(t)).collect::<Result<_, _>>()?;
                let lexical_backoff = match toks[11] {
                    "discount" => LexicalBackoff::Discount,
                    "interpolate" => LexicalBackoff::Interpolate,
                    other => return Err(rd.err(format!("unknown back-off mode `{other}`"))),
                };
                let discount = match toks[12] {
                    "fixed" => DiscountSetting::Fixed(f[9]),
                    t => match t.strip_prefix("estimate:") {
                        Some(v) => DiscountSetting::Estimate { fallback: rd.float(v)? },
                        None => return Err(rd.err(format!("unknown discount setting `{t}`"))),
                    },
                };
                let cfg = SmoothingConfig {
                    bucket_bounds: [f[0], f[1], f[2], f[3]],
                    lambda: [f[4], f[5], f[6], f[7], f[8]],
                    discount,
                    lexical_backoff,
                };
                smoothing = Some((cfg, f[9]));
            }
            "UR" if toks.len() >= 4 => {
                let id = rd.rule(&toks[1..toks.len() - 1])?;
                backbone[id.index()] = Some(last()?);
            }
            "R" if toks.len() >= 5 => {
                let id = rd.rule(&toks[2..toks.len() - 1])?;
                let lhs = g.rule(id).lhs;
                let slots = g.rules_with_lhs(lhs).len();
                rule_rows.entry((word(toks[1]), lhs)).or_insert_with(|| vec![None; slots])
                    [g.slot_in_lhs(id)] = Some(last()?);
            }
            "H" if toks.len() == 4 => {
                head_unigram.entry(rd.cat(toks[1])?).or_default().insert(word(toks[2]), last()?);
            }
            "ULB" if toks.len() == 4 => {
                let key = (rd.cat(toks[1])?, rd.cat(toks[2])?);
                backed(&mut lex_backbone, key).log_gamma = last()?;
            }
            "UL" if toks.len() == 5 => {
                let key = (rd.cat(toks[1])?, rd.cat(toks[2])?);
                backed(&mut lex_backbone, key).explicit.insert(word(toks[3]), last()?);
            }
            "LB" if toks.len() == 5 => {
                let key = (word(toks[1]), rd.cat(toks[2])?, rd.cat(toks[3])?);
                backed(&mut lex_table, key).log_gamma = last()?;
            }
            "L" if toks.len() == 6 => {
                let key = (word(toks[1]), rd.cat(toks[2])?, rd.cat(toks[3])?);
                backed(&mut lex_table, key).explicit.insert(word(toks[4]), last()?);
            }
            "F" if toks.len() == 4 => {
                pair_freq.insert((word(toks[1]), rd.cat(toks[2])?), last()?);
            }
            other => return Err(rd.err(format!("malformed `{other}` record"))),
        }
        records += 1;
    }
    if !ended {
        return Err(EstimationError::Format {
            line: rd.line,
            message: "truncated model: missing END".into(),
        });
    }
    let (smoothing, discount) = smoothing.ok_or_else(|| rd.err("missing SMOOTH record"))?;
    let rule_backbone = backbone
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                EstimationError::GrammarMismatch(format!("no backbone entry for `{}`", g.rule_text(RuleId(i as u32))))
            })
        })
        .collect::<Result<Vec<f64>, _>>()?;
    let mut rule_table = HashMap::with_capacity(rule_rows.len());
    for ((w, n), row) in rule_rows {
        let row: Option<Vec<f64>> = row.into_iter().collect();
        let row = row.ok_or_else(|| {
            EstimationError::GrammarMismatch(format!("incomplete rule distribution for ({w}, {})", g.name(n)))
        })?;
        rule_table.insert((w, n), row);
    }
    Ok(LexPcfg {
        grammar,
        smoothing,
        discount,
        rule_backbone,
        rule_table,
        head_unigram,
        lex_backbone,
        lex_table,
        pair_freq,
    })
}

fn backed<K: std::hash::Hash + Eq>(m: &mut HashMap<K, Backed>, key: K) -> &mut Backed {
    m.entry(key).or_insert_with(|| Backed {
        explicit: HashMap::new(),
        log_gamma: f64::NEG_INFINITY,
    })
}
