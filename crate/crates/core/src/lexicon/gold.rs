use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::{Frame, LexiconError};
use crate::symbol::Word;

/// Reference frame sets per word.
///
/// Text form: one `word : frame, frame …` line per word, frames separated
/// by commas since a frame name may contain spaces. Blank lines and `#`
/// comments are skipped. A word may be listed with no frames.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoldLexicon {
    entries: BTreeMap<Word, BTreeSet<Frame>>,
}

fn entry_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn split_entry(line: usize, l: &str) -> Result<(&str, &str), LexiconError> {
    let (w, rest) = l.split_once(':').ok_or_else(|| LexiconError::Syntax {
        line,
        message: format!("expected `word : frames`, got `{l}`"),
    })?;
    let w = w.trim();
    if w.is_empty() || w.contains(char::is_whitespace) {
        return Err(LexiconError::Syntax { line, message: format!("bad word `{w}`") });
    }
    Ok((w, rest))
}

impl GoldLexicon {
    /// Adds frames to `w`, creating the entry if needed.
    pub fn insert(&mut self, w: Word, frames: impl IntoIterator<Item = Frame>) {
        self.entries.entry(w).or_default().extend(frames);
    }

    pub fn frames(&self, w: &Word) -> Option<&BTreeSet<Frame>> {
        self.entries.get(w)
    }

    pub fn contains(&self, w: &Word) -> bool {
        self.entries.contains_key(w)
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &BTreeSet<Frame>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every frame listed for some word.
    pub fn inventory(&self) -> BTreeSet<Frame> {
        self.entries.values().flatten().cloned().collect()
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut g = GoldLexicon::default();
        for (line, l) in entry_lines(text) {
            let (w, rest) = split_entry(line, l)?;
            let frames = rest
                .split(',')
                .map(str::trim)
                .filter(|f| !f.is_empty())
                .map(|f| f.parse::<Frame>().unwrap());
            g.insert(Word::new(w), frames);
        }
        Ok(g)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (w, fs) in &self.entries {
            let names: Vec<String> = fs.iter().map(Frame::to_string).collect();
            out.push_str(&format!("{w} : {}\n", names.join(", ")));
        }
        out
    }
}

/// Translation from dictionary codes to frames. `None` marks codes that
/// are dropped on purpose.
///
/// Text form: `code -> frame` or `code -> DROP`, one per line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMapping {
    map: BTreeMap<String, Option<Frame>>,
}

impl FrameMapping {
    pub fn insert(&mut self, code: &str, frame: Option<Frame>) {
        self.map.insert(code.to_string(), frame);
    }

    pub fn get(&self, code: &str) -> Option<&Option<Frame>> {
        self.map.get(code)
    }

    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut m = FrameMapping::default();
        for (line, l) in entry_lines(text) {
            let (code, target) = l.split_once("->").ok_or_else(|| LexiconError::Syntax {
                line,
                message: format!("expected `code -> frame`, got `{l}`"),
            })?;
            let (code, target) = (code.trim(), target.trim());
            if code.is_empty() || target.is_empty() {
                return Err(LexiconError::Syntax { line, message: "empty code or frame".into() });
            }
            let frame = (target != "DROP").then(|| target.parse::<Frame>().unwrap());
            m.insert(code, frame);
        }
        Ok(m)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Translates a dictionary in `word : code code …` form (codes split on
    /// commas or whitespace). Returns the gold lexicon and the sorted codes
    /// that had no mapping entry; those are dropped.
    pub fn map_dictionary(&self, text: &str) -> Result<(GoldLexicon, Vec<String>), LexiconError> {
        let mut gold = GoldLexicon::default();
        let mut unmapped = BTreeSet::new();
        for (line, l) in entry_lines(text) {
            let (w, rest) = split_entry(line, l)?;
            let mut frames = Vec::new();
            for code in rest.split(|c: char| c == ',' || c.is_whitespace()).filter(|c| !c.is_empty()) {
                match self.map.get(code) {
                    Some(Some(f)) => frames.push(f.clone()),
                    Some(None) => {}
                    None => {
                        unmapped.insert(code.to_string());
                    }
                }
            }
            gold.insert(Word::new(w), frames);
        }
        Ok((gold, unmapped.into_iter().collect()))
    }
}
