use std::fmt;
use std::path::Path;

use super::CorpusError;
use crate::symbol::Word;

/// A word with the tags a tagger allows for it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub word: Word,
    pub tags: Vec<String>,
}

impl Token {
    pub fn new(word: &str, tags: &[&str]) -> Self {
        Token {
            word: Word::new(word),
            tags: tags.iter().map(|t| t.to_string()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Sentence {
    pub tokens: Vec<Token>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>) -> Self {
        Sentence { tokens }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &Word> {
        self.tokens.iter().map(|t| &t.word)
    }

    /// Parses one corpus line: `word/TAG` or `word/T1|T2` tokens separated
    /// by whitespace. The last `/` separates the word from its tags.
    pub fn parse_line(line: &str) -> Result<Sentence, String> {
        let mut tokens = Vec::new();
        for raw in line.split_whitespace() {
            let (word, tags) = raw
                .rsplit_once('/')
                .ok_or_else(|| format!("token `{raw}` lacks a `/TAG` suffix"))?;
            if word.is_empty() {
                return Err(format!("token `{raw}` has an empty word"));
            }
            if Word::is_reserved(word) {
                return Err(format!("`{word}` is a reserved word"));
            }
            let tags: Vec<String> = tags
                .split('|')
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect();
            if tags.is_empty() {
                return Err(format!("token `{raw}` has no tags"));
            }
            tokens.push(Token {
                word: Word::new(word),
                tags,
            });
        }
        Ok(Sentence { tokens })
    }
}

impl fmt::Display for Sentence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}/{}", t.word, t.tags.join("|"))?;
        }
        Ok(())
    }
}

pub fn read_corpus(text: &str) -> Result<Vec<Sentence>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let s = Sentence::parse_line(trimmed).map_err(|message| CorpusError::Syntax {
            line: i + 1,
            message,
        })?;
        out.push(s);
    }
    Ok(out)
}

pub fn read_corpus_file(path: &Path) -> Result<Vec<Sentence>, CorpusError> {
    read_corpus(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_with_ambiguous_tags() {
        let c = read_corpus("# header\n\nthe/AT dog/NN1|VV0\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].tokens[1].tags, vec!["NN1", "VV0"]);
        assert_eq!(c[0].to_string(), "the/AT dog/NN1|VV0");
    }

    #[test]
    fn slash_inside_word_uses_last_separator() {
        let s = Sentence::parse_line("and/or/CC").unwrap();
        assert_eq!(s.tokens[0].word.as_str(), "and/or");
    }

    #[test]
    fn malformed_tokens_report_their_line() {
        match read_corpus("a/X\nb\n") {
            Err(CorpusError::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Sentence::parse_line("a/").is_err());
        assert!(Sentence::parse_line("<TOP>/X").is_err());
    }
}
