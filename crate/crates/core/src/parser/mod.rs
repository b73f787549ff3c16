//! Tag-constrained chart parsing into packed and-or forests.

mod chart;
mod corpus;
mod forest;
mod lexical;

pub use chart::{parse, parse_with};
pub use corpus::{read_corpus, read_corpus_file, Sentence, Token};
pub use forest::{AndNode, Item, ItemId, ParseForest};
pub use lexical::{lexicalize_forest, LexAnd, LexForest, LexItem, LexItemId};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseOptions {
    /// Words outside the grammar's lexicon take their tags from the token.
    /// When false such words are an error.
    pub open_lexicon: bool,
    /// Prune items that cannot reach the sentence edges before closing the
    /// chart. Never changes the set of trees.
    pub filter: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            open_lexicon: true,
            filter: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("token {position} (`{word}`) has an empty tag set")]
    EmptyTags { position: usize, word: String },
    #[error("word `{0}` is not in the lexicon")]
    UnknownWord(String),
    #[error("no parse")]
    NoParse,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
