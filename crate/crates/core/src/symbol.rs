//! Interned identifiers shared by every module.

use std::borrow::Borrow;
use std::fmt;
use std::sync::{Arc, OnceLock};

/// A category index into a [`HeadedGrammar`](crate::grammar::HeadedGrammar).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cat(pub(crate) u32);

impl Cat {
    /// Virtual parent category of the sentence-head choice.
    pub const START: Cat = Cat(u32::MAX);

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_start(self) -> bool {
        self == Cat::START
    }
}

/// Index of a rule in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(pub(crate) u32);

impl RuleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A word form. Cheap to clone; ordered by its text.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Arc<str>);

pub const TOP_WORD: &str = "<TOP>";
pub const UNKNOWN_WORD: &str = "<UNK>";

impl Word {
    pub fn new(text: &str) -> Self {
        Word(Arc::from(text))
    }

    /// The virtual parent head of the sentence root.
    pub fn top() -> Self {
        static TOP: OnceLock<Word> = OnceLock::new();
        TOP.get_or_init(|| Word::new(TOP_WORD)).clone()
    }

    /// Stand-in for words outside a model's vocabulary.
    pub fn unknown() -> Self {
        static UNK: OnceLock<Word> = OnceLock::new();
        UNK.get_or_init(|| Word::new(UNKNOWN_WORD)).clone()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_reserved(text: &str) -> bool {
        text == TOP_WORD || text == UNKNOWN_WORD
    }
}

impl Borrow<str> for Word {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for Word {
    fn from(s: &str) -> Self {
        Word::new(s)
    }
}

impl fmt::Debug for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}
