//! Head-lexicalized probabilistic context-free grammars: grammar compilation,
//! chart parsing, smoothed inside-outside estimation, decoding, and
//! subcategorization-frame extraction and comparison.

pub mod decoding;
pub mod estimation;
pub mod evaluation;
pub mod events;
pub mod grammar;
pub mod lexicon;
pub mod parser;
pub mod symbol;
pub mod synthkit;

pub use symbol::{Cat, RuleId, Word};
