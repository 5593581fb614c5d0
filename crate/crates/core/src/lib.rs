//! Syntax-directed generation of structured objects.
//!
//! A context-free grammar is decorated with an attribute grammar whose
//! semantic checks are turned into masks during decoding, so every complete
//! derivation produced by the decoder is both syntactically and
//! semantically valid. Two frontends are provided: a small arithmetic
//! program language and SMILES molecules.

pub mod attr;
pub mod cli;
pub mod decoder;
pub mod grammar;
pub mod grammars;
pub mod program;
pub mod rng;
pub mod scorer;
pub mod smiles;
pub mod toy;

pub use grammar::{
    DerivationTree, Grammar, GrammarError, NodeId, Production, Symbol, SymbolId, SymbolKind,
};
pub use grammars::GrammarId;
