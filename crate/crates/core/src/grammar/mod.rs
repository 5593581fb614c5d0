//! Context-free grammars, derivation trees and the production-sequence
//! encoding.
//!
//! Grammars are loaded from a small text format:
//!
//! ```text
//! # comment
//! <stat list> -> <stat> ';' <stat list> | <stat>
//!     | <other alternative on a continuation line>
//! ```
//!
//! Nonterminals are written in angle brackets (names may contain spaces),
//! terminals in single quotes (`\\` and `\'` escape a backslash and a quote).
//! The first rule's left-hand side is the start symbol. Productions are
//! numbered from zero in file order, left to right across alternatives.

mod encode;
mod tree;

pub use encode::{one_hot_encode, rule_sequence_to_tree, tree_to_rule_sequence, EncodeError};
pub use tree::{DerivationTree, NodeId, TreeNode};

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymbolKind {
    Nonterminal,
    Terminal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    /// Nonterminal name without brackets, or the verbatim terminal text.
    pub name: String,
    pub kind: SymbolKind,
}

impl Symbol {
    pub fn is_terminal(&self) -> bool {
        self.kind == SymbolKind::Terminal
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SymbolKind::Nonterminal => write!(f, "<{}>", self.name),
            SymbolKind::Terminal => write!(
                f,
                "'{}'",
                self.name.replace('\\', "\\\\").replace('\'', "\\'")
            ),
        }
    }
}

/// Index into [`Grammar::symbols`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolId(pub u32);

impl SymbolId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Production {
    pub index: usize,
    pub lhs: SymbolId,
    pub rhs: Vec<SymbolId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}: nonterminal <{name}> is referenced but never defined")]
    Undefined { name: String, line: usize },
    #[error("line {line}: nonterminal <{name}> is defined twice")]
    Duplicate { name: String, line: usize },
    #[error("empty alternative at {line}:{column}")]
    EmptyAlternative { line: usize, column: usize },
    #[error("grammar has no rules")]
    Empty,
    #[error("unknown production `{0}`")]
    UnknownProduction(String),
}

/// An immutable context-free grammar with stable production indices.
#[derive(Debug, Clone)]
pub struct Grammar {
    symbols: Vec<Symbol>,
    productions: Vec<Production>,
    start: SymbolId,
    by_lhs: Vec<Vec<usize>>,
    lookup: HashMap<(String, SymbolKind), SymbolId>,
    min_steps: Vec<usize>,
    hash: String,
}

impl Grammar {
    /// Parses a grammar file.
    pub fn load(text: &str) -> Result<Grammar, GrammarError> {
        let rules = parse_rules(text)?;
        if rules.is_empty() {
            return Err(GrammarError::Empty);
        }

        let mut symbols = Vec::new();
        let mut lookup: HashMap<(String, SymbolKind), SymbolId> = HashMap::new();
        let mut intern = |name: &str, kind: SymbolKind, symbols: &mut Vec<Symbol>| {
            *lookup.entry((name.to_string(), kind)).or_insert_with(|| {
                symbols.push(Symbol {
                    name: name.to_string(),
                    kind,
                });
                SymbolId(symbols.len() as u32 - 1)
            })
        };

        // Nonterminals first, in definition order, so ids are stable.
        let mut defined: HashMap<String, usize> = HashMap::new();
        for rule in &rules {
            if defined.insert(rule.lhs.clone(), rule.line).is_some() {
                return Err(GrammarError::Duplicate {
                    name: rule.lhs.clone(),
                    line: rule.line,
                });
            }
            intern(&rule.lhs, SymbolKind::Nonterminal, &mut symbols);
        }

        let mut productions = Vec::new();
        for rule in &rules {
            let lhs = intern(&rule.lhs, SymbolKind::Nonterminal, &mut symbols);
            for alt in &rule.alternatives {
                let mut rhs = Vec::with_capacity(alt.len());
                for item in alt {
                    let id = match item {
                        Item::Nonterminal(name) => {
                            if !defined.contains_key(name) {
                                return Err(GrammarError::Undefined {
                                    name: name.clone(),
                                    line: rule.line,
                                });
                            }
                            intern(name, SymbolKind::Nonterminal, &mut symbols)
                        }
                        Item::Terminal(text) => intern(text, SymbolKind::Terminal, &mut symbols),
                    };
                    rhs.push(id);
                }
                productions.push(Production {
                    index: productions.len(),
                    lhs,
                    rhs,
                });
            }
        }

        let mut by_lhs = vec![Vec::new(); symbols.len()];
        for p in &productions {
            by_lhs[p.lhs.index()].push(p.index);
        }

        let mut grammar = Grammar {
            symbols,
            productions,
            start: SymbolId(0),
            by_lhs,
            lookup,
            min_steps: Vec::new(),
            hash: hex::encode(Sha256::digest(text.as_bytes())),
        };
        grammar.min_steps = grammar.compute_min_steps();
        Ok(grammar)
    }

    // Fewest rule applications needed to fully expand each symbol.
    fn compute_min_steps(&self) -> Vec<usize> {
        let mut best = vec![usize::MAX; self.symbols.len()];
        for (i, s) in self.symbols.iter().enumerate() {
            if s.is_terminal() {
                best[i] = 0;
            }
        }
        loop {
            let mut changed = false;
            for p in &self.productions {
                let mut total: usize = 1;
                for s in &p.rhs {
                    total = total.saturating_add(best[s.index()]);
                }
                if total < best[p.lhs.index()] {
                    best[p.lhs.index()] = total;
                    changed = true;
                }
            }
            if !changed {
                return best;
            }
        }
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn symbol(&self, id: SymbolId) -> &Symbol {
        &self.symbols[id.index()]
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    pub fn production(&self, index: usize) -> &Production {
        &self.productions[index]
    }

    pub fn start(&self) -> SymbolId {
        self.start
    }

    /// Production indices with the given left-hand side, in file order.
    pub fn alternatives(&self, lhs: SymbolId) -> &[usize] {
        &self.by_lhs[lhs.index()]
    }

    /// Position of `production` among the alternatives of its left-hand side.
    pub fn alternative_index(&self, production: usize) -> usize {
        let p = &self.productions[production];
        self.by_lhs[p.lhs.index()]
            .iter()
            .position(|&q| q == production)
            .expect("production listed under its lhs")
    }

    pub fn nonterminal(&self, name: &str) -> Option<SymbolId> {
        self.lookup
            .get(&(name.to_string(), SymbolKind::Nonterminal))
            .copied()
    }

    pub fn terminal(&self, text: &str) -> Option<SymbolId> {
        self.lookup
            .get(&(text.to_string(), SymbolKind::Terminal))
            .copied()
    }

    /// Minimal number of rule applications that fully expand `symbol`.
    pub fn min_steps(&self, symbol: SymbolId) -> usize {
        self.min_steps[symbol.index()]
    }

    /// Hex SHA-256 of the grammar file bytes.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Finds a production by its textual form, e.g. `"<atom> -> 'C' <bond> <digit>"`.
    pub fn find(&self, spec: &str) -> Result<usize, GrammarError> {
        let unknown = || GrammarError::UnknownProduction(spec.to_string());
        let rules = parse_rules(spec).map_err(|_| unknown())?;
        let [rule] = rules.as_slice() else {
            return Err(unknown());
        };
        let [alt] = rule.alternatives.as_slice() else {
            return Err(unknown());
        };
        let lhs = self.nonterminal(&rule.lhs).ok_or_else(unknown)?;
        let rhs: Option<Vec<SymbolId>> = alt
            .iter()
            .map(|item| match item {
                Item::Nonterminal(n) => self.nonterminal(n),
                Item::Terminal(t) => self.terminal(t),
            })
            .collect();
        let rhs = rhs.ok_or_else(unknown)?;
        self.alternatives(lhs)
            .iter()
            .copied()
            .find(|&p| self.productions[p].rhs == rhs)
            .ok_or_else(unknown)
    }

    pub fn display_production(&self, index: usize) -> String {
        let p = &self.productions[index];
        let rhs: Vec<String> = p.rhs.iter().map(|s| self.symbol(*s).to_string()).collect();
        format!("{} -> {}", self.symbol(p.lhs), rhs.join(" "))
    }
}

#[derive(Debug)]
enum Item {
    Nonterminal(String),
    Terminal(String),
}

#[derive(Debug)]
struct Rule {
    lhs: String,
    line: usize,
    alternatives: Vec<Vec<Item>>,
}

fn parse_rules(text: &str) -> Result<Vec<Rule>, GrammarError> {
    let mut rules: Vec<Rule> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut cur = Cursor::new(raw, line);
        cur.skip_ws();
        if cur.peek() == Some('|') {
            let Some(rule) = rules.last_mut() else {
                return Err(cur.error("continuation line before any rule"));
            };
            cur.bump();
            parse_alternatives(&mut cur, &mut rule.alternatives)?;
            continue;
        }
        let lhs = cur.nonterminal()?;
        cur.skip_ws();
        if !cur.eat("->") {
            return Err(cur.error("expected `->`"));
        }
        let mut alternatives = Vec::new();
        parse_alternatives(&mut cur, &mut alternatives)?;
        rules.push(Rule {
            lhs,
            line,
            alternatives,
        });
    }
    Ok(rules)
}

fn parse_alternatives(cur: &mut Cursor, out: &mut Vec<Vec<Item>>) -> Result<(), GrammarError> {
    let mut current = Vec::new();
    let mut alt_start = cur.column();
    loop {
        cur.skip_ws();
        match cur.peek() {
            None => break,
            Some('|') => {
                if current.is_empty() {
                    return Err(GrammarError::EmptyAlternative {
                        line: cur.line,
                        column: alt_start,
                    });
                }
                out.push(std::mem::take(&mut current));
                cur.bump();
                alt_start = cur.column();
            }
            Some('<') => current.push(Item::Nonterminal(cur.nonterminal()?)),
            Some('\'') => current.push(Item::Terminal(cur.terminal()?)),
            Some(_) => return Err(cur.error("expected `<nonterminal>`, `'terminal'` or `|`")),
        }
    }
    if current.is_empty() {
        return Err(GrammarError::EmptyAlternative {
            line: cur.line,
            column: alt_start,
        });
    }
    out.push(current);
    Ok(())
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str, line: usize) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            line,
            _src: src,
        }
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        self.pos += 1;
        c
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        let n = s.chars().count();
        if self.chars.len() >= self.pos + n
            && self.chars[self.pos..self.pos + n]
                .iter()
                .copied()
                .eq(s.chars())
        {
            self.pos += n;
            true
        } else {
            false
        }
    }

    fn error(&self, message: &str) -> GrammarError {
        GrammarError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.to_string(),
        }
    }

    fn nonterminal(&mut self) -> Result<String, GrammarError> {
        if self.peek() != Some('<') {
            return Err(self.error("expected `<`"));
        }
        let start = self.clone_pos();
        self.bump();
        let mut name = String::new();
        loop {
            match self.bump() {
                Some('>') => break,
                Some(c) => name.push(c),
                None => {
                    return Err(GrammarError::Syntax {
                        line: self.line,
                        column: start + 1,
                        message: "unterminated nonterminal".into(),
                    })
                }
            }
        }
        let name = name.trim().to_string();
        if name.is_empty() {
            return Err(GrammarError::Syntax {
                line: self.line,
                column: start + 1,
                message: "empty nonterminal name".into(),
            });
        }
        Ok(name)
    }

    fn terminal(&mut self) -> Result<String, GrammarError> {
        let start = self.clone_pos();
        self.bump();
        let mut text = String::new();
        loop {
            match self.bump() {
                Some('\'') => break,
                Some('\\') => match self.bump() {
                    Some(c @ ('\\' | '\'')) => text.push(c),
                    _ => return Err(self.error("bad escape in terminal")),
                },
                Some(c) => text.push(c),
                None => {
                    return Err(GrammarError::Syntax {
                        line: self.line,
                        column: start + 1,
                        message: "unterminated terminal".into(),
                    })
                }
            }
        }
        if text.is_empty() {
            return Err(GrammarError::Syntax {
                line: self.line,
                column: start + 1,
                message: "empty terminal".into(),
            });
        }
        Ok(text)
    }

    fn clone_pos(&self) -> usize {
        self.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOY: &str = include_str!("../../grammars/toy_smiles.grm");

    #[test]
    fn toy_grammar_has_fifteen_productions() {
        let g = Grammar::load(TOY).unwrap();
        assert_eq!(g.productions().len(), 15);
        let count = |n: &str| g.alternatives(g.nonterminal(n).unwrap()).len();
        assert_eq!(count("s"), 1);
        assert_eq!(count("atom"), 2);
        assert_eq!(count("bond"), 3);
        assert_eq!(count("digit"), 9);
        assert_eq!(g.symbol(g.start()).name, "s");
    }

    #[test]
    fn single_rule_grammar() {
        let g = Grammar::load("<S> -> 'a'").unwrap();
        assert_eq!(g.productions().len(), 1);
        assert_eq!(g.symbol(g.start()).name, "S");
        assert_eq!(g.production(0).rhs, vec![g.terminal("a").unwrap()]);
    }

    #[test]
    fn indices_follow_file_order() {
        let g = Grammar::load(TOY).unwrap();
        assert_eq!(g.find("<s> -> <atom> 'C' <atom>").unwrap(), 0);
        assert_eq!(g.find("<atom> -> 'C'").unwrap(), 1);
        assert_eq!(g.find("<atom> -> 'C' <bond> <digit>").unwrap(), 2);
        assert_eq!(g.find("<digit> -> '9'").unwrap(), 14);
        assert_eq!(g.alternative_index(14), 8);
    }

    #[test]
    fn loading_is_deterministic() {
        let a = Grammar::load(TOY).unwrap();
        let b = Grammar::load(TOY).unwrap();
        assert_eq!(a.productions(), b.productions());
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn continuation_lines_and_escapes() {
        let g = Grammar::load("<a> -> 'x'\n    | '\\\\' <b>\n# c\n<b> -> '\\''").unwrap();
        assert_eq!(g.productions().len(), 3);
        assert_eq!(g.symbol(g.production(1).rhs[0]).name, "\\");
        assert_eq!(g.symbol(g.production(2).rhs[0]).name, "'");
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(
            Grammar::load("<a> -> <b>"),
            Err(GrammarError::Undefined { .. })
        ));
        assert!(matches!(
            Grammar::load("<a> -> 'x'\n<a> -> 'y'"),
            Err(GrammarError::Duplicate { line: 2, .. })
        ));
        assert!(matches!(
            Grammar::load("<a> -> 'x' | | 'y'"),
            Err(GrammarError::EmptyAlternative { line: 1, .. })
        ));
        assert!(matches!(
            Grammar::load("<a> -> "),
            Err(GrammarError::EmptyAlternative { .. })
        ));
        assert_eq!(
            Grammar::load("<a> => 'x'").unwrap_err(),
            GrammarError::Syntax {
                line: 1,
                column: 5,
                message: "expected `->`".into()
            }
        );
        assert!(matches!(
            Grammar::load("<a> -> 'x"),
            Err(GrammarError::Syntax { .. })
        ));
        assert_eq!(
            Grammar::load("# nothing\n").unwrap_err(),
            GrammarError::Empty
        );
    }

    #[test]
    fn min_steps() {
        let g = Grammar::load(TOY).unwrap();
        assert_eq!(g.min_steps(g.start()), 3);
        assert_eq!(g.min_steps(g.nonterminal("digit").unwrap()), 1);
        assert_eq!(g.min_steps(g.terminal("C").unwrap()), 0);
    }
}
