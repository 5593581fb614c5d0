use thiserror::Error;

use super::ast::{
    Atom, Bond, BracketAtom, Branch, BranchedAtom, Chain, Element, Molecule, RingBond,
};
use crate::grammar::{DerivationTree, Grammar};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("unexpected character `{found}` at {position}")]
    Lexical { position: usize, found: char },
    #[error("expected {expected} at {position}, found {found}")]
    Syntax {
        position: usize,
        expected: &'static str,
        found: String,
    },
}

/// Characters that occur in some token of the grammar.
const ALPHABET: &str = "BCNOSPFIlrcnos[]12345678@H+-=#/\\()";

/// Parses a SMILES string into a derivation tree under the SMILES grammar.
pub fn parse_smiles(g: &Grammar, text: &str) -> Result<DerivationTree, ParseError> {
    Ok(parse_molecule(text)?.to_tree(g))
}

pub(super) fn parse_molecule(text: &str) -> Result<Molecule, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    if let Some(position) = chars.iter().position(|c| !ALPHABET.contains(*c)) {
        return Err(ParseError::Lexical {
            position,
            found: chars[position],
        });
    }
    let mut p = Parser { chars, pos: 0 };
    let chain = p.chain()?;
    if p.pos < p.chars.len() {
        return Err(p.err("end of input"));
    }
    Ok(Molecule { chain })
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, k: usize) -> Option<char> {
        self.chars.get(self.pos + k).copied()
    }

    fn err(&self, expected: &'static str) -> ParseError {
        ParseError::Syntax {
            position: self.pos,
            expected,
            found: self
                .peek()
                .map_or("end of input".to_string(), |c| format!("`{c}`")),
        }
    }

    fn eat(&mut self, c: char, expected: &'static str) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(expected))
        }
    }

    fn digit(&mut self) -> Option<u8> {
        match self.peek() {
            Some(c @ '1'..='8') => {
                self.pos += 1;
                Some(c as u8 - b'0')
            }
            _ => None,
        }
    }

    fn at_atom(&self) -> bool {
        match self.peek() {
            Some('[') => true,
            Some('C') | Some('B') => true,
            Some(c) => Element::parse(&c.to_string()).is_some(),
            None => false,
        }
    }

    fn bond_here(&self) -> Option<Bond> {
        self.peek().and_then(Bond::from_char)
    }

    fn chain(&mut self) -> Result<Chain, ParseError> {
        let mut links = vec![(None, self.branched_atom()?)];
        loop {
            if let Some(b) = self.bond_here() {
                self.pos += 1;
                links.push((Some(b), self.branched_atom()?));
            } else if self.at_atom() {
                links.push((None, self.branched_atom()?));
            } else {
                return Ok(Chain { links });
            }
        }
    }

    fn element(&mut self) -> Result<Element, ParseError> {
        let two: String = self.chars[self.pos..].iter().take(2).collect();
        if two == "Cl" || two == "Br" {
            self.pos += 2;
            return Ok(Element::parse(&two).expect("two-character element"));
        }
        match self.peek().and_then(|c| Element::parse(&c.to_string())) {
            Some(e) => {
                self.pos += 1;
                Ok(e)
            }
            None => Err(self.err("an atom symbol")),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        if self.peek() != Some('[') {
            return Ok(Atom::Organic(self.element()?));
        }
        self.pos += 1;
        let mut isotope = Vec::new();
        while let Some(d) = self.digit() {
            isotope.push(d);
            if isotope.len() > 3 {
                self.pos -= 1;
                return Err(self.err("an atom symbol"));
            }
        }
        let element = self.element()?;
        let chiral = if self.peek() == Some('@') {
            self.pos += 1;
            if self.peek() == Some('@') {
                self.pos += 1;
                Some(true)
            } else {
                Some(false)
            }
        } else {
            None
        };
        let hcount = if self.peek() == Some('H') {
            self.pos += 1;
            Some(self.digit())
        } else {
            None
        };
        let charge = match self.peek() {
            Some(c @ ('+' | '-')) => {
                self.pos += 1;
                Some((c == '+', self.digit()))
            }
            _ => None,
        };
        self.eat(']', "`]`")?;
        Ok(Atom::Bracket(BracketAtom {
            isotope,
            element,
            chiral,
            hcount,
            charge,
        }))
    }

    fn branched_atom(&mut self) -> Result<BranchedAtom, ParseError> {
        if !self.at_atom() {
            return Err(self.err("an atom"));
        }
        let position = self.pos;
        let atom = self.atom()?;
        let mut rings = Vec::new();
        loop {
            let bond = match self.bond_here() {
                Some(b) if matches!(self.peek_at(1), Some('1'..='8')) => {
                    self.pos += 1;
                    Some(b)
                }
                _ => None,
            };
            let position = self.pos;
            match self.digit() {
                Some(digit) => rings.push(RingBond {
                    bond,
                    digit,
                    position,
                }),
                None => break,
            }
        }
        let mut branches = Vec::new();
        while self.peek() == Some('(') {
            self.pos += 1;
            let bond = self.bond_here();
            if bond.is_some() {
                self.pos += 1;
            }
            let chain = self.chain()?;
            self.eat(')', "`)`")?;
            branches.push(Branch { bond, chain });
        }
        Ok(BranchedAtom {
            atom,
            position,
            rings,
            branches,
        })
    }
}
