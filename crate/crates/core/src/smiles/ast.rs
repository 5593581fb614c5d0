use std::fmt;

use crate::grammar::{rule_sequence_to_tree, DerivationTree, Grammar};

const ALIPHATIC: [&str; 10] = ["B", "C", "N", "O", "S", "P", "F", "I", "Cl", "Br"];
const AROMATIC: [&str; 4] = ["c", "n", "o", "s"];
const ALIPHATIC_VALENCE: [u8; 10] = [3, 4, 3, 2, 6, 5, 1, 1, 1, 1];
const AROMATIC_VALENCE: [u8; 4] = [4, 3, 2, 2];

/// An organic-subset element, indexed in grammar alternative order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Element {
    pub aromatic: bool,
    pub index: u8,
}

impl Element {
    pub fn parse(text: &str) -> Option<Element> {
        if let Some(i) = ALIPHATIC.iter().position(|&s| s == text) {
            return Some(Element {
                aromatic: false,
                index: i as u8,
            });
        }
        AROMATIC.iter().position(|&s| s == text).map(|i| Element {
            aromatic: true,
            index: i as u8,
        })
    }

    pub fn text(self) -> &'static str {
        if self.aromatic {
            AROMATIC[self.index as usize]
        } else {
            ALIPHATIC[self.index as usize]
        }
    }

    /// Largest bond-order sum (explicit hydrogens included) the atom accepts.
    pub fn max_valence(self) -> u8 {
        if self.aromatic {
            AROMATIC_VALENCE[self.index as usize]
        } else {
            ALIPHATIC_VALENCE[self.index as usize]
        }
    }

    pub fn all(aromatic: bool) -> impl Iterator<Item = Element> {
        let n = if aromatic {
            AROMATIC.len()
        } else {
            ALIPHATIC.len()
        };
        (0..n as u8).map(move |index| Element { aromatic, index })
    }
}

/// Largest valence of any element in the class.
pub fn class_max_valence(aromatic: bool) -> u8 {
    if aromatic {
        *AROMATIC_VALENCE.iter().max().unwrap()
    } else {
        *ALIPHATIC_VALENCE.iter().max().unwrap()
    }
}

/// Bond tokens in grammar alternative order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bond {
    Single,
    Double,
    Triple,
    Up,
    Down,
}

impl Bond {
    pub const ALL: [Bond; 5] = [
        Bond::Single,
        Bond::Double,
        Bond::Triple,
        Bond::Up,
        Bond::Down,
    ];

    pub fn order(self) -> u8 {
        match self {
            Bond::Double => 2,
            Bond::Triple => 3,
            _ => 1,
        }
    }

    pub fn text(self) -> &'static str {
        match self {
            Bond::Single => "-",
            Bond::Double => "=",
            Bond::Triple => "#",
            Bond::Up => "/",
            Bond::Down => "\\",
        }
    }

    pub fn from_char(c: char) -> Option<Bond> {
        Bond::ALL.into_iter().find(|b| b.text().starts_with(c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BracketAtom {
    /// One to three digits.
    pub isotope: Vec<u8>,
    pub element: Element,
    /// `Some(false)` for `@`, `Some(true)` for `@@`.
    pub chiral: Option<bool>,
    /// `Some(None)` for a bare `H`, `Some(Some(d))` for `H<d>`.
    pub hcount: Option<Option<u8>>,
    /// Sign (true for `+`) and optional magnitude digit.
    pub charge: Option<(bool, Option<u8>)>,
}

impl BracketAtom {
    pub fn hydrogens(&self) -> u8 {
        match self.hcount {
            None => 0,
            Some(None) => 1,
            Some(Some(d)) => d,
        }
    }

    pub fn charge_magnitude(&self) -> u8 {
        match self.charge {
            None => 0,
            Some((_, d)) => d.unwrap_or(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Atom {
    Organic(Element),
    Bracket(BracketAtom),
}

impl Atom {
    pub fn element(&self) -> Element {
        match self {
            Atom::Organic(e) => *e,
            Atom::Bracket(b) => b.element,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RingBond {
    pub bond: Option<Bond>,
    /// 1 to 8.
    pub digit: u8,
    /// Character offset of the digit.
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Branch {
    pub bond: Option<Bond>,
    pub chain: Chain,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BranchedAtom {
    pub atom: Atom,
    /// Character offset of the atom.
    pub position: usize,
    pub rings: Vec<RingBond>,
    pub branches: Vec<Branch>,
}

/// Atoms joined left to right; the first link never carries a bond.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chain {
    pub links: Vec<(Option<Bond>, BranchedAtom)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Molecule {
    pub chain: Chain,
}

impl Molecule {
    pub fn parse(text: &str) -> Result<Molecule, super::ParseError> {
        super::parse::parse_molecule(text)
    }

    /// Reads the molecule back from a complete SMILES-grammar tree.
    pub fn from_tree(g: &Grammar, tree: &DerivationTree) -> Result<Molecule, super::ParseError> {
        Self::parse(&tree.yield_string(g))
    }

    pub fn rule_sequence(&self, g: &Grammar) -> Vec<usize> {
        let p = Prods::new(g);
        let mut out = vec![p.smiles];
        p.chain(&self.chain, &mut out);
        out
    }

    pub fn to_tree(&self, g: &Grammar) -> DerivationTree {
        rule_sequence_to_tree(g, &self.rule_sequence(g)).expect("molecule AST encodes a derivation")
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Organic(e) => f.write_str(e.text()),
            Atom::Bracket(b) => {
                f.write_str("[")?;
                for d in &b.isotope {
                    write!(f, "{d}")?;
                }
                f.write_str(b.element.text())?;
                match b.chiral {
                    Some(false) => f.write_str("@")?,
                    Some(true) => f.write_str("@@")?,
                    None => {}
                }
                match b.hcount {
                    Some(None) => f.write_str("H")?,
                    Some(Some(d)) => write!(f, "H{d}")?,
                    None => {}
                }
                if let Some((pos, d)) = b.charge {
                    f.write_str(if pos { "+" } else { "-" })?;
                    if let Some(d) = d {
                        write!(f, "{d}")?;
                    }
                }
                f.write_str("]")
            }
        }
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (bond, ba) in &self.links {
            if let Some(b) = bond {
                f.write_str(b.text())?;
            }
            write!(f, "{}", ba.atom)?;
            for r in &ba.rings {
                if let Some(b) = r.bond {
                    f.write_str(b.text())?;
                }
                write!(f, "{}", r.digit)?;
            }
            for br in &ba.branches {
                f.write_str("(")?;
                if let Some(b) = br.bond {
                    f.write_str(b.text())?;
                }
                write!(f, "{})", br.chain)?;
            }
        }
        Ok(())
    }
}

impl fmt::Display for Molecule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.chain.fmt(f)
    }
}

/// Production indices of the SMILES grammar.
pub(crate) struct Prods {
    pub smiles: usize,
    pub atom_bracket: usize,
    pub atom_aliphatic: usize,
    pub atom_aromatic: usize,
    pub aliphatic: Vec<usize>,
    pub aromatic: Vec<usize>,
    pub bracket: usize,
    /// (isotope, chiral part) presence, indexed `iso as usize * 2 + part as usize`.
    pub bai: [usize; 4],
    pub bach_chiral_h: usize,
    pub bach_h: usize,
    pub bach_chiral: usize,
    pub bah_h_charge: usize,
    pub bah_charge: usize,
    pub bah_h: usize,
    pub bac: usize,
    pub symbol_aliphatic: usize,
    pub symbol_aromatic: usize,
    pub isotope: [usize; 3],
    pub digit: [usize; 8],
    pub chiral: [usize; 2],
    pub hcount: usize,
    pub hcount_digit: usize,
    /// `-`, `-d`, `+`, `+d`.
    pub charge: [usize; 4],
    pub bond: [usize; 5],
    pub ringbond: usize,
    pub ringbond_bond: usize,
    /// (ringbonds, branches) presence, indexed like `bai`.
    pub ba: [usize; 4],
    pub ringbonds_rec: usize,
    pub ringbonds_base: usize,
    pub branches_rec: usize,
    pub branches_base: usize,
    pub branch: usize,
    pub branch_bond: usize,
    pub chain_base: usize,
    pub chain_rec: usize,
    pub chain_bond: usize,
}

impl Prods {
    pub fn new(g: &Grammar) -> Self {
        let f = |s: &str| {
            g.find(s)
                .unwrap_or_else(|e| panic!("SMILES grammar lacks {s}: {e}"))
        };
        Prods {
            smiles: f("<smiles> -> <chain>"),
            atom_bracket: f("<atom> -> <bracket atom>"),
            atom_aliphatic: f("<atom> -> <aliphatic organic>"),
            atom_aromatic: f("<atom> -> <aromatic organic>"),
            aliphatic: ALIPHATIC
                .iter()
                .map(|s| f(&format!("<aliphatic organic> -> '{s}'")))
                .collect(),
            aromatic: AROMATIC
                .iter()
                .map(|s| f(&format!("<aromatic organic> -> '{s}'")))
                .collect(),
            bracket: f("<bracket atom> -> '[' <bracket atom (isotope)> ']'"),
            bai: [
                f("<bracket atom (isotope)> -> <symbol>"),
                f("<bracket atom (isotope)> -> <symbol> <bracket atom (chiral)>"),
                f("<bracket atom (isotope)> -> <isotope> <symbol>"),
                f("<bracket atom (isotope)> -> <isotope> <symbol> <bracket atom (chiral)>"),
            ],
            bach_chiral_h: f("<bracket atom (chiral)> -> <chiral> <bracket atom (h count)>"),
            bach_h: f("<bracket atom (chiral)> -> <bracket atom (h count)>"),
            bach_chiral: f("<bracket atom (chiral)> -> <chiral>"),
            bah_h_charge: f("<bracket atom (h count)> -> <h count> <bracket atom (charge)>"),
            bah_charge: f("<bracket atom (h count)> -> <bracket atom (charge)>"),
            bah_h: f("<bracket atom (h count)> -> <h count>"),
            bac: f("<bracket atom (charge)> -> <charge>"),
            symbol_aliphatic: f("<symbol> -> <aliphatic organic>"),
            symbol_aromatic: f("<symbol> -> <aromatic organic>"),
            isotope: [
                f("<isotope> -> <digit>"),
                f("<isotope> -> <digit> <digit>"),
                f("<isotope> -> <digit> <digit> <digit>"),
            ],
            digit: std::array::from_fn(|d| f(&format!("<digit> -> '{}'", d + 1))),
            chiral: [f("<chiral> -> '@'"), f("<chiral> -> '@@'")],
            hcount: f("<h count> -> 'H'"),
            hcount_digit: f("<h count> -> 'H' <digit>"),
            charge: [
                f("<charge> -> '-'"),
                f("<charge> -> '-' <digit>"),
                f("<charge> -> '+'"),
                f("<charge> -> '+' <digit>"),
            ],
            bond: std::array::from_fn(|i| {
                let t = Bond::ALL[i].text();
                let t = if t == "\\" { "\\\\" } else { t };
                f(&format!("<bond> -> '{t}'"))
            }),
            ringbond: f("<ringbond> -> <digit>"),
            ringbond_bond: f("<ringbond> -> <bond> <digit>"),
            ba: [
                f("<branched atom> -> <atom>"),
                f("<branched atom> -> <atom> <branches>"),
                f("<branched atom> -> <atom> <ringbonds>"),
                f("<branched atom> -> <atom> <ringbonds> <branches>"),
            ],
            ringbonds_rec: f("<ringbonds> -> <ringbonds> <ringbond>"),
            ringbonds_base: f("<ringbonds> -> <ringbond>"),
            branches_rec: f("<branches> -> <branches> <branch>"),
            branches_base: f("<branches> -> <branch>"),
            branch: f("<branch> -> '(' <chain> ')'"),
            branch_bond: f("<branch> -> '(' <bond> <chain> ')'"),
            chain_base: f("<chain> -> <branched atom>"),
            chain_rec: f("<chain> -> <chain> <branched atom>"),
            chain_bond: f("<chain> -> <chain> <bond> <branched atom>"),
        }
    }

    fn bond(&self, b: Bond, out: &mut Vec<usize>) {
        out.push(self.bond[b as usize]);
    }

    fn chain(&self, c: &Chain, out: &mut Vec<usize>) {
        for (bond, _) in c.links.iter().skip(1).rev() {
            out.push(if bond.is_some() {
                self.chain_bond
            } else {
                self.chain_rec
            });
        }
        out.push(self.chain_base);
        for (bond, ba) in &c.links {
            if let Some(b) = bond {
                self.bond(*b, out);
            }
            self.branched_atom(ba, out);
        }
    }

    fn element(&self, e: Element, out: &mut Vec<usize>) {
        out.push(if e.aromatic {
            self.aromatic[e.index as usize]
        } else {
            self.aliphatic[e.index as usize]
        });
    }

    fn branched_atom(&self, ba: &BranchedAtom, out: &mut Vec<usize>) {
        let rings = !ba.rings.is_empty();
        let branches = !ba.branches.is_empty();
        out.push(self.ba[rings as usize * 2 + branches as usize]);
        match &ba.atom {
            Atom::Organic(e) => {
                out.push(if e.aromatic {
                    self.atom_aromatic
                } else {
                    self.atom_aliphatic
                });
                self.element(*e, out);
            }
            Atom::Bracket(b) => {
                out.extend([self.atom_bracket, self.bracket]);
                let part = b.chiral.is_some() || b.hcount.is_some() || b.charge.is_some();
                out.push(self.bai[(!b.isotope.is_empty()) as usize * 2 + part as usize]);
                if !b.isotope.is_empty() {
                    out.push(self.isotope[b.isotope.len() - 1]);
                    out.extend(b.isotope.iter().map(|&d| self.digit[d as usize - 1]));
                }
                out.push(if b.element.aromatic {
                    self.symbol_aromatic
                } else {
                    self.symbol_aliphatic
                });
                self.element(b.element, out);
                if part {
                    let h = b.hcount.is_some() || b.charge.is_some();
                    out.push(match (b.chiral.is_some(), h) {
                        (true, true) => self.bach_chiral_h,
                        (false, _) => self.bach_h,
                        (true, false) => self.bach_chiral,
                    });
                    if let Some(c) = b.chiral {
                        out.push(self.chiral[c as usize]);
                    }
                    if h {
                        out.push(match (b.hcount.is_some(), b.charge.is_some()) {
                            (true, true) => self.bah_h_charge,
                            (false, _) => self.bah_charge,
                            (true, false) => self.bah_h,
                        });
                        match b.hcount {
                            Some(None) => out.push(self.hcount),
                            Some(Some(d)) => {
                                out.extend([self.hcount_digit, self.digit[d as usize - 1]])
                            }
                            None => {}
                        }
                        if let Some((pos, d)) = b.charge {
                            out.push(self.bac);
                            let base = if pos { 2 } else { 0 };
                            out.push(self.charge[base + d.is_some() as usize]);
                            if let Some(d) = d {
                                out.push(self.digit[d as usize - 1]);
                            }
                        }
                    }
                }
            }
        }
        if rings {
            for _ in 1..ba.rings.len() {
                out.push(self.ringbonds_rec);
            }
            out.push(self.ringbonds_base);
            for r in &ba.rings {
                match r.bond {
                    Some(b) => {
                        out.push(self.ringbond_bond);
                        self.bond(b, out);
                    }
                    None => out.push(self.ringbond),
                }
                out.push(self.digit[r.digit as usize - 1]);
            }
        }
        if branches {
            for _ in 1..ba.branches.len() {
                out.push(self.branches_rec);
            }
            out.push(self.branches_base);
            for br in &ba.branches {
                match br.bond {
                    Some(b) => {
                        out.push(self.branch_bond);
                        self.bond(b, out);
                    }
                    None => out.push(self.branch),
                }
                self.chain(&br.chain, out);
            }
        }
    }
}
