//! SMILES molecules over an OpenSMILES subset: organic and bracket atoms,
//! bonds, branches and ring closures with digits 1 to 8.
//!
//! A molecule is valid when every ring digit is closed, both ends of a ring
//! agree on its bond when both annotate one, no atom repeats a digit, and
//! no atom exceeds its valence (see [`Element::max_valence`]).

mod ast;
mod check;
mod parse;
mod semantics;

pub use ast::{
    class_max_valence, Atom, Bond, BracketAtom, Branch, BranchedAtom, Chain, Element, Molecule,
    RingBond,
};
pub use check::{check_molecule, OpenRing, RingEvent, RingLedger};
pub use parse::{parse_smiles, ParseError};
pub use semantics::{SmilesEnv, SmilesSemantics};

use crate::attr::{
    AttrError, AttrKind, CheckFn, CheckReport, Domain, RuleFn, Schema, Value, Violation,
};
use crate::grammar::{DerivationTree, Grammar};

pub const UNCLOSED_RING: &str = "unclosed-ring";
pub const RING_BOND_MISMATCH: &str = "ring-bond-mismatch";
pub const RINGBOND_REPEAT: &str = "ringbond-repeat";
pub const VALENCE: &str = "valence";

/// Largest ring digit.
pub const MAX_RING_DIGIT: u8 = 8;

/// Ring pairing schema, synthesized only. Every subtree reports the digits
/// it uses an odd number of times (`open`); since a digit opens and closes
/// alternately, the molecule leaves a ring open exactly when `open` is
/// non-empty at the root. `<branched atom>.sa` is the stochastic lazy image
/// of the digits the atom carries, drawn before the atom is generated.
/// Valence and bond agreement are left to [`check_smiles`].
pub fn schema(g: &Grammar) -> Schema {
    build(g).expect("SMILES schema matches the SMILES grammar")
}

fn build(g: &Grammar) -> Result<Schema, AttrError> {
    use AttrKind::{StochasticLazy, Synthesized as S};
    let mut s = Schema::new(g);
    let labels: Vec<String> = (1..=MAX_RING_DIGIT).map(|d| d.to_string()).collect();
    s.declare(g, "digit", "val", S, Domain::Token)?;
    s.declare(g, "ringbond", "digit", S, Domain::Token)?;
    s.declare(g, "ringbonds", "digits", S, Domain::SymbolSet)?;
    s.declare(g, "ringbonds", "fresh", S, Domain::Flag)?;
    s.declare(g, "branched atom", "digits", S, Domain::SymbolSet)?;
    s.declare(
        g,
        "branched atom",
        "sa",
        StochasticLazy,
        Domain::BitSet { cap: labels.len() },
    )?;
    for nt in ["chain", "branched atom", "branches", "branch"] {
        s.declare(g, nt, "open", S, Domain::SymbolSet)?;
    }
    s.declare(g, "smiles", "closed", S, Domain::Flag)?;

    for d in &labels {
        s.rule(
            g,
            &format!("<digit> -> '{d}'"),
            "0.val",
            &[],
            RuleFn::Const(Value::token(d.clone())),
        )?;
    }
    s.rule(
        g,
        "<ringbond> -> <digit>",
        "0.digit",
        &["1.val"],
        RuleFn::Copy,
    )?;
    s.rule(
        g,
        "<ringbond> -> <bond> <digit>",
        "0.digit",
        &["2.val"],
        RuleFn::Copy,
    )?;
    let base = "<ringbonds> -> <ringbond>";
    s.rule(g, base, "0.digits", &["1.digit"], RuleFn::SetOf)?;
    s.rule(g, base, "0.fresh", &[], RuleFn::Const(Value::Flag(true)))?;
    let rec = "<ringbonds> -> <ringbonds> <ringbond>";
    s.rule(g, rec, "0.digits", &["1.digits", "2.digit"], RuleFn::Insert)?;
    s.rule(
        g,
        rec,
        "0.fresh",
        &["1.digits", "2.digit"],
        RuleFn::Check {
            check: CheckFn::NotMember,
            id: RINGBOND_REPEAT.into(),
        },
    )?;

    // (production, has ringbonds, branches position)
    let ba = [
        ("<branched atom> -> <atom>", false, None),
        ("<branched atom> -> <atom> <branches>", false, Some(2)),
        ("<branched atom> -> <atom> <ringbonds>", true, None),
        (
            "<branched atom> -> <atom> <ringbonds> <branches>",
            true,
            Some(3),
        ),
    ];
    for (p, rings, branches) in ba {
        if rings {
            s.rule(g, p, "0.digits", &["2.digits"], RuleFn::Copy)?;
        } else {
            s.rule(g, p, "0.digits", &[], RuleFn::Const(Value::empty_set()))?;
        }
        s.rule(
            g,
            p,
            "0.sa",
            &["0.digits"],
            RuleFn::Membership {
                labels: labels.clone(),
            },
        )?;
        match branches {
            Some(k) => s.rule(
                g,
                p,
                "0.open",
                &["0.digits", &format!("{k}.open")],
                RuleFn::SymDiff,
            )?,
            None => s.rule(g, p, "0.open", &["0.digits"], RuleFn::Copy)?,
        }
    }

    let lists: [(&str, &[usize]); 7] = [
        ("<chain> -> <branched atom>", &[1]),
        ("<chain> -> <chain> <branched atom>", &[1, 2]),
        ("<chain> -> <chain> <bond> <branched atom>", &[1, 3]),
        ("<branches> -> <branch>", &[1]),
        ("<branches> -> <branches> <branch>", &[1, 2]),
        ("<branch> -> '(' <chain> ')'", &[2]),
        ("<branch> -> '(' <bond> <chain> ')'", &[3]),
    ];
    for (p, kids) in lists {
        let deps: Vec<String> = kids.iter().map(|k| format!("{k}.open")).collect();
        let deps: Vec<&str> = deps.iter().map(String::as_str).collect();
        let f = if deps.len() == 1 {
            RuleFn::Copy
        } else {
            RuleFn::SymDiff
        };
        s.rule(g, p, "0.open", &deps, f)?;
    }
    s.rule(
        g,
        "<smiles> -> <chain>",
        "0.closed",
        &["1.open"],
        RuleFn::Check {
            check: CheckFn::IsEmpty,
            id: UNCLOSED_RING.into(),
        },
    )?;
    Ok(s)
}

/// Offline check of a complete SMILES tree: a left-to-right scan with a
/// [`RingLedger`] plus per-atom bond-order sums.
pub fn check_smiles(g: &Grammar, tree: &DerivationTree) -> CheckReport {
    match Molecule::from_tree(g, tree) {
        Ok(m) => CheckReport::from_violations(check_molecule(&m)),
        Err(e) => CheckReport::from_violations(vec![Violation {
            location: 0,
            rule: "malformed".into(),
            detail: e.to_string(),
        }]),
    }
}

/// Parses and checks a SMILES string.
pub fn check_smiles_text(text: &str) -> Result<CheckReport, ParseError> {
    Ok(CheckReport::from_violations(check_molecule(
        &Molecule::parse(text)?,
    )))
}

#[cfg(test)]
mod tests;
