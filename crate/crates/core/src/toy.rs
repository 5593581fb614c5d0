//! The three-carbon toy language: `CCC` (a chain) or `C<b><d>CC<b><d>` (a
//! ring closed by a matching bond and digit).

use thiserror::Error;

use crate::attr::{
    evaluate_offline, AttrKind, CheckFn, CheckReport, Domain, EvalOrder, RuleFn, Schema, Value,
    Violation,
};
use crate::decoder::{LinkRequest, MaskCtx, Semantics};
use crate::grammar::{rule_sequence_to_tree, DerivationTree, Grammar, NodeId, SymbolId};

pub const START: &str = "<s> -> <atom> 'C' <atom>";
pub const ATOM_PLAIN: &str = "<atom> -> 'C'";
pub const ATOM_RING: &str = "<atom> -> 'C' <bond> <digit>";

/// Synthesized schema: each atom exposes its ring bond as a set, `<s>`
/// intersects them and checks both sides agree. `<s>.sa` is the
/// predetermined cardinality of `<s>.matched`.
pub fn schema(g: &Grammar) -> Schema {
    build(g).expect("toy schema matches the toy grammar")
}

fn build(g: &Grammar) -> Result<Schema, crate::attr::AttrError> {
    use AttrKind::*;
    let mut s = Schema::new(g);
    s.declare(g, "digit", "val", Synthesized, Domain::Token)?;
    s.declare(g, "bond", "val", Synthesized, Domain::Token)?;
    s.declare(g, "atom", "set", Synthesized, Domain::SymbolSet)?;
    s.declare(g, "s", "matched", Synthesized, Domain::SymbolSet)?;
    s.declare(g, "s", "ok", Synthesized, Domain::Flag)?;
    s.declare(g, "s", "sa", StochasticLazy, Domain::BitSet { cap: 1 })?;

    for d in 1..=9 {
        s.rule(
            g,
            &format!("<digit> -> '{d}'"),
            "0.val",
            &[],
            RuleFn::Const(Value::token(d.to_string())),
        )?;
    }
    for b in ["-", "=", "#"] {
        s.rule(
            g,
            &format!("<bond> -> '{b}'"),
            "0.val",
            &[],
            RuleFn::Const(Value::token(b)),
        )?;
    }
    s.rule(
        g,
        ATOM_PLAIN,
        "0.set",
        &[],
        RuleFn::Const(Value::empty_set()),
    )?;
    s.rule(g, ATOM_RING, "0.set", &["2.val", "3.val"], RuleFn::SetOf)?;
    s.rule(
        g,
        START,
        "0.matched",
        &["1.set", "3.set"],
        RuleFn::Intersect,
    )?;
    s.rule(
        g,
        START,
        "0.ok",
        &["1.set", "0.matched", "3.set"],
        RuleFn::Check {
            check: CheckFn::AllEqual,
            id: "ring-mismatch".into(),
        },
    )?;
    s.rule(
        g,
        START,
        "0.sa",
        &["0.matched"],
        RuleFn::CountBits { cap: 1 },
    )?;
    Ok(s)
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("expected {expected} at {position}")]
pub struct ToyParseError {
    pub position: usize,
    pub expected: &'static str,
}

/// Parses a toy string such as `CCC` or `C-1CC-1`.
pub fn parse_toy(g: &Grammar, text: &str) -> Result<DerivationTree, ToyParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut pos = 0;
    let mut seq = vec![g.find(START).expect("toy production")];
    let find = |spec: String| g.find(&spec).expect("toy production");
    let err = |position, expected| ToyParseError { position, expected };
    for k in 0..2 {
        if chars.get(pos) != Some(&'C') {
            return Err(err(pos, "`C`"));
        }
        pos += 1;
        match chars.get(pos) {
            Some(b @ ('-' | '=' | '#')) => {
                seq.push(find(ATOM_RING.into()));
                seq.push(find(format!("<bond> -> '{b}'")));
                pos += 1;
                match chars.get(pos) {
                    Some(d @ '1'..='9') => seq.push(find(format!("<digit> -> '{d}'"))),
                    _ => return Err(err(pos, "a digit")),
                }
                pos += 1;
            }
            _ => seq.push(find(ATOM_PLAIN.into())),
        }
        if k == 0 {
            if chars.get(pos) != Some(&'C') {
                return Err(err(pos, "`C`"));
            }
            pos += 1;
        }
    }
    if pos != chars.len() {
        return Err(err(pos, "end of input"));
    }
    Ok(rule_sequence_to_tree(g, &seq).expect("sequence follows the grammar"))
}

/// Decoder hooks for the toy grammar. `<s>.sa` decides whether the first
/// atom opens a ring; once that atom is complete its set becomes
/// `<s>.matched`, which dictates the second atom.
pub struct ToySemantics {
    grammar: Grammar,
    schema: Schema,
    atom: SymbolId,
    bond: SymbolId,
    /// Alternative index of the ring-bond atom rule.
    ring_alt: usize,
}

#[derive(Debug, Clone, Default)]
pub struct ToyEnv {
    ring: Option<bool>,
    /// Bond and digit alternatives of the first atom's ring bond.
    matched: Option<(usize, usize)>,
}

impl ToySemantics {
    pub fn new(grammar: Grammar) -> Self {
        let schema = schema(&grammar);
        let nt = |n: &str| grammar.nonterminal(n).expect("toy nonterminal");
        ToySemantics {
            atom: nt("atom"),
            bond: nt("bond"),
            ring_alt: grammar.alternative_index(grammar.find(ATOM_RING).expect("toy ring rule")),
            schema,
            grammar,
        }
    }

    pub fn builtin() -> Self {
        Self::new(crate::GrammarId::Toy.load_builtin())
    }

    // Slot of `node`'s atom ancestor under the root: 0 or 2.
    fn atom_slot(&self, tree: &DerivationTree, node: NodeId) -> usize {
        let mut n = node;
        while let Some(p) = tree.parent(n) {
            if p == tree.root() {
                return tree.node(n).slot;
            }
            n = p;
        }
        0
    }

    fn cost(&self, env: &ToyEnv, tree: &DerivationTree, node: NodeId) -> usize {
        if tree.symbol(node) == self.atom {
            if env.ring == Some(true) {
                3
            } else {
                1
            }
        } else {
            self.grammar.min_steps(tree.symbol(node))
        }
    }

    fn ring_of(&self, tree: &DerivationTree, atom: NodeId) -> Option<(usize, usize)> {
        let kids = tree.children(atom);
        if kids.len() != 3 {
            return None;
        }
        let alt = |n: NodeId| {
            self.grammar
                .alternative_index(tree.production(n).expect("complete"))
        };
        Some((alt(kids[1]), alt(kids[2])))
    }
}

impl Semantics for ToySemantics {
    type Env = ToyEnv;

    fn grammar(&self) -> &Grammar {
        &self.grammar
    }

    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn start(&self) -> ToyEnv {
        ToyEnv::default()
    }

    fn lazy_attr(&self, tree: &DerivationTree, node: NodeId) -> Option<&'static str> {
        (node == tree.root()).then_some("sa")
    }

    fn record_lazy(&self, env: &mut ToyEnv, _tree: &DerivationTree, _node: NodeId, value: u64) {
        env.ring = Some(value & 1 == 1);
    }

    fn rule_options(
        &self,
        env: &ToyEnv,
        tree: &DerivationTree,
        node: NodeId,
        ctx: &MaskCtx,
    ) -> Vec<bool> {
        let rest: usize = ctx.pending.iter().map(|&n| self.cost(env, tree, n)).sum();
        let sym = tree.symbol(node);
        let n = self.grammar.alternatives(sym).len();
        if node == tree.root() {
            let atoms = 2 * if env.ring == Some(true) { 3 } else { 1 };
            return vec![ctx.fits(1 + atoms + rest)];
        }
        let second = self.atom_slot(tree, node) == 2;
        if sym == self.atom {
            let ring = env.ring == Some(true);
            return (0..n)
                .map(|i| match i == self.ring_alt {
                    true => ring && ctx.fits(3 + rest),
                    false => !ring && ctx.fits(1 + rest),
                })
                .collect();
        }
        let fits = ctx.fits(1 + rest);
        let forced = match (second, env.matched) {
            (true, Some((b, d))) => Some(if sym == self.bond { b } else { d }),
            _ => None,
        };
        (0..n)
            .map(|i| fits && forced.is_none_or(|f| f == i))
            .collect()
    }

    fn finish_node(
        &self,
        env: &mut ToyEnv,
        tree: &DerivationTree,
        node: NodeId,
    ) -> Option<LinkRequest> {
        if tree.parent(node) != Some(tree.root()) || tree.node(node).slot != 0 {
            return None;
        }
        env.matched = self.ring_of(tree, node);
        Some(LinkRequest {
            node: tree.root(),
            attr: "sa",
            value: Value::Bits(env.matched.is_some() as u64),
        })
    }

    fn implied_lazy(&self, tree: &DerivationTree, node: NodeId) -> u64 {
        let a = self.ring_of(tree, tree.child(node, 0));
        let b = self.ring_of(tree, tree.child(node, 2));
        (a.is_some() && a == b) as u64
    }

    fn check(&self, tree: &DerivationTree) -> CheckReport {
        match evaluate_offline(&self.schema, &self.grammar, tree, EvalOrder::Forward) {
            Ok(e) => e.report(&self.grammar, tree),
            Err(e) => CheckReport::from_violations(vec![Violation {
                location: 0,
                rule: "malformed".into(),
                detail: e.to_string(),
            }]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_both_shapes() {
        let g = crate::GrammarId::Toy.load_builtin();
        for text in ["CCC", "C-1CC-1", "C=2CC#3"] {
            assert_eq!(parse_toy(&g, text).unwrap().yield_string(&g), text);
        }
        assert_eq!(parse_toy(&g, "CC").unwrap_err().position, 2);
        assert_eq!(parse_toy(&g, "C-CC").unwrap_err().expected, "a digit");
        assert_eq!(parse_toy(&g, "CCCC").unwrap_err().position, 3);
    }
}
