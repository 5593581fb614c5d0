//! Attribute grammars: declarations, semantic rules, offline evaluation,
//! dependency graphs and stochastic lazy attributes.

mod graph;
mod rule;
mod value;

pub use graph::{
    build_dependency_graph, check_noncircular, DependencyGraph, EvalOrder, MergedGraph,
};
pub use rule::{Applied, CheckFn, RuleFn, TypeMismatch};
pub use value::{Domain, Slot, Value};

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{DerivationTree, Grammar, NodeId, SymbolId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttrKind {
    Inherited,
    Synthesized,
    /// Synthesized attribute whose value is predetermined by a draw and
    /// checked once the subtree that defines it exists.
    StochasticLazy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrDecl {
    pub owner: SymbolId,
    pub name: String,
    pub kind: AttrKind,
    pub domain: Domain,
}

/// `pos` 0 is the production's lhs, `pos` i the i-th rhs symbol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttrRef {
    pub pos: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SemanticRule {
    pub production: usize,
    pub target: AttrRef,
    pub deps: Vec<AttrRef>,
    pub func: RuleFn,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AttrError {
    #[error(transparent)]
    Grammar(#[from] crate::grammar::GrammarError),
    #[error("<{symbol}> has no attribute `{attr}`")]
    Undeclared { symbol: String, attr: String },
    #[error("<{symbol}>.{attr} is declared twice")]
    DuplicateDecl { symbol: String, attr: String },
    #[error("bad attribute reference `{0}` (expected `position.name`)")]
    BadRef(String),
    #[error("rule for `{target}` in `{production}`: {message}")]
    BadTarget {
        production: String,
        target: String,
        message: String,
    },
    #[error("attribute dependencies are circular")]
    Circular,
    #[error("tree is incomplete")]
    Incomplete,
    #[error("attribute <{symbol}>.{attr} on node {node} has more than one defining rule")]
    Redefined {
        symbol: String,
        attr: String,
        node: u32,
    },
    #[error("attribute <{symbol}>.{attr} on node {node} has no defining rule")]
    Unevaluated {
        symbol: String,
        attr: String,
        node: u32,
    },
    #[error("rule for <{symbol}>.{attr}: {message}")]
    Type {
        symbol: String,
        attr: String,
        message: &'static str,
    },
    #[error("<{symbol}>.{attr} is not a stochastic lazy attribute")]
    NotLazy { symbol: String, attr: String },
    #[error("lazy attribute <{symbol}>.{attr} is already {state}")]
    LazyState {
        symbol: String,
        attr: String,
        state: &'static str,
    },
    #[error("lazy attribute <{symbol}>.{attr} was predetermined as {expected} but the subtree synthesizes {actual}")]
    LazyMismatch {
        symbol: String,
        attr: String,
        expected: Value,
        actual: Value,
    },
    #[error("value {value} does not fit the domain of <{symbol}>.{attr}")]
    Domain {
        symbol: String,
        attr: String,
        value: Value,
    },
}

/// Declarations and semantic rules bound to one grammar.
#[derive(Debug, Clone)]
pub struct Schema {
    decls: Vec<AttrDecl>,
    by_symbol: Vec<Vec<usize>>,
    rules: Vec<SemanticRule>,
    by_production: Vec<Vec<usize>>,
    root_init: Vec<(usize, Value)>,
    symbol_names: Vec<String>,
    production_names: Vec<String>,
}

impl Schema {
    pub fn new(grammar: &Grammar) -> Self {
        Schema {
            decls: Vec::new(),
            by_symbol: vec![Vec::new(); grammar.symbols().len()],
            rules: Vec::new(),
            by_production: vec![Vec::new(); grammar.productions().len()],
            root_init: Vec::new(),
            symbol_names: grammar.symbols().iter().map(|s| s.name.clone()).collect(),
            production_names: (0..grammar.productions().len())
                .map(|p| grammar.display_production(p))
                .collect(),
        }
    }

    /// Declares `<owner>.name`.
    pub fn declare(
        &mut self,
        grammar: &Grammar,
        owner: &str,
        name: &str,
        kind: AttrKind,
        domain: Domain,
    ) -> Result<(), AttrError> {
        let sym = grammar
            .nonterminal(owner)
            .ok_or_else(|| AttrError::Undeclared {
                symbol: owner.to_string(),
                attr: name.to_string(),
            })?;
        if self.slot(sym, name).is_some() {
            return Err(AttrError::DuplicateDecl {
                symbol: owner.to_string(),
                attr: name.to_string(),
            });
        }
        if let (AttrKind::StochasticLazy, Domain::BitSet { cap }) = (kind, domain) {
            assert!(
                (1..=64).contains(&cap),
                "lazy attribute cap must be in 1..=64"
            );
        } else if kind == AttrKind::StochasticLazy {
            panic!("stochastic lazy attributes must be bit sets");
        }
        self.decls.push(AttrDecl {
            owner: sym,
            name: name.to_string(),
            kind,
            domain,
        });
        self.by_symbol[sym.index()].push(self.decls.len() - 1);
        Ok(())
    }

    /// Adds a rule for `production` (textual form), e.g.
    /// `rule(g, "<s> -> <atom> 'C' <atom>", "0.matched", &["1.set", "3.set"], RuleFn::Intersect)`.
    pub fn rule(
        &mut self,
        grammar: &Grammar,
        production: &str,
        target: &str,
        deps: &[&str],
        func: RuleFn,
    ) -> Result<(), AttrError> {
        let p = grammar.find(production)?;
        self.rule_at(grammar, p, target, deps, func)
    }

    /// Like [`Schema::rule`] with a production index.
    pub fn rule_at(
        &mut self,
        grammar: &Grammar,
        production: usize,
        target: &str,
        deps: &[&str],
        func: RuleFn,
    ) -> Result<(), AttrError> {
        let t = self.resolve(grammar, production, target)?;
        let decl = &self.decls
            [self.by_symbol[self.position_symbol(grammar, production, t.pos).index()][t.slot]];
        let bad = |message: &str| AttrError::BadTarget {
            production: grammar.display_production(production),
            target: target.to_string(),
            message: message.to_string(),
        };
        match decl.kind {
            AttrKind::Inherited if t.pos == 0 => {
                return Err(bad("inherited attributes are defined by the parent"))
            }
            AttrKind::Synthesized | AttrKind::StochasticLazy if t.pos != 0 => {
                return Err(bad("synthesized attributes are defined on the lhs"))
            }
            _ => {}
        }
        let deps = deps
            .iter()
            .map(|d| self.resolve(grammar, production, d))
            .collect::<Result<Vec<_>, _>>()?;
        self.rules.push(SemanticRule {
            production,
            target: t,
            deps,
            func,
        });
        self.by_production[production].push(self.rules.len() - 1);
        Ok(())
    }

    /// Sets an inherited attribute of the root to a constant.
    pub fn root_value(
        &mut self,
        grammar: &Grammar,
        name: &str,
        value: Value,
    ) -> Result<(), AttrError> {
        let start = grammar.start();
        let slot = self
            .slot(start, name)
            .ok_or_else(|| AttrError::Undeclared {
                symbol: grammar.symbol(start).name.clone(),
                attr: name.to_string(),
            })?;
        self.root_init
            .push((self.by_symbol[start.index()][slot], value));
        Ok(())
    }

    fn position_symbol(&self, grammar: &Grammar, production: usize, pos: usize) -> SymbolId {
        let p = grammar.production(production);
        if pos == 0 {
            p.lhs
        } else {
            p.rhs[pos - 1]
        }
    }

    fn resolve(
        &self,
        grammar: &Grammar,
        production: usize,
        text: &str,
    ) -> Result<AttrRef, AttrError> {
        let (pos, name) = text
            .split_once('.')
            .ok_or_else(|| AttrError::BadRef(text.to_string()))?;
        let pos: usize = pos
            .parse()
            .map_err(|_| AttrError::BadRef(text.to_string()))?;
        if pos > grammar.production(production).rhs.len() {
            return Err(AttrError::BadRef(text.to_string()));
        }
        let sym = self.position_symbol(grammar, production, pos);
        let slot = self.slot(sym, name).ok_or_else(|| AttrError::Undeclared {
            symbol: grammar.symbol(sym).name.clone(),
            attr: name.to_string(),
        })?;
        Ok(AttrRef { pos, slot })
    }

    /// Position of `name` among the attributes of `symbol`.
    pub fn slot(&self, symbol: SymbolId, name: &str) -> Option<usize> {
        self.by_symbol
            .get(symbol.index())?
            .iter()
            .position(|&d| self.decls[d].name == name)
    }

    pub fn decls(&self) -> &[AttrDecl] {
        &self.decls
    }

    /// Declaration indices owned by `symbol`, in slot order.
    pub fn decls_of(&self, symbol: SymbolId) -> &[usize] {
        &self.by_symbol[symbol.index()]
    }

    pub fn decl(&self, index: usize) -> &AttrDecl {
        &self.decls[index]
    }

    pub fn rules(&self) -> &[SemanticRule] {
        &self.rules
    }

    pub fn rules_of(&self, production: usize) -> &[usize] {
        &self.by_production[production]
    }

    pub fn root_init(&self) -> &[(usize, Value)] {
        &self.root_init
    }

    pub fn symbol_name(&self, symbol: SymbolId) -> &str {
        &self.symbol_names[symbol.index()]
    }

    pub fn production_name(&self, production: usize) -> &str {
        &self.production_names[production]
    }

    /// Human name `<symbol>.attr` of a declaration.
    pub fn decl_name(&self, decl: usize) -> String {
        let d = &self.decls[decl];
        format!("<{}>.{}", self.symbol_name(d.owner), d.name)
    }

    fn names(&self, decl: usize) -> (String, String) {
        let d = &self.decls[decl];
        (self.symbol_name(d.owner).to_string(), d.name.clone())
    }
}

/// Attribute slots for the nodes of one tree.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Attributes {
    slots: HashMap<NodeId, Vec<Slot>>,
}

impl Attributes {
    pub fn new() -> Self {
        Self::default()
    }

    fn slots_mut(
        &mut self,
        schema: &Schema,
        tree: &DerivationTree,
        node: NodeId,
    ) -> &mut Vec<Slot> {
        let n = schema.decls_of(tree.symbol(node)).len();
        self.slots
            .entry(node)
            .or_insert_with(|| vec![Slot::Unset; n])
    }

    pub fn slot(&self, node: NodeId, slot: usize) -> &Slot {
        static UNSET: Slot = Slot::Unset;
        self.slots
            .get(&node)
            .and_then(|s| s.get(slot))
            .unwrap_or(&UNSET)
    }

    /// The slot holding `<node>.name`, or `None` if the symbol has no such attribute.
    pub fn get(
        &self,
        schema: &Schema,
        tree: &DerivationTree,
        node: NodeId,
        name: &str,
    ) -> Option<&Slot> {
        let slot = schema.slot(tree.symbol(node), name)?;
        Some(self.slot(node, slot))
    }

    /// Set value of `<node>.name`, if any.
    pub fn value(
        &self,
        schema: &Schema,
        tree: &DerivationTree,
        node: NodeId,
        name: &str,
    ) -> Option<&Value> {
        self.get(schema, tree, node, name)?.value()
    }

    pub(crate) fn put(
        &mut self,
        schema: &Schema,
        tree: &DerivationTree,
        node: NodeId,
        slot: usize,
        value: Slot,
    ) {
        self.slots_mut(schema, tree, node)[slot] = value;
    }

    fn lazy_slot(
        &self,
        schema: &Schema,
        tree: &DerivationTree,
        node: NodeId,
        name: &str,
    ) -> Result<(usize, usize), AttrError> {
        let sym = tree.symbol(node);
        let slot = schema
            .slot(sym, name)
            .ok_or_else(|| AttrError::Undeclared {
                symbol: schema.symbol_name(sym).to_string(),
                attr: name.to_string(),
            })?;
        let decl = schema.decls_of(sym)[slot];
        if schema.decl(decl).kind != AttrKind::StochasticLazy {
            let (symbol, attr) = schema.names(decl);
            return Err(AttrError::NotLazy { symbol, attr });
        }
        Ok((slot, decl))
    }

    /// Records a predetermined value for a stochastic lazy attribute.
    pub fn set_pending(
        &mut self,
        schema: &Schema,
        tree: &DerivationTree,
        node: NodeId,
        name: &str,
        value: Value,
    ) -> Result<(), AttrError> {
        let (slot, decl) = self.lazy_slot(schema, tree, node, name)?;
        let (symbol, attr) = schema.names(decl);
        let state = match self.slot(node, slot) {
            Slot::Unset => None,
            Slot::PendingLazy(_) => Some("pending"),
            Slot::Set(_) => Some("set"),
        };
        if let Some(state) = state {
            return Err(AttrError::LazyState {
                symbol,
                attr,
                state,
            });
        }
        if !value.fits(schema.decl(decl).domain) {
            return Err(AttrError::Domain {
                symbol,
                attr,
                value,
            });
        }
        self.put(schema, tree, node, slot, Slot::PendingLazy(value));
        Ok(())
    }

    /// Draws every bit of a lazy attribute independently, bit `i` being one
    /// with probability `p_one(i)`, records it as pending and returns the
    /// value with the log-probability of the draw.
    pub fn sample_lazy<R: Rng + ?Sized>(
        &mut self,
        schema: &Schema,
        tree: &DerivationTree,
        node: NodeId,
        name: &str,
        p_one: impl Fn(usize) -> f64,
        rng: &mut R,
    ) -> Result<(Value, f64), AttrError> {
        let (_, decl) = self.lazy_slot(schema, tree, node, name)?;
        let Domain::BitSet { cap } = schema.decl(decl).domain else {
            unreachable!("lazy attributes are bit sets")
        };
        let mut bits = 0u64;
        let mut logp = 0.0;
        for i in 0..cap {
            let p = p_one(i);
            if rng.gen::<f64>() < p {
                bits |= 1 << i;
                logp += p.ln();
            } else {
                logp += (1.0 - p).ln();
            }
        }
        let value = Value::Bits(bits);
        self.set_pending(schema, tree, node, name, value.clone())?;
        Ok((value, logp))
    }

    /// Promotes a pending lazy attribute once its synthesized value is known.
    pub fn lazy_link(
        &mut self,
        schema: &Schema,
        tree: &DerivationTree,
        node: NodeId,
        name: &str,
        synthesized: Value,
    ) -> Result<(), AttrError> {
        let (slot, decl) = self.lazy_slot(schema, tree, node, name)?;
        let (symbol, attr) = schema.names(decl);
        match self.slot(node, slot).clone() {
            Slot::PendingLazy(expected) if expected == synthesized => {
                self.put(schema, tree, node, slot, Slot::Set(synthesized));
                Ok(())
            }
            Slot::PendingLazy(expected) => Err(AttrError::LazyMismatch {
                symbol,
                attr,
                expected,
                actual: synthesized,
            }),
            Slot::Unset => Err(AttrError::LazyState {
                symbol,
                attr,
                state: "unset",
            }),
            Slot::Set(_) => Err(AttrError::LazyState {
                symbol,
                attr,
                state: "set",
            }),
        }
    }

    /// Number of set instances.
    pub fn set_count(&self) -> usize {
        self.slots
            .values()
            .flatten()
            .filter(|s| matches!(s, Slot::Set(_)))
            .count()
    }
}

/// A failed checking rule found during offline evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawViolation {
    pub rule: String,
    pub node: NodeId,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub attrs: Attributes,
    /// In evaluation order.
    pub violations: Vec<RawViolation>,
}

impl Evaluation {
    /// Violations sorted by position in the yield, then rule id.
    pub fn report(&self, grammar: &Grammar, tree: &DerivationTree) -> CheckReport {
        let offsets = tree.offsets(grammar);
        let mut violations: Vec<Violation> = self
            .violations
            .iter()
            .map(|v| Violation {
                rule: v.rule.clone(),
                location: offsets[v.node.index()],
                detail: v.detail.clone(),
            })
            .collect();
        violations.sort();
        CheckReport::from_violations(violations)
    }
}

/// Computes every attribute instance of a complete tree bottom-up in a
/// topological order of its dependency graph.
pub fn evaluate_offline(
    schema: &Schema,
    grammar: &Grammar,
    tree: &DerivationTree,
    order: EvalOrder,
) -> Result<Evaluation, AttrError> {
    if !tree.is_complete(grammar) {
        return Err(AttrError::Incomplete);
    }
    let graph = build_dependency_graph(schema, tree)?;
    let topo = graph.topological_order(order).ok_or(AttrError::Circular)?;
    let mut attrs = Attributes::new();
    let mut violations = Vec::new();
    for v in topo {
        let (node, slot) = graph.vertices[v];
        let decl = schema.decls_of(tree.symbol(node))[slot];
        let (symbol, attr) = schema.names(decl);
        let value = if let Some(value) = graph.initial(v) {
            value.clone()
        } else {
            let Some((rule, deps)) = graph.definition(v) else {
                return Err(AttrError::Unevaluated {
                    symbol,
                    attr,
                    node: node.0,
                });
            };
            let inputs: Vec<&Value> = deps
                .iter()
                .map(|&d| {
                    let (n, s) = graph.vertices[d];
                    attrs
                        .slot(n, s)
                        .value()
                        .expect("dependency evaluated first")
                })
                .collect();
            let rule = &schema.rules()[*rule];
            let applied = rule.func.apply(&inputs).map_err(|e| AttrError::Type {
                symbol: symbol.clone(),
                attr: attr.clone(),
                message: e.0,
            })?;
            if let (RuleFn::Check { id, .. }, Some(detail)) = (&rule.func, applied.failed) {
                violations.push(RawViolation {
                    rule: id.clone(),
                    node,
                    detail,
                });
            }
            applied.value
        };
        if !value.fits(schema.decl(decl).domain) {
            return Err(AttrError::Domain {
                symbol,
                attr,
                value,
            });
        }
        attrs.put(schema, tree, node, slot, Slot::Set(value));
    }
    Ok(Evaluation { attrs, violations })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Violation {
    /// Character offset of the offending construct in the input.
    pub location: usize,
    pub rule: String,
    pub detail: String,
}

/// Outcome of an offline semantic check.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn from_violations(violations: Vec<Violation>) -> Self {
        CheckReport {
            valid: violations.is_empty(),
            violations,
        }
    }

    pub fn ok() -> Self {
        Self::from_violations(Vec::new())
    }

    pub fn has(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    pub fn first(&self) -> Option<&Violation> {
        self.violations.first()
    }
}
