//! Top-down constrained decoding, teacher-forced likelihood and validity
//! estimation.
//!
//! Decoding always expands the leftmost open nonterminal, so the sequence
//! of applied productions is the pre-order encoding of the result. Before a
//! node is expanded, its stochastic lazy attribute (if the frontend declares
//! one) is drawn bit by bit; then a production is drawn from the scorer's
//! weights restricted to the alternatives the frontend's [`Semantics`]
//! allows. A step of the budget is one production.

mod session;
mod trace;

pub use session::{Decision, RuleMask, Session};
pub use trace::{DecodeTrace, TraceStep};

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::attr::{AttrError, CheckReport, Schema, Value};
use crate::grammar::{DerivationTree, Grammar, NodeId};
use crate::rng::item_rng;
use crate::scorer::RuleScorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum BudgetMode {
    /// Masks also guarantee completion within the step budget.
    #[default]
    #[serde(rename = "strict-budget")]
    Strict,
    /// Masks ignore the budget; decodes that run out are incomplete.
    #[serde(rename = "paper-truncate")]
    Truncate,
}

impl fmt::Display for BudgetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BudgetMode::Strict => "strict-budget",
            BudgetMode::Truncate => "paper-truncate",
        })
    }
}

impl FromStr for BudgetMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict-budget" | "strict" => Ok(BudgetMode::Strict),
            "paper-truncate" | "truncate" => Ok(BudgetMode::Truncate),
            other => Err(format!(
                "unknown budget mode `{other}` (expected strict-budget or paper-truncate)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeConfig {
    pub max_steps: usize,
    pub mode: BudgetMode,
}

impl DecodeConfig {
    pub fn strict(max_steps: usize) -> Self {
        DecodeConfig {
            max_steps,
            mode: BudgetMode::Strict,
        }
    }

    pub fn truncate(max_steps: usize) -> Self {
        DecodeConfig {
            max_steps,
            mode: BudgetMode::Truncate,
        }
    }
}

/// Information a frontend needs to decide which choices are still feasible.
#[derive(Debug, Clone, Copy)]
pub struct MaskCtx<'a> {
    /// Open nodes after the one being decided, in expansion order.
    pub pending: &'a [NodeId],
    /// Productions left in the budget, or `None` when the budget is not enforced.
    pub remaining: Option<usize>,
}

impl MaskCtx<'_> {
    /// Whether `need` more productions fit in the budget.
    pub fn fits(&self, need: usize) -> bool {
        self.remaining.is_none_or(|r| need <= r)
    }
}

/// A request to bind a pending lazy attribute to its synthesized value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinkRequest {
    pub node: NodeId,
    pub attr: &'static str,
    pub value: Value,
}

/// Semantic hooks of a frontend. `Env` carries whatever inherited state the
/// frontend threads through generation; it is cloned with the session.
pub trait Semantics: Sync {
    type Env: Clone + Send;

    fn grammar(&self) -> &Grammar;

    fn schema(&self) -> &Schema;

    fn start(&self) -> Self::Env;

    /// Name of the stochastic lazy attribute introduced when `node` is expanded.
    fn lazy_attr(&self, _tree: &DerivationTree, _node: NodeId) -> Option<&'static str> {
        None
    }

    /// Which values bit `bit` may take given the lower bits already drawn.
    fn lazy_bit_options(
        &self,
        _env: &Self::Env,
        _tree: &DerivationTree,
        _node: NodeId,
        _bit: usize,
        _decided: u64,
        _ctx: &MaskCtx,
    ) -> [bool; 2] {
        [true, true]
    }

    /// Called once all bits of the lazy attribute at `node` are drawn.
    fn record_lazy(
        &self,
        _env: &mut Self::Env,
        _tree: &DerivationTree,
        _node: NodeId,
        _value: u64,
    ) {
    }

    /// Allowed alternatives (in `alternatives(lhs)` order) for the open `node`.
    fn rule_options(
        &self,
        env: &Self::Env,
        tree: &DerivationTree,
        node: NodeId,
        ctx: &MaskCtx,
    ) -> Vec<bool>;

    /// Called right after `node` was expanded with its `alternative`.
    fn apply_rule(
        &self,
        _env: &mut Self::Env,
        _tree: &DerivationTree,
        _node: NodeId,
        _alternative: usize,
    ) {
    }

    /// Called when the subtree under `node` is complete.
    fn finish_node(
        &self,
        _env: &mut Self::Env,
        _tree: &DerivationTree,
        _node: NodeId,
    ) -> Option<LinkRequest> {
        None
    }

    /// Value of the lazy attribute at `node` implied by a complete tree.
    fn implied_lazy(&self, _tree: &DerivationTree, _node: NodeId) -> u64 {
        0
    }

    /// Independent offline checker for complete trees.
    fn check(&self, tree: &DerivationTree) -> CheckReport;
}

/// Fewest productions that complete `nodes` ignoring semantics.
pub fn grammar_cost(grammar: &Grammar, tree: &DerivationTree, nodes: &[NodeId]) -> usize {
    nodes
        .iter()
        .map(|&n| grammar.min_steps(tree.symbol(n)))
        .sum()
}

/// Budget-only mask: an alternative is allowed iff its cheapest completion,
/// plus the cheapest completion of the rest of the frontier, fits.
pub fn budget_mask(
    grammar: &Grammar,
    tree: &DerivationTree,
    node: NodeId,
    ctx: &MaskCtx,
) -> Vec<bool> {
    let rest = grammar_cost(grammar, tree, ctx.pending);
    grammar
        .alternatives(tree.symbol(node))
        .iter()
        .map(|&p| {
            let own: usize = grammar
                .production(p)
                .rhs
                .iter()
                .map(|&s| grammar.min_steps(s))
                .sum();
            ctx.fits(1 + own + rest)
        })
        .collect()
}

/// A grammar without semantics.
pub struct Plain<'g> {
    pub grammar: &'g Grammar,
    pub schema: Schema,
}

impl<'g> Plain<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        Plain {
            grammar,
            schema: Schema::new(grammar),
        }
    }
}

impl Semantics for Plain<'_> {
    type Env = ();

    fn grammar(&self) -> &Grammar {
        self.grammar
    }

    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn start(&self) {}

    fn rule_options(
        &self,
        _env: &(),
        tree: &DerivationTree,
        node: NodeId,
        ctx: &MaskCtx,
    ) -> Vec<bool> {
        budget_mask(self.grammar, tree, node, ctx)
    }

    fn check(&self, _tree: &DerivationTree) -> CheckReport {
        CheckReport::ok()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("scorer returned an invalid weight {weight} for <{nonterminal}>")]
    BadWeight { nonterminal: String, weight: f64 },
    #[error("scorer returned an invalid lazy probability {0}")]
    BadProbability(f64),
    #[error("every allowed choice at node {node} has zero weight")]
    ZeroMass { node: u32 },
    #[error("no choice is allowed at node {node} (<{nonterminal}>)")]
    DeadEnd { node: u32, nonterminal: String },
    #[error("lazy linking failed: {0}")]
    Link(#[from] AttrError),
    #[error("tree to score is incomplete")]
    IncompleteTarget,
}

/// Result of one decode.
#[derive(Debug, Clone)]
pub struct Decoded {
    pub tree: DerivationTree,
    pub trace: DecodeTrace,
    /// False when the step budget ran out first.
    pub complete: bool,
}

impl Decoded {
    pub fn logp(&self) -> f64 {
        self.trace.total_logp()
    }

    pub fn steps(&self) -> usize {
        self.tree.rule_count()
    }
}

/// Samples one tree.
pub fn gen_tree<S: Semantics, R: Rng + ?Sized>(
    sem: &S,
    scorer: &dyn RuleScorer,
    rng: &mut R,
    cfg: DecodeConfig,
) -> Result<Decoded, DecodeError> {
    let mut session = Session::new(sem, scorer, cfg);
    loop {
        match session.next_decision()? {
            Decision::Done => return Ok(session.finish(true)),
            Decision::Exhausted => return Ok(session.finish(false)),
            Decision::Lazy { allowed, .. } => {
                let p = session.lazy_prob();
                let choice = sample(&[1.0 - p, p], &allowed, rng, session.node_for_error())?;
                session.choose_lazy(choice == 1)?;
            }
            Decision::Rule(mask) => {
                let w = session.rule_weights()?;
                let choice = sample(&w, &mask.allowed, rng, session.node_for_error())?;
                session.choose_rule(choice)?;
            }
        }
    }
}

fn sample<R: Rng + ?Sized>(
    weights: &[f64],
    allowed: &[bool],
    rng: &mut R,
    node: NodeId,
) -> Result<usize, DecodeError> {
    let total: f64 = weights
        .iter()
        .zip(allowed)
        .filter(|(_, &a)| a)
        .map(|(w, _)| w)
        .sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(DecodeError::ZeroMass { node: node.0 });
    }
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (i, (&w, &a)) in weights.iter().zip(allowed).enumerate() {
        if !a || w <= 0.0 {
            continue;
        }
        last = Some(i);
        if u < w {
            return Ok(i);
        }
        u -= w;
    }
    Ok(last.expect("positive total implies an allowed choice"))
}

/// `ln p(choice)` after masking and renormalizing.
pub(crate) fn masked_logp(weights: &[f64], allowed: &[bool], choice: usize) -> f64 {
    if allowed.iter().filter(|&&a| a).count() == 1 {
        return 0.0;
    }
    let total: f64 = weights
        .iter()
        .zip(allowed)
        .filter(|(_, &a)| a)
        .map(|(w, _)| w)
        .sum();
    weights[choice].ln() - total.ln()
}

/// Where teacher forcing hit a masked choice.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Blocked {
    /// Index into the trace of the step that could not be taken.
    pub step: usize,
    /// Node of the scored tree.
    pub node: u32,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Likelihood {
    /// `-inf` when `blocked` is set.
    pub logp: f64,
    pub trace: DecodeTrace,
    pub blocked: Option<Blocked>,
}

/// Teacher-forced log-probability of a complete tree: the decoder is
/// replayed with every choice fixed to the one the tree implies.
pub fn log_likelihood<S: Semantics>(
    sem: &S,
    scorer: &dyn RuleScorer,
    target: &DerivationTree,
    cfg: DecodeConfig,
) -> Result<Likelihood, DecodeError> {
    let grammar = sem.grammar();
    if !target.is_complete(grammar) {
        return Err(DecodeError::IncompleteTarget);
    }
    let mut session = Session::new(sem, scorer, cfg);
    let mut map: Vec<NodeId> = vec![target.root()];
    let blocked = |session: &Session<S>, node: NodeId, reason: String| Likelihood {
        logp: f64::NEG_INFINITY,
        trace: session.trace().clone(),
        blocked: Some(Blocked {
            step: session.trace().steps.len(),
            node: node.0,
            reason,
        }),
    };
    loop {
        match session.next_decision()? {
            Decision::Done => {
                let trace = session.trace().clone();
                return Ok(Likelihood {
                    logp: trace.total_logp(),
                    trace,
                    blocked: None,
                });
            }
            Decision::Exhausted => {
                let node = map[session.node_for_error().index()];
                return Ok(blocked(&session, node, "step budget exhausted".into()));
            }
            Decision::Lazy {
                node, bit, allowed, ..
            } => {
                let t = map[node.index()];
                let value = sem.implied_lazy(target, t) >> bit & 1 == 1;
                if !allowed[value as usize] {
                    let reason = format!("lazy bit {bit} = {} is masked", value as u8);
                    return Ok(blocked(&session, t, reason));
                }
                session.choose_lazy(value)?;
            }
            Decision::Rule(mask) => {
                let t = map[mask.node.index()];
                let production = target.production(t).expect("target is complete");
                let alt = grammar.alternative_index(production);
                if !mask.allowed[alt] {
                    let reason = format!(
                        "production `{}` is masked",
                        grammar.display_production(production)
                    );
                    return Ok(blocked(&session, t, reason));
                }
                session.choose_rule(alt)?;
                let ours = session.tree().children(mask.node);
                let theirs = target.children(t);
                map.resize(session.tree().len(), NodeId(0));
                for (a, b) in ours.iter().zip(theirs) {
                    map[a.index()] = *b;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub decodes: usize,
    pub completed: usize,
    pub valid: usize,
    /// Valid over all decodes.
    pub validity: f64,
    pub completion_rate: f64,
    /// Mean productions per decode, including incomplete ones.
    pub mean_steps: f64,
    /// Decodes that failed with an error (should be zero).
    pub errors: usize,
}

/// Runs `n_contexts * n_decodes` independent decodes and checks each
/// completed tree with the frontend's offline checker. Context `c`, decode
/// `d` uses the RNG stream derived from `(seed, c)` then `d`, so results do
/// not depend on scheduling.
pub fn estimate_validity<S: Semantics>(
    sem: &S,
    scorer: &dyn RuleScorer,
    n_contexts: usize,
    n_decodes: usize,
    seed: u64,
    cfg: DecodeConfig,
) -> ValidityReport {
    #[derive(Default)]
    struct Tally {
        completed: usize,
        valid: usize,
        steps: usize,
        errors: usize,
    }
    let tally = (0..n_contexts)
        .into_par_iter()
        .map(|c| {
            let ctx_seed = crate::rng::derive_seed(seed, c as u64);
            let mut t = Tally::default();
            for d in 0..n_decodes {
                let mut rng = item_rng(ctx_seed, d as u64);
                match gen_tree(sem, scorer, &mut rng, cfg) {
                    Ok(out) => {
                        t.steps += out.steps();
                        if out.complete {
                            t.completed += 1;
                            if sem.check(&out.tree).valid {
                                t.valid += 1;
                            }
                        }
                    }
                    Err(_) => t.errors += 1,
                }
            }
            t
        })
        .reduce(Tally::default, |a, b| Tally {
            completed: a.completed + b.completed,
            valid: a.valid + b.valid,
            steps: a.steps + b.steps,
            errors: a.errors + b.errors,
        });
    let n = n_contexts * n_decodes;
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    ValidityReport {
        decodes: n,
        completed: tally.completed,
        valid: tally.valid,
        validity: frac(tally.valid),
        completion_rate: frac(tally.completed),
        mean_steps: frac(tally.steps),
        errors: tally.errors,
    }
}

#[cfg(test)]
mod tests;
