use super::{
    masked_logp, BudgetMode, DecodeConfig, DecodeError, DecodeTrace, MaskCtx, Semantics, TraceStep,
};
use crate::attr::{Attributes, Domain, Slot, Value};
use crate::grammar::{DerivationTree, NodeId};
use crate::scorer::{Emission, LazyQuery, RuleQuery, RuleScorer, ScorerContext};

/// Allowed alternatives of the node about to be expanded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleMask {
    pub node: NodeId,
    /// Indexed like `Grammar::alternatives(lhs)`.
    pub allowed: Vec<bool>,
}

/// The next choice a session is waiting for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Lazy {
        node: NodeId,
        attr: &'static str,
        bit: usize,
        allowed: [bool; 2],
    },
    Rule(RuleMask),
    /// The tree is complete.
    Done,
    /// The step budget ran out with open nodes left.
    Exhausted,
}

#[derive(Debug, Clone, Copy)]
enum Work {
    Expand(NodeId),
    Exit(NodeId),
}

#[derive(Debug, Clone)]
struct LazyProgress {
    node: NodeId,
    attr: &'static str,
    cap: usize,
    bit: usize,
    bits: u64,
}

/// A decode in progress. Cloning it forks the decode.
pub struct Session<'a, S: Semantics> {
    sem: &'a S,
    scorer: &'a dyn RuleScorer,
    cfg: DecodeConfig,
    tree: DerivationTree,
    env: S::Env,
    attrs: Attributes,
    stack: Vec<Work>,
    lazy: Option<LazyProgress>,
    pending: Option<Decision>,
    context: ScorerContext,
    trace: DecodeTrace,
}

impl<S: Semantics> Clone for Session<'_, S> {
    fn clone(&self) -> Self {
        Session {
            sem: self.sem,
            scorer: self.scorer,
            cfg: self.cfg,
            tree: self.tree.clone(),
            env: self.env.clone(),
            attrs: self.attrs.clone(),
            stack: self.stack.clone(),
            lazy: self.lazy.clone(),
            pending: self.pending.clone(),
            context: self.context,
            trace: self.trace.clone(),
        }
    }
}

impl<'a, S: Semantics> Session<'a, S> {
    pub fn new(sem: &'a S, scorer: &'a dyn RuleScorer, cfg: DecodeConfig) -> Self {
        let tree = DerivationTree::new(sem.grammar());
        let root = tree.root();
        Session {
            sem,
            scorer,
            cfg,
            tree,
            env: sem.start(),
            attrs: Attributes::new(),
            stack: vec![Work::Expand(root)],
            lazy: None,
            pending: None,
            context: scorer.start_context(),
            trace: DecodeTrace::default(),
        }
    }

    pub fn tree(&self) -> &DerivationTree {
        &self.tree
    }

    pub fn env(&self) -> &S::Env {
        &self.env
    }

    pub fn attrs(&self) -> &Attributes {
        &self.attrs
    }

    pub fn trace(&self) -> &DecodeTrace {
        &self.trace
    }

    pub fn steps(&self) -> usize {
        self.tree.rule_count()
    }

    pub(crate) fn finish(self, complete: bool) -> super::Decoded {
        super::Decoded {
            tree: self.tree,
            trace: self.trace,
            complete,
        }
    }

    fn pending_nodes(&self) -> Vec<NodeId> {
        // Skip the top item, which is the node being decided.
        self.stack
            .iter()
            .rev()
            .skip(1)
            .filter_map(|w| match w {
                Work::Expand(n) => Some(*n),
                Work::Exit(_) => None,
            })
            .collect()
    }

    fn remaining(&self) -> Option<usize> {
        match self.cfg.mode {
            BudgetMode::Strict => Some(self.cfg.max_steps.saturating_sub(self.steps())),
            BudgetMode::Truncate => None,
        }
    }

    /// Node the current decision is about (root if none).
    pub fn node_for_error(&self) -> NodeId {
        match &self.pending {
            Some(Decision::Lazy { node, .. }) => *node,
            Some(Decision::Rule(m)) => m.node,
            _ => self.tree.root(),
        }
    }

    /// Mask for the node about to be expanded, if the next decision is a rule.
    pub fn compute_mask(&mut self) -> Result<Option<RuleMask>, DecodeError> {
        Ok(match self.next_decision()? {
            Decision::Rule(m) => Some(m),
            _ => None,
        })
    }

    /// Advances past completed subtrees and returns the next choice.
    pub fn next_decision(&mut self) -> Result<Decision, DecodeError> {
        if let Some(d) = &self.pending {
            return Ok(d.clone());
        }
        let decision = loop {
            let Some(&top) = self.stack.last() else {
                break Decision::Done;
            };
            match top {
                Work::Exit(node) => {
                    self.stack.pop();
                    if let Some(link) = self.sem.finish_node(&mut self.env, &self.tree, node) {
                        let schema = self.sem.schema();
                        self.attrs
                            .lazy_link(schema, &self.tree, link.node, link.attr, link.value)?;
                    }
                }
                Work::Expand(node) => {
                    if self.lazy.is_none() {
                        if let Some(attr) = self.sem.lazy_attr(&self.tree, node) {
                            let schema = self.sem.schema();
                            if matches!(
                                self.attrs.get(schema, &self.tree, node, attr),
                                Some(Slot::Unset)
                            ) {
                                let slot =
                                    schema.slot(self.tree.symbol(node), attr).expect("declared");
                                let decl = schema.decls_of(self.tree.symbol(node))[slot];
                                let Domain::BitSet { cap } = schema.decl(decl).domain else {
                                    unreachable!("lazy attributes are bit sets")
                                };
                                self.lazy = Some(LazyProgress {
                                    node,
                                    attr,
                                    cap,
                                    bit: 0,
                                    bits: 0,
                                });
                            }
                        }
                    }
                    if let Some(lp) = &self.lazy {
                        let pending = self.pending_nodes();
                        let ctx = MaskCtx {
                            pending: &pending,
                            remaining: self.remaining(),
                        };
                        let allowed = self
                            .sem
                            .lazy_bit_options(&self.env, &self.tree, node, lp.bit, lp.bits, &ctx);
                        if !allowed[0] && !allowed[1] {
                            return Err(self.dead_end(node));
                        }
                        break Decision::Lazy {
                            node,
                            attr: lp.attr,
                            bit: lp.bit,
                            allowed,
                        };
                    }
                    if self.steps() >= self.cfg.max_steps {
                        break Decision::Exhausted;
                    }
                    let pending = self.pending_nodes();
                    let ctx = MaskCtx {
                        pending: &pending,
                        remaining: self.remaining(),
                    };
                    let allowed = self.sem.rule_options(&self.env, &self.tree, node, &ctx);
                    if !allowed.iter().any(|&a| a) {
                        return Err(self.dead_end(node));
                    }
                    break Decision::Rule(RuleMask { node, allowed });
                }
            }
        };
        self.pending = Some(decision.clone());
        Ok(decision)
    }

    fn dead_end(&self, node: NodeId) -> DecodeError {
        DecodeError::DeadEnd {
            node: node.0,
            nonterminal: self
                .sem
                .grammar()
                .symbol(self.tree.symbol(node))
                .name
                .clone(),
        }
    }

    fn lazy_query(&self) -> LazyQuery {
        let lp = self.lazy.as_ref().expect("lazy decision pending");
        LazyQuery {
            owner: self.tree.symbol(lp.node),
            bit: lp.bit,
            depth: self.tree.node(lp.node).depth,
            context: self.context,
        }
    }

    /// Scorer probability that the pending lazy bit is one.
    pub fn lazy_prob(&self) -> f64 {
        self.scorer.lazy_prob(&self.lazy_query())
    }

    fn rule_query(&self, node: NodeId) -> RuleQuery {
        let n = self.tree.node(node);
        RuleQuery {
            nonterminal: n.symbol,
            depth: n.depth,
            parent_production: n.parent.and_then(|p| self.tree.production(p)),
            alternatives: self.sem.grammar().alternatives(n.symbol).len(),
            context: self.context,
        }
    }

    /// Scorer weights for the pending rule decision, validated.
    pub fn rule_weights(&self) -> Result<Vec<f64>, DecodeError> {
        let Some(Decision::Rule(mask)) = &self.pending else {
            panic!("no rule decision pending");
        };
        let q = self.rule_query(mask.node);
        let w = self.scorer.rule_weights(&q);
        let grammar = self.sem.grammar();
        if w.len() != q.alternatives {
            return Err(DecodeError::BadWeight {
                nonterminal: grammar.symbol(q.nonterminal).name.clone(),
                weight: f64::NAN,
            });
        }
        if let Some(&bad) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(DecodeError::BadWeight {
                nonterminal: grammar.symbol(q.nonterminal).name.clone(),
                weight: bad,
            });
        }
        Ok(w)
    }

    /// Takes the pending lazy bit decision.
    pub fn choose_lazy(&mut self, value: bool) -> Result<(), DecodeError> {
        let Some(Decision::Lazy {
            node,
            bit,
            allowed,
            attr,
        }) = self.pending.take()
        else {
            panic!("no lazy decision pending");
        };
        assert!(allowed[value as usize], "chosen lazy value is masked");
        let p = self.lazy_prob();
        if !(0.0..=1.0).contains(&p) || !p.is_finite() {
            return Err(DecodeError::BadProbability(p));
        }
        let logp = masked_logp(&[1.0 - p, p], &allowed, value as usize);
        if !logp.is_finite() {
            return Err(DecodeError::ZeroMass { node: node.0 });
        }
        let depth = self.tree.node(node).depth;
        self.trace.steps.push(TraceStep::Lazy {
            node: node.0,
            owner: self.tree.symbol(node).0,
            attr: attr.to_string(),
            bit,
            value,
            allowed,
            depth,
            logp,
        });
        self.context = self
            .scorer
            .transition(self.context, &Emission::Lazy { bit, value });
        let lp = self.lazy.as_mut().expect("lazy in progress");
        if value {
            lp.bits |= 1 << bit;
        }
        lp.bit += 1;
        if lp.bit == lp.cap {
            let lp = self.lazy.take().expect("lazy in progress");
            self.attrs.set_pending(
                self.sem.schema(),
                &self.tree,
                lp.node,
                lp.attr,
                Value::Bits(lp.bits),
            )?;
            self.sem
                .record_lazy(&mut self.env, &self.tree, lp.node, lp.bits);
        }
        Ok(())
    }

    /// Takes the pending rule decision with the `alternative`-th production.
    pub fn choose_rule(&mut self, alternative: usize) -> Result<(), DecodeError> {
        let Some(Decision::Rule(mask)) = self.pending.clone() else {
            panic!("no rule decision pending");
        };
        assert!(mask.allowed[alternative], "chosen alternative is masked");
        let w = self.rule_weights()?;
        let logp = masked_logp(&w, &mask.allowed, alternative);
        if !logp.is_finite() {
            return Err(DecodeError::ZeroMass { node: mask.node.0 });
        }
        self.pending = None;
        let grammar = self.sem.grammar();
        let node = mask.node;
        let production = grammar.alternatives(self.tree.symbol(node))[alternative];
        let depth = self.tree.node(node).depth;
        let parent_production = self.tree.parent(node).and_then(|p| self.tree.production(p));
        self.trace.steps.push(TraceStep::Rule {
            node: node.0,
            production,
            alternative,
            allowed: mask.allowed,
            depth,
            parent_production,
            logp,
        });
        self.context = self
            .scorer
            .transition(self.context, &Emission::Rule { production, depth });

        self.stack.pop();
        self.tree.expand(grammar, node, production);
        self.sem
            .apply_rule(&mut self.env, &self.tree, node, alternative);
        self.stack.push(Work::Exit(node));
        for &c in self.tree.children(node).iter().rev() {
            if !grammar.symbol(self.tree.symbol(c)).is_terminal() {
                self.stack.push(Work::Expand(c));
            }
        }
        Ok(())
    }

    /// Completes the tree taking the first allowed rule and preferring zero
    /// for lazy bits. Returns whether it completed within the budget.
    pub fn complete_greedily(&mut self) -> Result<bool, DecodeError> {
        loop {
            match self.next_decision()? {
                Decision::Done => return Ok(true),
                Decision::Exhausted => return Ok(false),
                Decision::Lazy { allowed, .. } => self.choose_lazy(!allowed[0])?,
                Decision::Rule(m) => {
                    let first = m
                        .allowed
                        .iter()
                        .position(|&a| a)
                        .expect("some rule allowed");
                    self.choose_rule(first)?;
                }
            }
        }
    }
}
