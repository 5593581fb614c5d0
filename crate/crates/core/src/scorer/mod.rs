//! Conditional distributions over productions and lazy-attribute bits.

mod count;

pub use count::{CountModel, ModelError, DEFAULT_ALPHA, DEPTH_BUCKETS};

use crate::grammar::SymbolId;

/// Opaque per-decode state threaded through the scorer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
pub enum ScorerContext {
    #[default]
    Unit,
    /// Key bookkeeping: last emitted production and the depth bucket below it.
    Last { production: usize, bucket: u8 },
}

/// What the decoder asks the scorer about a nonterminal.
#[derive(Debug, Clone, Copy)]
pub struct RuleQuery {
    pub nonterminal: SymbolId,
    pub depth: usize,
    pub parent_production: Option<usize>,
    pub alternatives: usize,
    pub context: ScorerContext,
}

/// What the decoder asks about one bit of a lazy attribute.
#[derive(Debug, Clone, Copy)]
pub struct LazyQuery {
    pub owner: SymbolId,
    pub bit: usize,
    pub depth: usize,
    pub context: ScorerContext,
}

/// Something the decoder emitted.
#[derive(Debug, Clone, Copy)]
pub enum Emission {
    Rule { production: usize, depth: usize },
    Lazy { bit: usize, value: bool },
}

/// A model of `p(rule | context, node, tree)` and of the Bernoulli head
/// for lazy bits. Weights need not be normalized but must be positive and
/// finite.
pub trait RuleScorer: Send + Sync {
    fn start_context(&self) -> ScorerContext {
        ScorerContext::Unit
    }

    /// Unnormalized weights over the alternatives of `query.nonterminal`.
    fn rule_weights(&self, query: &RuleQuery) -> Vec<f64>;

    /// Probability that the bit is one.
    fn lazy_prob(&self, query: &LazyQuery) -> f64;

    fn transition(&self, context: ScorerContext, _emitted: &Emission) -> ScorerContext {
        context
    }
}

/// Equal weight for every alternative, fair coins for lazy bits.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl RuleScorer for Uniform {
    fn rule_weights(&self, query: &RuleQuery) -> Vec<f64> {
        vec![1.0; query.alternatives]
    }

    fn lazy_prob(&self, _query: &LazyQuery) -> f64 {
        0.5
    }
}

/// Either shipped scorer, chosen at runtime.
#[derive(Debug, Clone)]
pub enum AnyScorer {
    Uniform(Uniform),
    Counts(Box<CountModel>),
}

impl RuleScorer for AnyScorer {
    fn start_context(&self) -> ScorerContext {
        match self {
            AnyScorer::Uniform(s) => s.start_context(),
            AnyScorer::Counts(s) => s.start_context(),
        }
    }

    fn rule_weights(&self, query: &RuleQuery) -> Vec<f64> {
        match self {
            AnyScorer::Uniform(s) => s.rule_weights(query),
            AnyScorer::Counts(s) => s.rule_weights(query),
        }
    }

    fn lazy_prob(&self, query: &LazyQuery) -> f64 {
        match self {
            AnyScorer::Uniform(s) => s.lazy_prob(query),
            AnyScorer::Counts(s) => s.lazy_prob(query),
        }
    }

    fn transition(&self, context: ScorerContext, emitted: &Emission) -> ScorerContext {
        match self {
            AnyScorer::Uniform(s) => s.transition(context, emitted),
            AnyScorer::Counts(s) => s.transition(context, emitted),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammars::GrammarId;

    #[test]
    fn uniform_weights() {
        let g = GrammarId::Toy.load_builtin();
        let q = |name: &str| RuleQuery {
            nonterminal: g.nonterminal(name).unwrap(),
            depth: 1,
            parent_production: Some(0),
            alternatives: g.alternatives(g.nonterminal(name).unwrap()).len(),
            context: ScorerContext::Unit,
        };
        assert_eq!(Uniform.rule_weights(&q("bond")), vec![1.0; 3]);
        assert_eq!(Uniform.rule_weights(&q("digit")), vec![1.0; 9]);
        let lq = LazyQuery {
            owner: g.start(),
            bit: 0,
            depth: 0,
            context: ScorerContext::Unit,
        };
        assert_eq!(Uniform.lazy_prob(&lq), 0.5);
        assert_eq!(Uniform.start_context(), ScorerContext::Unit);
    }
}
