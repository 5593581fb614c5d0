use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Emission, LazyQuery, RuleQuery, RuleScorer, ScorerContext};
use crate::decoder::{DecodeTrace, TraceStep};
use crate::grammar::{Grammar, SymbolId};

pub const DEFAULT_ALPHA: f64 = 0.1;
/// Depths 0..=7 get their own bucket, everything deeper shares the last.
pub const DEPTH_BUCKETS: usize = 9;
const FORMAT_VERSION: u32 = 1;

pub fn depth_bucket(depth: usize) -> u8 {
    depth.min(DEPTH_BUCKETS - 1) as u8
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model was trained for grammar {expected} but the grammar hash is {actual}")]
    GrammarMismatch { expected: String, actual: String },
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error("model file is malformed: {0}")]
    Format(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("smoothing constant must be positive and finite, got {0}")]
    Alpha(f64),
}

type RuleKey = (u32, Option<u32>, u8);
type LazyKey = (u32, u32, u8);

/// Additively smoothed counts of alternatives keyed by (nonterminal, parent
/// production, depth bucket), and of lazy bits keyed by (owner, bit, depth
/// bucket).
#[derive(Debug, Clone)]
pub struct CountModel {
    alpha: f64,
    grammar_hash: String,
    arity: Vec<usize>,
    rules: HashMap<RuleKey, Vec<u64>>,
    lazy: HashMap<LazyKey, [u64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct RuleEntry {
    nonterminal: u32,
    parent: Option<u32>,
    bucket: u8,
    counts: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct LazyEntry {
    owner: u32,
    bit: u32,
    bucket: u8,
    zeros: u64,
    ones: u64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    grammar_hash: String,
    alpha: f64,
    arity: Vec<usize>,
    rules: Vec<RuleEntry>,
    lazy: Vec<LazyEntry>,
}

impl CountModel {
    pub fn new(grammar: &Grammar, alpha: f64) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(ModelError::Alpha(alpha));
        }
        let arity = (0..grammar.symbols().len())
            .map(|s| grammar.alternatives(SymbolId(s as u32)).len())
            .collect();
        Ok(CountModel {
            alpha,
            grammar_hash: grammar.hash().to_string(),
            arity,
            rules: HashMap::new(),
            lazy: HashMap::new(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn grammar_hash(&self) -> &str {
        &self.grammar_hash
    }

    /// Adds the decisions of one teacher-forced trace.
    pub fn observe(&mut self, grammar: &Grammar, trace: &DecodeTrace) {
        for step in &trace.steps {
            match step {
                TraceStep::Rule {
                    production,
                    alternative,
                    depth,
                    parent_production,
                    ..
                } => {
                    let nt = grammar.production(*production).lhs;
                    let key = (
                        nt.0,
                        parent_production.map(|p| p as u32),
                        depth_bucket(*depth),
                    );
                    let n = self.arity[nt.index()];
                    self.rules.entry(key).or_insert_with(|| vec![0; n])[*alternative] += 1;
                }
                TraceStep::Lazy {
                    owner,
                    bit,
                    value,
                    depth,
                    ..
                } => {
                    let key = (*owner, *bit as u32, depth_bucket(*depth));
                    self.lazy.entry(key).or_default()[*value as usize] += 1;
                }
            }
        }
    }

    pub fn train<'a>(
        &mut self,
        grammar: &Grammar,
        traces: impl IntoIterator<Item = &'a DecodeTrace>,
    ) {
        for t in traces {
            self.observe(grammar, t);
        }
    }

    /// Raw count of `alternative` under a key, for inspection.
    pub fn count(
        &self,
        nonterminal: SymbolId,
        parent: Option<usize>,
        depth: usize,
        alternative: usize,
    ) -> u64 {
        self.rules
            .get(&(nonterminal.0, parent.map(|p| p as u32), depth_bucket(depth)))
            .map_or(0, |c| c[alternative])
    }

    pub fn to_json(&self) -> String {
        let mut rules: Vec<RuleEntry> = self
            .rules
            .iter()
            .map(|(&(nonterminal, parent, bucket), counts)| RuleEntry {
                nonterminal,
                parent,
                bucket,
                counts: counts.clone(),
            })
            .collect();
        rules.sort_by_key(|e| (e.nonterminal, e.parent, e.bucket));
        let mut lazy: Vec<LazyEntry> = self
            .lazy
            .iter()
            .map(|(&(owner, bit, bucket), c)| LazyEntry {
                owner,
                bit,
                bucket,
                zeros: c[0],
                ones: c[1],
            })
            .collect();
        lazy.sort_by_key(|e| (e.owner, e.bit, e.bucket));
        let file = ModelFile {
            version: FORMAT_VERSION,
            grammar_hash: self.grammar_hash.clone(),
            alpha: self.alpha,
            arity: self.arity.clone(),
            rules,
            lazy,
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    /// Parses a model and checks it was trained for `grammar`.
    pub fn from_json(grammar: &Grammar, text: &str) -> Result<Self, ModelError> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(ModelError::Version(file.version));
        }
        if file.grammar_hash != grammar.hash() {
            return Err(ModelError::GrammarMismatch {
                expected: file.grammar_hash,
                actual: grammar.hash().to_string(),
            });
        }
        let mut model = CountModel::new(grammar, file.alpha)?;
        for e in file.rules {
            model
                .rules
                .insert((e.nonterminal, e.parent, e.bucket), e.counts);
        }
        for e in file.lazy {
            model
                .lazy
                .insert((e.owner, e.bit, e.bucket), [e.zeros, e.ones]);
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(grammar: &Grammar, path: &Path) -> Result<Self, ModelError> {
        Self::from_json(grammar, &std::fs::read_to_string(path)?)
    }
}

impl RuleScorer for CountModel {
    fn start_context(&self) -> ScorerContext {
        ScorerContext::Unit
    }

    fn rule_weights(&self, q: &RuleQuery) -> Vec<f64> {
        let key = (
            q.nonterminal.0,
            q.parent_production.map(|p| p as u32),
            depth_bucket(q.depth),
        );
        match self.rules.get(&key) {
            Some(counts) => counts.iter().map(|&c| c as f64 + self.alpha).collect(),
            None => vec![self.alpha; q.alternatives],
        }
    }

    fn lazy_prob(&self, q: &LazyQuery) -> f64 {
        let c = self
            .lazy
            .get(&(q.owner.0, q.bit as u32, depth_bucket(q.depth)))
            .copied()
            .unwrap_or_default();
        (c[1] as f64 + self.alpha) / ((c[0] + c[1]) as f64 + 2.0 * self.alpha)
    }

    fn transition(&self, context: ScorerContext, emitted: &Emission) -> ScorerContext {
        match *emitted {
            Emission::Rule { production, depth } => ScorerContext::Last {
                production,
                bucket: depth_bucket(depth + 1),
            },
            Emission::Lazy { .. } => context,
        }
    }
}
