use std::fs;
use std::path::Path;

use rand::RngCore;

use super::CliError;
use crate::attr::CheckReport;
use crate::decoder::{
    estimate_validity, gen_tree, log_likelihood, DecodeConfig, DecodeError, Decoded, Likelihood,
    Semantics, ValidityReport,
};
use crate::grammar::{DerivationTree, Grammar};
use crate::grammars::GrammarId;
use crate::program::{parse_program, CheckOptions, ProgramSemantics};
use crate::scorer::RuleScorer;
use crate::smiles::{parse_smiles, SmilesSemantics};
use crate::toy::{parse_toy, ToySemantics};

/// A grammar with its parser, checker and decoder hooks.
#[allow(clippy::large_enum_variant)]
pub enum Frontend {
    Program(ProgramSemantics),
    Smiles(SmilesSemantics),
    Toy(ToySemantics),
}

macro_rules! with_sem {
    ($fe:expr, $s:ident => $body:expr) => {
        match $fe {
            Frontend::Program($s) => $body,
            Frontend::Smiles($s) => $body,
            Frontend::Toy($s) => $body,
        }
    };
}

impl Frontend {
    pub fn builtin(id: GrammarId) -> Self {
        Self::from_grammar(id, id.load_builtin())
    }

    /// Loads the grammar of `id` from `dir` when given, else the shipped one.
    pub fn load(id: GrammarId, dir: Option<&Path>) -> Result<Self, CliError> {
        let Some(dir) = dir else {
            return Ok(Self::builtin(id));
        };
        let path = dir.join(id.file_name());
        let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
        let grammar = Grammar::load(&text).map_err(|source| CliError::Grammar {
            path: path.clone(),
            source,
        })?;
        // Layout may differ, but the decoders read meaning off production
        // indices, so the productions must match the shipped ones in order.
        let shipped = id.load_builtin();
        let n = shipped.productions().len().max(grammar.productions().len());
        let show = |g: &Grammar, i: usize| {
            if i < g.productions().len() {
                g.display_production(i)
            } else {
                "nothing".into()
            }
        };
        if let Some(i) = (0..n).find(|&i| show(&shipped, i) != show(&grammar, i)) {
            return Err(CliError::Incompatible {
                path,
                index: i,
                expected: show(&shipped, i),
                found: show(&grammar, i),
            });
        }
        Ok(Self::from_grammar(id, grammar))
    }

    fn from_grammar(id: GrammarId, g: Grammar) -> Self {
        match id {
            GrammarId::Program => {
                Frontend::Program(ProgramSemantics::new(g, CheckOptions::default()))
            }
            GrammarId::Smiles => Frontend::Smiles(SmilesSemantics::new(g)),
            GrammarId::Toy => Frontend::Toy(ToySemantics::new(g)),
        }
    }

    pub fn grammar(&self) -> &Grammar {
        with_sem!(self, s => s.grammar())
    }

    pub fn parse(&self, text: &str) -> Result<DerivationTree, String> {
        let g = self.grammar();
        match self {
            Frontend::Program(_) => parse_program(g, text).map_err(|e| e.to_string()),
            Frontend::Smiles(_) => parse_smiles(g, text).map_err(|e| e.to_string()),
            Frontend::Toy(_) => parse_toy(g, text).map_err(|e| e.to_string()),
        }
    }

    pub fn check(&self, tree: &DerivationTree) -> CheckReport {
        with_sem!(self, s => s.check(tree))
    }

    pub fn sample(
        &self,
        scorer: &dyn RuleScorer,
        rng: &mut dyn RngCore,
        cfg: DecodeConfig,
    ) -> Result<Decoded, DecodeError> {
        with_sem!(self, s => gen_tree(s, scorer, rng, cfg))
    }

    pub fn likelihood(
        &self,
        scorer: &dyn RuleScorer,
        tree: &DerivationTree,
        cfg: DecodeConfig,
    ) -> Result<Likelihood, DecodeError> {
        with_sem!(self, s => log_likelihood(s, scorer, tree, cfg))
    }

    pub fn estimate(
        &self,
        scorer: &dyn RuleScorer,
        contexts: usize,
        decodes: usize,
        seed: u64,
        cfg: DecodeConfig,
    ) -> ValidityReport {
        with_sem!(self, s => estimate_validity(s, scorer, contexts, decodes, seed, cfg))
    }
}
