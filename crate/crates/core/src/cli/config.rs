use std::fs;
use std::path::PathBuf;

use serde::Deserialize;

use super::{CliError, CommonArgs, Frontend};
use crate::decoder::{BudgetMode, DecodeConfig};
use crate::grammar::Grammar;
use crate::grammars::GrammarId;
use crate::scorer::{AnyScorer, CountModel, Uniform};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScorerSpec {
    Uniform,
    Model(PathBuf),
}

impl ScorerSpec {
    fn parse(s: &str) -> Self {
        if s == "uniform" {
            ScorerSpec::Uniform
        } else {
            ScorerSpec::Model(PathBuf::from(s))
        }
    }
}

/// Settings of one run after merging defaults, the config file and flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub grammar: GrammarId,
    pub scorer: ScorerSpec,
    pub seed: u64,
    pub max_steps: usize,
    pub budget_mode: BudgetMode,
    pub jobs: Option<usize>,
    pub output: Option<PathBuf>,
    pub grammar_dir: Option<PathBuf>,
}

/// Config file contents; every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    grammar: Option<GrammarId>,
    scorer: Option<String>,
    seed: Option<u64>,
    max_steps: Option<usize>,
    budget_mode: Option<BudgetMode>,
    jobs: Option<usize>,
    output: Option<PathBuf>,
    grammar_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(args: &CommonArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(CliError::io(path))?;
                toml::from_str(&text).map_err(|source| CliError::Config {
                    path: path.clone(),
                    source,
                })?
            }
            None => FileConfig::default(),
        };
        let grammar = args.grammar.or(file.grammar).unwrap_or(GrammarId::Program);
        let jobs = args.jobs.or(file.jobs);
        if jobs == Some(0) {
            return Err(CliError::Usage("--jobs must be at least 1".into()));
        }
        Ok(RunConfig {
            grammar,
            scorer: ScorerSpec::parse(
                args.scorer
                    .as_deref()
                    .or(file.scorer.as_deref())
                    .unwrap_or("uniform"),
            ),
            seed: args.seed.or(file.seed).unwrap_or(0),
            max_steps: args
                .max_steps
                .or(file.max_steps)
                .unwrap_or(grammar.default_max_steps()),
            budget_mode: args.budget_mode.or(file.budget_mode).unwrap_or_default(),
            jobs,
            output: args.output.clone().or(file.output),
            grammar_dir: args.grammar_dir.clone().or(file.grammar_dir),
        })
    }

    pub fn decode_config(&self) -> DecodeConfig {
        DecodeConfig {
            max_steps: self.max_steps,
            mode: self.budget_mode,
        }
    }

    pub fn frontend(&self) -> Result<Frontend, CliError> {
        Frontend::load(self.grammar, self.grammar_dir.as_deref())
    }

    pub fn scorer(&self, grammar: &Grammar) -> Result<AnyScorer, CliError> {
        Ok(match &self.scorer {
            ScorerSpec::Uniform => AnyScorer::Uniform(Uniform),
            ScorerSpec::Model(path) => {
                AnyScorer::Counts(Box::new(CountModel::load(grammar, path)?))
            }
        })
    }
}
