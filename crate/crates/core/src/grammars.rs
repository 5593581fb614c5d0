//! The shipped grammar files.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::grammar::{Grammar, GrammarError};

pub const PROGRAM_GRM: &str = include_str!("../grammars/program.grm");
pub const SMILES_GRM: &str = include_str!("../grammars/smiles.grm");
pub const TOY_GRM: &str = include_str!("../grammars/toy_smiles.grm");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrammarId {
    Program,
    Smiles,
    Toy,
}

impl GrammarId {
    pub const ALL: [GrammarId; 3] = [GrammarId::Program, GrammarId::Smiles, GrammarId::Toy];

    pub fn file_name(self) -> &'static str {
        match self {
            GrammarId::Program => "program.grm",
            GrammarId::Smiles => "smiles.grm",
            GrammarId::Toy => "toy_smiles.grm",
        }
    }

    pub fn builtin_text(self) -> &'static str {
        match self {
            GrammarId::Program => PROGRAM_GRM,
            GrammarId::Smiles => SMILES_GRM,
            GrammarId::Toy => TOY_GRM,
        }
    }

    /// Default decoding step budget.
    pub fn default_max_steps(self) -> usize {
        match self {
            GrammarId::Program => 80,
            GrammarId::Smiles => 278,
            GrammarId::Toy => 16,
        }
    }

    pub fn load_builtin(self) -> Grammar {
        Grammar::load(self.builtin_text()).expect("shipped grammar is well formed")
    }

    pub fn load_text(self, text: &str) -> Result<Grammar, GrammarError> {
        Grammar::load(text)
    }
}

impl fmt::Display for GrammarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GrammarId::Program => "program",
            GrammarId::Smiles => "smiles",
            GrammarId::Toy => "toy",
        })
    }
}

impl FromStr for GrammarId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "program" => Ok(GrammarId::Program),
            "smiles" => Ok(GrammarId::Smiles),
            "toy" => Ok(GrammarId::Toy),
            other => Err(format!(
                "unknown grammar `{other}` (expected program, smiles or toy)"
            )),
        }
    }
}
