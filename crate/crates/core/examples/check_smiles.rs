//! Parse SMILES strings and report ring-bond and valence violations.
//!
//! cargo run --example check_smiles -- "C1CC1" "C1CC"

use sdgen::decoder::Semantics;
use sdgen::grammar::tree_to_rule_sequence;
use sdgen::smiles::{parse_smiles, SmilesSemantics};

fn main() {
    let mut inputs: Vec<String> = std::env::args().skip(1).collect();
    if inputs.is_empty() {
        inputs = [
            "c1ccccc1O",
            "CC(=O)Nc1ccc(O)cc1",
            "C1CC",
            "C=1CC-1",
            "C(=O)(=O)(=O)C",
            "[NH4+]",
            "C((C)",
        ]
        .map(String::from)
        .to_vec();
    }
    let sem = SmilesSemantics::builtin();
    let g = sem.grammar();
    for text in &inputs {
        match parse_smiles(g, text) {
            Err(e) => println!("{text:<22} parse error: {e}"),
            Ok(tree) => {
                let seq = tree_to_rule_sequence(g, &tree).unwrap();
                let r = sem.check(&tree);
                let verdict = match r.first() {
                    None => "valid".to_string(),
                    Some(v) => format!("{} at {}: {}", v.rule, v.location, v.detail),
                };
                println!("{text:<22} {:>3} rules  {verdict}", seq.len());
            }
        }
    }
}
