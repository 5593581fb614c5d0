//! Draw molecules with the constrained decoder, first under the uniform
//! scorer, then under a count scorer trained on the shipped sample. Every
//! completed string passes the offline checker.
//!
//! cargo run --release --example sample_molecules -- 10 7

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdgen::decoder::{gen_tree, log_likelihood, DecodeConfig, Semantics};
use sdgen::scorer::{CountModel, RuleScorer, Uniform, DEFAULT_ALPHA};
use sdgen::smiles::{parse_smiles, SmilesSemantics};
use sdgen::GrammarId;

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(10, |a| a.parse().expect("count"));
    let seed: u64 = args.next().map_or(0, |a| a.parse().expect("seed"));
    let sem = SmilesSemantics::builtin();
    let g = sem.grammar();
    let cfg = DecodeConfig::strict(GrammarId::Smiles.default_max_steps());

    let sample = include_str!("../data/smiles_sample.smi");
    let mut model = CountModel::new(g, DEFAULT_ALPHA).unwrap();
    for line in sample.lines() {
        let tree = parse_smiles(g, line).unwrap();
        model.observe(
            g,
            &log_likelihood(&sem, &Uniform, &tree, cfg).unwrap().trace,
        );
    }

    let scorers: [(&str, &dyn RuleScorer); 2] = [("uniform", &Uniform), ("trained", &model)];
    for (name, scorer) in scorers {
        println!("{name}:");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n {
            let d = gen_tree(&sem, scorer, &mut rng, cfg).unwrap();
            let valid = sem.check(&d.tree).valid;
            println!(
                "{:>4} steps  logp {:>9.3}  valid {valid}  {}",
                d.steps(),
                d.logp(),
                d.tree.yield_string(g)
            );
        }
    }
}
