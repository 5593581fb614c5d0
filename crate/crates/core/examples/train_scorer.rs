//! Train the count scorer on generated programs and compare held-out NLL
//! with the uniform scorer.
//!
//! cargo run --release --example train_scorer -- 5000 model.json

use std::path::PathBuf;

use sdgen::decoder::{log_likelihood, DecodeConfig, Semantics};
use sdgen::program::{gen_corpus, parse_program, Program, ProgramSemantics};
use sdgen::scorer::{CountModel, RuleScorer, Uniform, DEFAULT_ALPHA};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args
        .next()
        .map_or(5000, |a| a.parse().expect("corpus size"));
    let out = args.next().map(PathBuf::from);
    let sem = ProgramSemantics::builtin();
    let g = sem.grammar();
    let cfg = DecodeConfig::strict(80);
    let corpus = gen_corpus(n, 5, 0);
    let (train, held) = corpus.split_at(n * 9 / 10);
    let forced = |p: &Program, s: &dyn RuleScorer| {
        let tree = parse_program(g, &p.to_string()).unwrap();
        log_likelihood(&sem, s, &tree, cfg).unwrap()
    };

    let mut model = CountModel::new(g, DEFAULT_ALPHA).unwrap();
    for p in train {
        model.observe(g, &forced(p, &Uniform).trace);
    }
    let nll = |s: &dyn RuleScorer| {
        -held.iter().map(|p| forced(p, s).logp).sum::<f64>() / held.len() as f64
    };
    println!(
        "trained on {} programs, {} held out",
        train.len(),
        held.len()
    );
    println!("mean NLL uniform {:.4}", nll(&Uniform));
    println!("mean NLL counts  {:.4}", nll(&model));
    if let Some(path) = out {
        model.save(&path).unwrap();
        println!("saved {}", path.display());
    }
}
