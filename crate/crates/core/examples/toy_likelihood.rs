//! Teacher-forced likelihood on the three-carbon toy grammar, step by step.
//!
//! cargo run --example toy_likelihood -- "C=2CC=2"

use sdgen::decoder::{log_likelihood, DecodeConfig, Semantics, TraceStep};
use sdgen::scorer::Uniform;
use sdgen::toy::{parse_toy, ToySemantics};

fn main() {
    let mut inputs: Vec<String> = std::env::args().skip(1).collect();
    if inputs.is_empty() {
        inputs = ["CCC", "C-1CC-1", "C-1CC=1"].map(String::from).to_vec();
    }
    let sem = ToySemantics::builtin();
    let g = sem.grammar();
    for text in &inputs {
        let tree = parse_toy(g, text).expect("toy string");
        let l = log_likelihood(&sem, &Uniform, &tree, DecodeConfig::strict(16)).unwrap();
        println!("{text}: log p = {:.6}", l.logp);
        for step in &l.trace.steps {
            match step {
                TraceStep::Rule {
                    production,
                    allowed,
                    logp,
                    ..
                } => {
                    let open = allowed.iter().filter(|a| **a).count();
                    println!(
                        "  {:<32} {open} allowed  {logp:.4}",
                        g.display_production(*production)
                    );
                }
                TraceStep::Lazy {
                    attr,
                    bit,
                    value,
                    logp,
                    ..
                } => {
                    println!(
                        "  lazy {attr}[{bit}] = {}{:>25}  {logp:.4}",
                        *value as u8, ""
                    );
                }
            }
        }
        if let Some(b) = &l.blocked {
            println!("  blocked at step {}: {}", b.step, b.reason);
        }
    }
}
