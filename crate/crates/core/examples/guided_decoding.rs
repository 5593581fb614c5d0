//! Drive a decode by hand: inspect each mask, pick alternatives, fork the
//! session and finish greedily.
//!
//! cargo run --example guided_decoding

use sdgen::decoder::{Decision, DecodeConfig, Semantics, Session};
use sdgen::program::ProgramSemantics;
use sdgen::scorer::Uniform;

fn main() {
    let sem = ProgramSemantics::builtin();
    let g = sem.grammar();
    let mut s = Session::new(&sem, &Uniform, DecodeConfig::strict(40));
    // Always take the last allowed alternative for the first 12 steps.
    for _ in 0..12 {
        match s.next_decision().unwrap() {
            Decision::Rule(m) => {
                let names: Vec<String> = g
                    .alternatives(s.tree().symbol(m.node))
                    .iter()
                    .zip(&m.allowed)
                    .filter(|(_, ok)| **ok)
                    .map(|(p, _)| g.display_production(*p))
                    .collect();
                println!(
                    "{} of {} allowed, e.g. {}",
                    names.len(),
                    m.allowed.len(),
                    names[0]
                );
                let last = m.allowed.iter().rposition(|a| *a).unwrap();
                s.choose_rule(last).unwrap();
            }
            Decision::Lazy { allowed, .. } => s.choose_lazy(allowed[1]).unwrap(),
            Decision::Done | Decision::Exhausted => break,
        }
    }
    let mut fork = s.clone();
    fork.complete_greedily().unwrap();
    let text = fork.tree().yield_string(g);
    println!(
        "greedy completion: {text} (valid {})",
        sem.check(fork.tree()).valid
    );
    println!("original session still at step {}", s.steps());
}
