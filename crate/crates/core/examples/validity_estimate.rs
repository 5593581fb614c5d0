//! Validity and completion rates under the two budget modes.
//!
//! cargo run --release --example validity_estimate -- 50

use sdgen::decoder::{estimate_validity, DecodeConfig, Semantics, ValidityReport};
use sdgen::program::ProgramSemantics;
use sdgen::scorer::Uniform;
use sdgen::smiles::SmilesSemantics;
use sdgen::GrammarId;

fn show(name: &str, r: &ValidityReport) {
    println!(
        "{name:<28} validity {:.4}  completed {:.4}  mean steps {:.1}",
        r.validity, r.completion_rate, r.mean_steps
    );
}

fn run<S: Semantics>(sem: &S, id: GrammarId, contexts: usize) {
    for t in [id.default_max_steps(), 30] {
        for (mode, cfg) in [
            ("strict", DecodeConfig::strict(t)),
            ("truncate", DecodeConfig::truncate(t)),
        ] {
            let r = estimate_validity(sem, &Uniform, contexts, 20, 1, cfg);
            show(&format!("{} T={t} {mode}", id), &r);
        }
    }
}

fn main() {
    let contexts: usize = std::env::args()
        .nth(1)
        .map_or(50, |a| a.parse().expect("contexts"));
    run(&ProgramSemantics::builtin(), GrammarId::Program, contexts);
    run(&SmilesSemantics::builtin(), GrammarId::Smiles, contexts);
}
