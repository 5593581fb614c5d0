//! Parse and semantically check small programs.
//!
//! cargo run --example check_programs -- "v1=v0+1;return:v1" "v1=v2;return:v1"

use sdgen::decoder::Semantics;
use sdgen::program::{interpret, parse_program, Program, ProgramSemantics};

fn main() {
    let mut inputs: Vec<String> = std::env::args().skip(1).collect();
    if inputs.is_empty() {
        inputs = [
            "v1=sin(v0);v2=exp(v1);v3=v2-1;return:v3",
            "v1=v2*3;return:v1",
            "v1=v0+1;return:v2",
            "return:v0;v1=v0",
            "v1=v0++2;return:v1",
        ]
        .map(String::from)
        .to_vec();
    }
    let sem = ProgramSemantics::builtin();
    for text in &inputs {
        let tree = match parse_program(sem.grammar(), text) {
            Ok(t) => t,
            Err(e) => {
                println!("{text}\n  parse error: {e}");
                continue;
            }
        };
        let report = sem.check(&tree);
        println!(
            "{text}\n  {} productions, valid: {}",
            tree.rule_count(),
            report.valid
        );
        for v in &report.violations {
            println!("  {} at {}: {}", v.rule, v.location, v.detail);
        }
        if report.valid {
            let p = Program::parse(text).unwrap();
            println!("  f(0.5) = {:.6}", interpret(&p, 0.5));
        }
    }
}
