//! Mean absolute log-difference between two programs on the evaluation grid.
//!
//! cargo run --example program_distance -- "v1=sin(v0);return:v1" "v1=cos(v0);return:v1"

use sdgen::program::{distance, Program};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let target = "v1=sin(v0);v2=exp(v1);v3=v2-1;return:v3";
    let pairs: Vec<(String, String)> = match args.as_slice() {
        [a, b] => vec![(a.clone(), b.clone())],
        _ => [
            "v5=6+v0;v6=sin(v5);return:v6",
            "v2=1/5;v9=-1;v7=v2+v2;return:v7",
            "v7=5+v0;v5=cos(v7);return:v5",
            target,
        ]
        .iter()
        .map(|c| (c.to_string(), target.to_string()))
        .collect(),
    };
    for (a, b) in pairs {
        let d = distance(&Program::parse(&a).unwrap(), &Program::parse(&b).unwrap());
        println!("{d:.4}  {a}  vs  {b}");
    }
}
