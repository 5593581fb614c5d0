use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ast::{BinOp, Expr, Func, Operand, Program, Stat, UnaryOp};
use crate::rng::item_rng;

fn operand<R: Rng + ?Sized>(rng: &mut R, defined: &[u8]) -> Operand {
    if rng.gen_bool(0.6) {
        Operand::Var(*defined.choose(rng).expect("v0 is always defined"))
    } else {
        let int = rng.gen_range(0..10);
        let frac = rng.gen_bool(0.3).then(|| rng.gen_range(0..10));
        Operand::Num { int, frac }
    }
}

fn expr<R: Rng + ?Sized>(rng: &mut R, defined: &[u8]) -> Expr {
    match rng.gen_range(0..3) {
        0 => {
            let op = if rng.gen_bool(0.5) {
                UnaryOp::Plus
            } else {
                UnaryOp::Minus
            };
            Expr::Unary(op, operand(rng, defined))
        }
        1 => {
            let f = *[Func::Sin, Func::Cos, Func::Exp].choose(rng).unwrap();
            Expr::Call(f, operand(rng, defined))
        }
        _ => {
            let op = *[BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div]
                .choose(rng)
                .unwrap();
            Expr::Binary(operand(rng, defined), op, operand(rng, defined))
        }
    }
}

/// Random valid program with 1 to `max_statements` assignments followed by
/// a return of the last assigned variable. Operands only read variables
/// that are already defined. Programs longer than the default decoding
/// budget are redrawn, so every program is encodable.
pub fn gen_program<R: Rng + ?Sized>(rng: &mut R, max_statements: usize) -> Program {
    let max_steps = crate::GrammarId::Program.default_max_steps();
    loop {
        let p = draw(rng, max_statements);
        if p.steps() <= max_steps {
            return p;
        }
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, max_statements: usize) -> Program {
    let n = rng.gen_range(1..=max_statements.clamp(1, super::MAX_ASSIGNMENTS as usize));
    let mut defined = vec![0u8];
    let mut stats = Vec::with_capacity(n + 1);
    let mut last = 0;
    for _ in 0..n {
        let e = expr(rng, &defined);
        last = rng.gen_range(1..10);
        if !defined.contains(&last) {
            defined.push(last);
        }
        stats.push(Stat::Assign(last, e));
    }
    stats.push(Stat::Return(last));
    Program { stats }
}

/// `n` programs; item `i` draws from its own stream derived from `seed`,
/// so any prefix of a larger corpus is identical.
pub fn gen_corpus(n: usize, max_statements: usize, seed: u64) -> Vec<Program> {
    (0..n)
        .map(|i| {
            let mut rng: ChaCha8Rng = item_rng(seed, i as u64);
            gen_program(&mut rng, max_statements)
        })
        .collect()
}
