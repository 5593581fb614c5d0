use std::fmt;

use super::parse::{parse_program_ast, ParseError, Prods};
use crate::grammar::{rule_sequence_to_tree, DerivationTree, Grammar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Operand {
    Var(u8),
    /// `int` or `int.frac`, single digits each.
    Num {
        int: u8,
        frac: Option<u8>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Expr {
    Unary(UnaryOp, Operand),
    Call(Func, Operand),
    Binary(Operand, BinOp, Operand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stat {
    Assign(u8, Expr),
    Return(u8),
}

/// A program as a list of statements; mirrors the derivation tree one to one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    pub stats: Vec<Stat>,
}

impl Program {
    pub fn parse(text: &str) -> Result<Program, ParseError> {
        parse_program_ast(text)
    }

    /// Reads the program back from a complete program-grammar tree.
    pub fn from_tree(g: &Grammar, tree: &DerivationTree) -> Result<Program, ParseError> {
        parse_program_ast(&tree.yield_string(g))
    }

    /// Pre-order production sequence under the program grammar.
    pub fn rule_sequence(&self, g: &Grammar) -> Vec<usize> {
        let p = Prods::new(g);
        let mut out = vec![p.program];
        for (i, stat) in self.stats.iter().enumerate() {
            let last = i + 1 == self.stats.len();
            out.push(if last { p.list_base } else { p.list_rec });
            match *stat {
                Stat::Assign(v, e) => {
                    out.extend([
                        p.stat_assign,
                        p.assign,
                        p.lhs,
                        p.var,
                        p.var_id[v as usize],
                        p.rhs,
                    ]);
                    match e {
                        Expr::Unary(op, a) => {
                            out.extend([p.expr_unary, p.unary_op_expr, p.uop[op as usize]]);
                            p.operand(a, &mut out);
                        }
                        Expr::Call(f, a) => {
                            out.extend([p.expr_unary, p.unary_func_expr, p.func[f as usize]]);
                            p.operand(a, &mut out);
                        }
                        Expr::Binary(a, op, b) => {
                            out.extend([p.expr_binary, p.binary]);
                            p.operand(a, &mut out);
                            out.push(p.bop[op as usize]);
                            p.operand(b, &mut out);
                        }
                    }
                }
                Stat::Return(v) => {
                    out.extend([p.stat_return, p.ret, p.lhs, p.var, p.var_id[v as usize]])
                }
            }
        }
        out
    }

    /// Length of the rule sequence, computed without a grammar.
    pub fn steps(&self) -> usize {
        let operand = |a: &Operand| match a {
            Operand::Num { frac: Some(_), .. } => 4,
            _ => 3,
        };
        1 + self
            .stats
            .iter()
            .map(|s| match s {
                Stat::Assign(_, Expr::Unary(_, a) | Expr::Call(_, a)) => 1 + 9 + operand(a),
                Stat::Assign(_, Expr::Binary(a, _, b)) => 1 + 9 + operand(a) + operand(b),
                Stat::Return(_) => 1 + 5,
            })
            .sum::<usize>()
    }

    pub fn to_tree(&self, g: &Grammar) -> DerivationTree {
        rule_sequence_to_tree(g, &self.rule_sequence(g)).expect("program AST encodes a derivation")
    }

    /// Variable returned by the final statement.
    pub fn returned(&self) -> Option<u8> {
        match self.stats.last() {
            Some(Stat::Return(v)) => Some(*v),
            _ => None,
        }
    }
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => write!(f, "v{v}"),
            Operand::Num { int, frac: None } => write!(f, "{int}"),
            Operand::Num { int, frac: Some(d) } => write!(f, "{int}.{d}"),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Unary(op, a) => write!(f, "{}{a}", if *op == UnaryOp::Plus { "+" } else { "-" }),
            Expr::Call(func, a) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                };
                write!(f, "{name}({a})")
            }
            Expr::Binary(a, op, b) => {
                let c = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                };
                write!(f, "{a}{c}{b}")
            }
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.stats.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            match s {
                Stat::Assign(v, e) => write!(f, "v{v}={e}")?,
                Stat::Return(v) => write!(f, "return:v{v}")?,
            }
        }
        Ok(())
    }
}

fn operand_value(vars: &[f64; 10], a: Operand) -> f64 {
    match a {
        Operand::Var(v) => vars[v as usize],
        Operand::Num { int, frac } => int as f64 + frac.map_or(0.0, |d| d as f64 / 10.0),
    }
}

/// Runs the program on input `v0`. Undefined variables read as NaN;
/// non-finite values propagate.
pub fn interpret(program: &Program, v0: f64) -> f64 {
    let mut vars = [f64::NAN; 10];
    vars[0] = v0;
    for s in &program.stats {
        match *s {
            Stat::Assign(v, e) => {
                vars[v as usize] = match e {
                    Expr::Unary(UnaryOp::Plus, a) => operand_value(&vars, a),
                    Expr::Unary(UnaryOp::Minus, a) => -operand_value(&vars, a),
                    Expr::Call(Func::Sin, a) => operand_value(&vars, a).sin(),
                    Expr::Call(Func::Cos, a) => operand_value(&vars, a).cos(),
                    Expr::Call(Func::Exp, a) => operand_value(&vars, a).exp(),
                    Expr::Binary(a, op, b) => {
                        let (x, y) = (operand_value(&vars, a), operand_value(&vars, b));
                        match op {
                            BinOp::Add => x + y,
                            BinOp::Sub => x - y,
                            BinOp::Mul => x * y,
                            BinOp::Div => x / y,
                        }
                    }
                }
            }
            Stat::Return(v) => return vars[v as usize],
        }
    }
    f64::NAN
}

pub const GRID_POINTS: usize = 1000;
/// Replacement for NaN and infinite outputs before squaring.
pub const NON_FINITE_SENTINEL: f64 = 1e10;

/// `ln(1 + MSE)` between the two programs' outputs on 1000 evenly spaced
/// inputs covering [-5, 5] including both ends.
pub fn distance(candidate: &Program, target: &Program) -> f64 {
    let clamp = |y: f64| {
        if y.is_finite() {
            y
        } else {
            NON_FINITE_SENTINEL
        }
    };
    let mut sum = 0.0;
    for i in 0..GRID_POINTS {
        let x = -5.0 + 10.0 * i as f64 / (GRID_POINTS - 1) as f64;
        let d = clamp(interpret(candidate, x)) - clamp(interpret(target, x));
        sum += d * d;
    }
    (1.0 + sum / GRID_POINTS as f64).ln()
}
