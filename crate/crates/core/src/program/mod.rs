//! Straight-line univariate programs such as
//! `v1=sin(v0);v2=exp(v1);v3=v2-1;return:v3`.
//!
//! `v0` is the input. A program is valid when every variable is defined
//! before it is used, the last statement (and only the last) is a return,
//! and there are at most [`MAX_ASSIGNMENTS`] assignments.

mod ast;
mod corpus;
mod parse;
mod semantics;

pub use ast::{
    distance, interpret, BinOp, Expr, Func, Operand, Program, Stat, UnaryOp, GRID_POINTS,
    NON_FINITE_SENTINEL,
};
pub use corpus::{gen_corpus, gen_program};
pub use parse::{parse_program, ParseError};
pub use semantics::{ProgramEnv, ProgramSemantics};

use std::collections::BTreeSet;

use crate::attr::{
    evaluate_offline, AttrError, AttrKind, CheckFn, CheckReport, Domain, EvalOrder, RuleFn, Schema,
    Value, Violation,
};
use crate::grammar::{DerivationTree, Grammar};

pub const MAX_ASSIGNMENTS: i64 = 9;

pub const UNDEFINED_USE: &str = "undefined-use";
pub const MISSING_RETURN: &str = "missing-return";
pub const MISPLACED_RETURN: &str = "misplaced-return";
pub const STATEMENT_BUDGET: &str = "statement-budget";
pub const REASSIGNMENT: &str = "reassignment";

/// Checker options.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CheckOptions {
    /// Reject programs that assign a variable (including `v0`) twice.
    pub single_assignment: bool,
}

/// Synthesized schema. Statements expose the variables they use and
/// define; a statement list computes its free variables bottom-up
/// (`uses(s) ∪ (free(rest) \ defs(s))`) and the program checks that only
/// `v0` is free.
pub fn schema(g: &Grammar, opts: CheckOptions) -> Schema {
    build(g, opts).expect("program schema matches the program grammar")
}

fn build(g: &Grammar, opts: CheckOptions) -> Result<Schema, AttrError> {
    use AttrKind::Synthesized as S;
    let mut s = Schema::new(g);
    s.declare(g, "var id", "val", S, Domain::Token)?;
    s.declare(g, "var", "name", S, Domain::Token)?;
    s.declare(g, "lhs", "name", S, Domain::Token)?;
    for nt in [
        "operand",
        "unary expr",
        "binary expr",
        "expr",
        "rhs",
        "assign",
        "return",
        "stat",
    ] {
        s.declare(g, nt, "uses", S, Domain::SymbolSet)?;
    }
    s.declare(g, "assign", "defs", S, Domain::SymbolSet)?;
    s.declare(g, "stat", "defs", S, Domain::SymbolSet)?;
    s.declare(g, "stat", "kind", S, Domain::Token)?;
    s.declare(g, "stat", "assigns", S, Domain::Counter)?;
    s.declare(g, "stat list", "rest", S, Domain::SymbolSet)?;
    s.declare(g, "stat list", "free", S, Domain::SymbolSet)?;
    s.declare(g, "stat list", "assigns", S, Domain::Counter)?;
    s.declare(g, "stat list", "last", S, Domain::Token)?;
    s.declare(g, "stat list", "order", S, Domain::Flag)?;
    s.declare(g, "program", "defined", S, Domain::Flag)?;
    s.declare(g, "program", "returns", S, Domain::Flag)?;
    s.declare(g, "program", "budget", S, Domain::Flag)?;

    for d in 0..=9 {
        s.rule(
            g,
            &format!("<var id> -> '{d}'"),
            "0.val",
            &[],
            RuleFn::Const(Value::token(d.to_string())),
        )?;
    }
    s.rule(
        g,
        "<var> -> 'v' <var id>",
        "0.name",
        &["2.val"],
        RuleFn::Concat { prefix: "v".into() },
    )?;
    s.rule(g, "<lhs> -> <var>", "0.name", &["1.name"], RuleFn::Copy)?;

    s.rule(
        g,
        "<operand> -> <var>",
        "0.uses",
        &["1.name"],
        RuleFn::SetOf,
    )?;
    s.rule(
        g,
        "<operand> -> <immediate number>",
        "0.uses",
        &[],
        RuleFn::Const(Value::empty_set()),
    )?;
    s.rule(
        g,
        "<unary expr> -> <unary op> <operand>",
        "0.uses",
        &["2.uses"],
        RuleFn::Copy,
    )?;
    s.rule(
        g,
        "<unary expr> -> <unary func> '(' <operand> ')'",
        "0.uses",
        &["3.uses"],
        RuleFn::Copy,
    )?;
    s.rule(
        g,
        "<binary expr> -> <operand> <binary op> <operand>",
        "0.uses",
        &["1.uses", "3.uses"],
        RuleFn::Union,
    )?;
    s.rule(
        g,
        "<expr> -> <unary expr>",
        "0.uses",
        &["1.uses"],
        RuleFn::Copy,
    )?;
    s.rule(
        g,
        "<expr> -> <binary expr>",
        "0.uses",
        &["1.uses"],
        RuleFn::Copy,
    )?;
    s.rule(g, "<rhs> -> <expr>", "0.uses", &["1.uses"], RuleFn::Copy)?;

    let assign = "<assign> -> <lhs> '=' <rhs>";
    s.rule(g, assign, "0.uses", &["3.uses"], RuleFn::Copy)?;
    s.rule(g, assign, "0.defs", &["1.name"], RuleFn::SetOf)?;
    s.rule(
        g,
        "<return> -> 'return:' <lhs>",
        "0.uses",
        &["2.name"],
        RuleFn::SetOf,
    )?;

    let sa = "<stat> -> <assign>";
    s.rule(g, sa, "0.uses", &["1.uses"], RuleFn::Copy)?;
    s.rule(g, sa, "0.defs", &["1.defs"], RuleFn::Copy)?;
    s.rule(g, sa, "0.kind", &[], RuleFn::Const(Value::token("assign")))?;
    s.rule(g, sa, "0.assigns", &[], RuleFn::Const(Value::Counter(1)))?;
    let sr = "<stat> -> <return>";
    s.rule(g, sr, "0.uses", &["1.uses"], RuleFn::Copy)?;
    s.rule(g, sr, "0.defs", &[], RuleFn::Const(Value::empty_set()))?;
    s.rule(g, sr, "0.kind", &[], RuleFn::Const(Value::token("return")))?;
    s.rule(g, sr, "0.assigns", &[], RuleFn::Const(Value::Counter(0)))?;

    let rec = "<stat list> -> <stat> ';' <stat list>";
    s.rule(g, rec, "0.rest", &["3.free", "1.defs"], RuleFn::Minus)?;
    s.rule(g, rec, "0.free", &["1.uses", "0.rest"], RuleFn::Union)?;
    s.rule(
        g,
        rec,
        "0.assigns",
        &["1.assigns", "3.assigns"],
        RuleFn::CounterAdd(0),
    )?;
    s.rule(g, rec, "0.last", &["3.last"], RuleFn::Copy)?;
    s.rule(
        g,
        rec,
        "0.order",
        &["1.kind"],
        RuleFn::Check {
            check: CheckFn::NotEqualConst(Value::token("return")),
            id: MISPLACED_RETURN.into(),
        },
    )?;
    let base = "<stat list> -> <stat>";
    s.rule(g, base, "0.rest", &[], RuleFn::Const(Value::empty_set()))?;
    s.rule(g, base, "0.free", &["1.uses"], RuleFn::Copy)?;
    s.rule(g, base, "0.assigns", &["1.assigns"], RuleFn::Copy)?;
    s.rule(g, base, "0.last", &["1.kind"], RuleFn::Copy)?;
    s.rule(g, base, "0.order", &[], RuleFn::Const(Value::Flag(true)))?;

    let prog = "<program> -> <stat list>";
    s.rule(
        g,
        prog,
        "0.defined",
        &["1.free"],
        RuleFn::Check {
            check: CheckFn::SubsetOfConst(BTreeSet::from(["v0".to_string()])),
            id: UNDEFINED_USE.into(),
        },
    )?;
    s.rule(
        g,
        prog,
        "0.returns",
        &["1.last"],
        RuleFn::Check {
            check: CheckFn::EqualsConst(Value::token("return")),
            id: MISSING_RETURN.into(),
        },
    )?;
    s.rule(
        g,
        prog,
        "0.budget",
        &["1.assigns"],
        RuleFn::Check {
            check: CheckFn::AtMost(MAX_ASSIGNMENTS),
            id: STATEMENT_BUDGET.into(),
        },
    )?;

    if opts.single_assignment {
        s.declare(g, "stat list", "all defs", S, Domain::SymbolSet)?;
        s.declare(g, "stat list", "fresh", S, Domain::Flag)?;
        s.declare(g, "program", "input", S, Domain::Token)?;
        s.declare(g, "program", "keeps input", S, Domain::Flag)?;
        s.rule(
            g,
            rec,
            "0.all defs",
            &["1.defs", "3.all defs"],
            RuleFn::Union,
        )?;
        s.rule(
            g,
            rec,
            "0.fresh",
            &["1.defs", "3.all defs"],
            RuleFn::Check {
                check: CheckFn::Disjoint,
                id: REASSIGNMENT.into(),
            },
        )?;
        s.rule(g, base, "0.all defs", &["1.defs"], RuleFn::Copy)?;
        s.rule(g, base, "0.fresh", &[], RuleFn::Const(Value::Flag(true)))?;
        s.rule(g, prog, "0.input", &[], RuleFn::Const(Value::token("v0")))?;
        s.rule(
            g,
            prog,
            "0.keeps input",
            &["1.all defs", "0.input"],
            RuleFn::Check {
                check: CheckFn::NotMember,
                id: REASSIGNMENT.into(),
            },
        )?;
    }
    Ok(s)
}

/// Offline semantic check of a complete program tree.
pub fn check_program(g: &Grammar, schema: &Schema, tree: &DerivationTree) -> CheckReport {
    match evaluate_offline(schema, g, tree, EvalOrder::Forward) {
        Ok(e) => e.report(g, tree),
        Err(e) => CheckReport::from_violations(vec![Violation {
            location: 0,
            rule: "malformed".into(),
            detail: e.to_string(),
        }]),
    }
}

#[cfg(test)]
mod tests;
