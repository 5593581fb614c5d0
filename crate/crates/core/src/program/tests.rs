use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::decoder::{gen_tree, log_likelihood, DecodeConfig, Semantics};
use crate::grammar::{rule_sequence_to_tree, tree_to_rule_sequence};
use crate::scorer::Uniform;
use crate::GrammarId;

const TRUTH: &str = "v1=sin(v0);v2=exp(v1);v3=v2-1;return:v3";

fn sem() -> ProgramSemantics {
    ProgramSemantics::builtin()
}

fn cfg() -> DecodeConfig {
    DecodeConfig::strict(GrammarId::Program.default_max_steps())
}

fn check(sem: &ProgramSemantics, text: &str) -> CheckReport {
    sem.check(&parse_program(sem.grammar(), text).unwrap())
}

#[test]
fn example_programs_check() {
    let s = sem();
    assert!(check(&s, TRUTH).valid);
    assert!(check(&s, "return:v0").valid);
    assert!(check(&s, "v5=4+v0;v3=cos(v5);return:v3").valid);
    assert!(check(&s, "v1=v1+1;return:v1").has(UNDEFINED_USE));
    assert!(check(&s, "v1=v0*2;return:v2").has(UNDEFINED_USE));
    assert!(check(&s, "v1=sin(v0)").has(MISSING_RETURN));
    assert!(check(&s, "return:v0;v1=v0+1;return:v1").has(MISPLACED_RETURN));
    let long = (1..=10)
        .map(|i| format!("v{}=v0+{i};", i % 10))
        .collect::<String>()
        + "return:v1";
    let long = long.replace("+10;", "+1;");
    assert!(check(&s, &long).has(STATEMENT_BUDGET), "{long}");
}

#[test]
fn reassignment_is_allowed_unless_requested() {
    let text = "v1=v0+1;v1=v1*2;return:v1";
    assert!(check(&sem(), text).valid);
    let strict = ProgramSemantics::new(
        GrammarId::Program.load_builtin(),
        CheckOptions {
            single_assignment: true,
        },
    );
    assert!(check(&strict, text).has(REASSIGNMENT));
    assert!(check(&strict, "v0=+1;return:v0").has(REASSIGNMENT));
    assert!(check(&strict, TRUTH).valid);
}

#[test]
fn parse_errors_carry_positions() {
    let g = GrammarId::Program.load_builtin();
    assert!(matches!(
        parse_program(&g, "v1=sin(v0);;return:v1"),
        Err(ParseError::Syntax { position: 11, .. })
    ));
    assert!(matches!(
        parse_program(&g, "v1=v0^2;return:v1"),
        Err(ParseError::Lexical {
            position: 5,
            found: '^'
        })
    ));
    assert!(parse_program(&g, "v10=1;return:v1").is_err());
    assert!(parse_program(&g, "").is_err());
}

#[test]
fn whitespace_is_ignored() {
    let g = GrammarId::Program.load_builtin();
    let t = parse_program(&g, " v1 = sin( v0 ) ;\nreturn: v1 ").unwrap();
    assert_eq!(t.yield_string(&g), "v1=sin(v0);return:v1");
}

#[test]
fn interpreter_examples() {
    let p = |t| Program::parse(t).unwrap();
    // Independent value: cos(4) = -0.6536436208636119.
    assert!(
        (interpret(&p("v5=4+v0;v3=cos(v5);return:v3"), 0.0) + 0.6536436208636119).abs() < 1e-12
    );
    assert_eq!(interpret(&p("return:v0"), 2.5), 2.5);
    assert_eq!(interpret(&p(TRUTH), 0.0), 0.0);
    assert!(interpret(&p("v1=1/v0;return:v1"), 0.0).is_infinite());
}

#[test]
fn reported_distances_are_reproduced() {
    let truth = Program::parse(TRUTH).unwrap();
    for (cand, want) in [
        ("v5=6+v0;v6=sin(v5);return:v6", 0.1436),
        ("v2=1/5;v9=-1;v7=v2+v2;return:v7", 0.5497),
        ("v7=5+v0;v5=cos(v7);return:v5", 0.1742),
    ] {
        let d = distance(&Program::parse(cand).unwrap(), &truth);
        assert!((d - want).abs() / want < 0.05, "{cand}: {d} vs {want}");
    }
    assert_eq!(distance(&truth, &truth), 0.0);
}

// Oracle: a direct replay of the grid sum for a constant program, whose MSE
// against the truth is the mean of (exp(sin x) - 1 - c)^2.
#[test]
fn distance_matches_direct_sum() {
    let c = 0.5;
    let mut sum = 0.0;
    for i in 0..1000 {
        let x = -5.0 + i as f64 * 10.0 / 999.0;
        let y: f64 = x.sin().exp() - 1.0;
        sum += (y - c).powi(2);
    }
    let want = (1.0 + sum / 1000.0).ln();
    let got = distance(
        &Program::parse("v1=+0.5;return:v1").unwrap(),
        &Program::parse(TRUTH).unwrap(),
    );
    assert!((got - want).abs() < 1e-12);
}

#[test]
fn non_finite_outputs_use_the_sentinel() {
    let inf = Program::parse("v1=v0/0;return:v1").unwrap();
    let zero = Program::parse("v1=+0;return:v1").unwrap();
    // Every grid point differs by the sentinel (x = 0 is not on the grid; 0/0 is NaN, also clamped).
    let d = distance(&inf, &zero);
    assert!((d - (1.0 + NON_FINITE_SENTINEL * NON_FINITE_SENTINEL).ln()).abs() < 1e-9);
}

#[test]
fn ast_round_trips_through_trees() {
    let g = GrammarId::Program.load_builtin();
    for p in gen_corpus(300, 5, 11) {
        let text = p.to_string();
        let tree = p.to_tree(&g);
        assert_eq!(tree.yield_string(&g), text);
        let seq = tree_to_rule_sequence(&g, &tree).unwrap();
        assert_eq!(seq, p.rule_sequence(&g));
        assert_eq!(seq.len(), p.steps());
        let back = rule_sequence_to_tree(&g, &seq).unwrap();
        assert_eq!(Program::from_tree(&g, &back).unwrap(), p);
    }
}

#[test]
fn generated_corpus_is_valid_and_deterministic() {
    let s = sem();
    let a = gen_corpus(500, 5, 3);
    assert_eq!(a, gen_corpus(500, 5, 3));
    assert_eq!(a[..10], gen_corpus(10, 5, 3)[..]);
    for p in &a {
        let n = p.stats.len() - 1;
        assert!((1..=5).contains(&n));
        let r = s.check(&p.to_tree(s.grammar()));
        assert!(r.valid, "{p}: {:?}", r.violations);
        let l = log_likelihood(&s, &Uniform, &p.to_tree(s.grammar()), cfg()).unwrap();
        assert!(l.logp.is_finite(), "{p}");
    }
}

#[test]
fn decoded_programs_are_valid() {
    let s = sem();
    for seed in 0..300 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = gen_tree(&s, &Uniform, &mut rng, cfg()).unwrap();
        assert!(out.complete);
        let r = s.check(&out.tree);
        assert!(
            r.valid,
            "{}: {:?}",
            out.tree.yield_string(s.grammar()),
            r.violations
        );
        let l = log_likelihood(&s, &Uniform, &out.tree, cfg()).unwrap();
        assert_eq!(l.logp, out.logp());
    }
}

#[test]
fn single_assignment_decoding_never_reassigns() {
    let s = ProgramSemantics::new(
        GrammarId::Program.load_builtin(),
        CheckOptions {
            single_assignment: true,
        },
    );
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = gen_tree(&s, &Uniform, &mut rng, cfg()).unwrap();
        assert!(
            s.check(&out.tree).valid,
            "{}",
            out.tree.yield_string(s.grammar())
        );
    }
}

fn operands() -> Vec<Operand> {
    let mut v: Vec<Operand> = (0..3).map(Operand::Var).collect();
    for int in 1..=2 {
        v.push(Operand::Num { int, frac: None });
        for d in 1..=2 {
            v.push(Operand::Num { int, frac: Some(d) });
        }
    }
    v
}

fn exprs() -> Vec<Expr> {
    let ops = operands();
    let mut out = Vec::new();
    for &a in &ops {
        out.push(Expr::Unary(UnaryOp::Plus, a));
        out.push(Expr::Unary(UnaryOp::Minus, a));
        for f in [Func::Sin, Func::Cos, Func::Exp] {
            out.push(Expr::Call(f, a));
        }
        for &b in &ops {
            for op in [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div] {
                out.push(Expr::Binary(a, op, b));
            }
        }
    }
    out
}

fn reads(e: &Expr) -> Vec<u8> {
    let var = |o: &Operand| match o {
        Operand::Var(v) => Some(*v),
        _ => None,
    };
    match e {
        Expr::Unary(_, a) | Expr::Call(_, a) => var(a).into_iter().collect(),
        Expr::Binary(a, _, b) => var(a).into_iter().chain(var(b)).collect(),
    }
}

// Brute force over one assignment plus a return with variables v0..v2 and
// digits {1, 2}: the checker, the decoder mask and a direct oracle agree.
#[test]
fn masks_agree_with_checker_exhaustively() {
    let s = sem();
    let g = s.grammar();
    let mut seen = [0usize; 2];
    for e in exprs() {
        for lhs in 0..3u8 {
            for ret in 0..3u8 {
                let p = Program {
                    stats: vec![Stat::Assign(lhs, e), Stat::Return(ret)],
                };
                let oracle = reads(&e).iter().all(|&v| v == 0) && (ret == 0 || ret == lhs);
                let tree = p.to_tree(g);
                let checked = s.check(&tree).valid;
                let l = log_likelihood(&s, &Uniform, &tree, cfg()).unwrap();
                assert_eq!(checked, oracle, "{p}");
                assert_eq!(l.logp.is_finite(), oracle, "{p}");
                seen[oracle as usize] += 1;
            }
        }
    }
    assert!(seen[0] > 0 && seen[1] > 0);
}

#[test]
fn budget_limits_assignments() {
    let s = sem();
    let nine = (1..=9).map(|i| format!("v{i}=v0+1;")).collect::<String>() + "return:v9";
    let ok = parse_program(s.grammar(), &nine).unwrap();
    assert!(s.check(&ok).valid);
    let wide = DecodeConfig::strict(400);
    assert!(log_likelihood(&s, &Uniform, &ok, wide)
        .unwrap()
        .logp
        .is_finite());
    // The default budget only has room for five assignments.
    assert_eq!(
        log_likelihood(&s, &Uniform, &ok, cfg()).unwrap().logp,
        f64::NEG_INFINITY
    );
    let ten = "v1=v0+1;".to_string() + &nine;
    let bad = parse_program(s.grammar(), &ten).unwrap();
    assert!(s.check(&bad).has(STATEMENT_BUDGET));
    assert_eq!(
        log_likelihood(&s, &Uniform, &bad, wide).unwrap().logp,
        f64::NEG_INFINITY
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn yield_of_parse_is_identity(seed in any::<u64>()) {
        let g = GrammarId::Program.load_builtin();
        let p = gen_corpus(1, 5, seed).remove(0);
        let text = p.to_string();
        prop_assert_eq!(parse_program(&g, &text).unwrap().yield_string(&g), text);
    }

    #[test]
    fn distance_is_nonnegative_and_zero_on_self(a in any::<u64>(), b in any::<u64>()) {
        let pa = gen_corpus(1, 5, a).remove(0);
        let pb = gen_corpus(1, 5, b).remove(0);
        prop_assert!(distance(&pa, &pb) >= 0.0);
        prop_assert_eq!(distance(&pa, &pa), 0.0);
    }
}
