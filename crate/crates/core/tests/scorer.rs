use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sdgen::decoder::{gen_tree, log_likelihood, DecodeConfig, DecodeTrace, Semantics, TraceStep};
use sdgen::program::{gen_corpus, parse_program, ProgramSemantics};
use sdgen::scorer::{CountModel, ModelError, RuleQuery, RuleScorer, ScorerContext, Uniform};
use sdgen::toy::{parse_toy, ToySemantics};
use sdgen::GrammarId;

fn toy_trace(t: &ToySemantics, text: &str) -> DecodeTrace {
    let tree = parse_toy(t.grammar(), text).unwrap();
    log_likelihood(t, &Uniform, &tree, DecodeConfig::strict(16))
        .unwrap()
        .trace
}

fn program_traces(n: usize, seed: u64) -> Vec<DecodeTrace> {
    let p = ProgramSemantics::builtin();
    gen_corpus(n, 5, seed)
        .iter()
        .map(|prog| {
            let tree = parse_program(p.grammar(), &prog.to_string()).unwrap();
            log_likelihood(&p, &Uniform, &tree, DecodeConfig::strict(80))
                .unwrap()
                .trace
        })
        .collect()
}

#[test]
fn one_chain_tree_counts_the_root_rule_once() {
    let t = ToySemantics::builtin();
    let g = t.grammar();
    let mut m = CountModel::new(g, 0.1).unwrap();
    m.observe(g, &toy_trace(&t, "CCC"));
    let s = g.nonterminal("s").unwrap();
    assert_eq!(m.count(s, None, 0, 0), 1);
    let atom = g.nonterminal("atom").unwrap();
    let root = g.alternatives(s)[0];
    assert_eq!(m.count(atom, Some(root), 1, 0), 2);
    assert_eq!(m.count(atom, Some(root), 1, 1), 0);
}

#[test]
fn trained_toy_likelihood_matches_hand_product() {
    // "CCC" has one free decision, the first lazy bit being 0; after one
    // observation its probability is (1 + a) / (1 + 2a).
    let t = ToySemantics::builtin();
    let g = t.grammar();
    let a = 0.1;
    let mut m = CountModel::new(g, a).unwrap();
    m.observe(g, &toy_trace(&t, "CCC"));
    let tree = parse_toy(g, "CCC").unwrap();
    let l = log_likelihood(&t, &m, &tree, DecodeConfig::strict(16)).unwrap();
    let want = ((1.0 + a) / (1.0 + 2.0 * a)).ln();
    assert!((l.logp - want).abs() < 1e-12, "{} vs {want}", l.logp);
}

#[test]
fn empty_model_is_uniform() {
    let p = ProgramSemantics::builtin();
    let m = CountModel::new(p.grammar(), 0.7).unwrap();
    for prog in gen_corpus(50, 5, 3) {
        let tree = parse_program(p.grammar(), &prog.to_string()).unwrap();
        let cfg = DecodeConfig::strict(80);
        let a = log_likelihood(&p, &m, &tree, cfg).unwrap().logp;
        let b = log_likelihood(&p, &Uniform, &tree, cfg).unwrap().logp;
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn bad_alpha_is_rejected() {
    let g = GrammarId::Toy.load_builtin();
    for a in [0.0, -1.0, f64::NAN, f64::INFINITY] {
        assert!(matches!(CountModel::new(&g, a), Err(ModelError::Alpha(_))));
    }
}

#[test]
fn weights_are_positive_and_finite() {
    let p = ProgramSemantics::builtin();
    let g = p.grammar();
    let mut m = CountModel::new(g, 0.1).unwrap();
    m.train(g, &program_traces(200, 1));
    for (i, sym) in g.symbols().iter().enumerate() {
        if sym.is_terminal() {
            continue;
        }
        let nt = g.nonterminal(&sym.name).unwrap();
        assert_eq!(nt.index(), i);
        let alts = g.alternatives(nt).len();
        for parent in std::iter::once(None).chain((0..g.productions().len()).map(Some)) {
            for depth in [0, 1, 5, 40] {
                let w = m.rule_weights(&RuleQuery {
                    nonterminal: nt,
                    depth,
                    parent_production: parent,
                    alternatives: alts,
                    context: ScorerContext::Unit,
                });
                assert_eq!(w.len(), alts);
                assert!(w.iter().all(|x| x.is_finite() && *x > 0.0));
            }
        }
    }
}

#[test]
fn trained_samples_replay_exactly() {
    let p = ProgramSemantics::builtin();
    let g = p.grammar();
    let mut m = CountModel::new(g, 0.1).unwrap();
    m.train(g, &program_traces(500, 2));
    let cfg = DecodeConfig::strict(80);
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = gen_tree(&p, &m, &mut rng, cfg).unwrap();
        assert!(p.check(&d.tree).valid);
        let l = log_likelihood(&p, &m, &d.tree, cfg).unwrap();
        assert!((l.logp - d.logp()).abs() <= 1e-9 * d.steps().max(1) as f64);
        assert_eq!(l.trace.steps.len(), d.trace.steps.len());
    }
}

#[test]
fn save_load_round_trip_and_grammar_check() {
    let p = ProgramSemantics::builtin();
    let g = p.grammar();
    let mut m = CountModel::new(g, 0.25).unwrap();
    m.train(g, &program_traces(100, 4));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    m.save(&path).unwrap();
    let back = CountModel::load(g, &path).unwrap();
    assert_eq!(back.to_json(), m.to_json());
    assert_eq!(back.alpha(), 0.25);

    let toy = GrammarId::Toy.load_builtin();
    assert!(matches!(
        CountModel::load(&toy, &path),
        Err(ModelError::GrammarMismatch { .. })
    ));
    let bumped = m.to_json().replace("\"version\": 1", "\"version\": 99");
    assert!(matches!(
        CountModel::from_json(g, &bumped),
        Err(ModelError::Version(99))
    ));
    assert!(matches!(
        CountModel::from_json(g, "{"),
        Err(ModelError::Format(_))
    ));
    assert!(matches!(
        CountModel::load(g, &dir.path().join("missing.json")),
        Err(ModelError::Io(_))
    ));
}

#[test]
fn counts_are_nonnegative_sums_of_rule_steps() {
    let p = ProgramSemantics::builtin();
    let g = p.grammar();
    let traces = program_traces(100, 5);
    let mut m = CountModel::new(g, 0.1).unwrap();
    m.train(g, &traces);
    let root_steps = traces
        .iter()
        .flat_map(|t| &t.steps)
        .filter(|s| matches!(s, TraceStep::Rule { depth: 0, .. }))
        .count() as u64;
    let start = g.start();
    let total: u64 = (0..g.alternatives(start).len())
        .map(|a| m.count(start, None, 0, a))
        .sum();
    assert_eq!(total, root_steps);
    assert_eq!(total, 100);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn training_ignores_corpus_order(seed in any::<u64>(), swaps in prop::collection::vec((0usize..40, 0usize..40), 0..40)) {
        let g = GrammarId::Program.load_builtin();
        let traces = program_traces(40, seed);
        let mut shuffled = traces.clone();
        for (i, j) in swaps {
            shuffled.swap(i, j);
        }
        let mut a = CountModel::new(&g, 0.1).unwrap();
        a.train(&g, &traces);
        let mut b = CountModel::new(&g, 0.1).unwrap();
        b.train(&g, &shuffled);
        prop_assert_eq!(a.to_json(), b.to_json());
    }
}
