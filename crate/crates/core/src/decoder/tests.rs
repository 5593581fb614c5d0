use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::grammar::rule_sequence_to_tree;
use crate::scorer::Uniform;
use crate::toy::{self, ToySemantics};

fn toy_tree(sem: &ToySemantics, atoms: [Option<(&str, &str)>; 2]) -> DerivationTree {
    let g = sem.grammar();
    let mut seq = vec![g.find(toy::START).unwrap()];
    for a in atoms {
        match a {
            None => seq.push(g.find(toy::ATOM_PLAIN).unwrap()),
            Some((b, d)) => {
                seq.push(g.find(toy::ATOM_RING).unwrap());
                seq.push(g.find(&format!("<bond> -> '{b}'")).unwrap());
                seq.push(g.find(&format!("<digit> -> '{d}'")).unwrap());
            }
        }
    }
    rule_sequence_to_tree(g, &seq).unwrap()
}

const CFG: DecodeConfig = DecodeConfig {
    max_steps: 16,
    mode: BudgetMode::Strict,
};

#[test]
fn chain_likelihood_is_half() {
    let sem = ToySemantics::builtin();
    let t = toy_tree(&sem, [None, None]);
    let l = log_likelihood(&sem, &Uniform, &t, CFG).unwrap();
    assert!(l.blocked.is_none());
    assert!((l.logp - 0.5f64.ln()).abs() < 1e-12);
}

// Only the first ring bond is free: the second atom's bond and digit are
// fixed by <s>.matched.
#[test]
fn ring_likelihood_counts_one_free_ring_bond() {
    let sem = ToySemantics::builtin();
    let t = toy_tree(&sem, [Some(("-", "1")), Some(("-", "1"))]);
    let l = log_likelihood(&sem, &Uniform, &t, CFG).unwrap();
    let expected = 0.5f64.ln() + (1.0f64 / 3.0).ln() + (1.0f64 / 9.0).ln();
    assert!(
        (l.logp - expected).abs() < 1e-12,
        "{} vs {expected}",
        l.logp
    );
    let forced: Vec<f64> = l.trace.steps.iter().map(TraceStep::logp).collect();
    assert_eq!(forced.iter().filter(|&&x| x == 0.0).count(), 5);
}

// Oracle: the masked uniform decoder defines a distribution over the 28
// valid toy strings, so their probabilities sum to one.
#[test]
fn toy_distribution_normalizes() {
    let sem = ToySemantics::builtin();
    let mut total = (log_likelihood(&sem, &Uniform, &toy_tree(&sem, [None, None]), CFG)
        .unwrap()
        .logp)
        .exp();
    for b in ["-", "=", "#"] {
        for d in 1..=9 {
            let d = d.to_string();
            let t = toy_tree(&sem, [Some((b, &d)), Some((b, &d))]);
            total += log_likelihood(&sem, &Uniform, &t, CFG).unwrap().logp.exp();
        }
    }
    assert!((total - 1.0).abs() < 1e-12, "{total}");
}

#[test]
fn mismatched_ring_is_impossible() {
    let sem = ToySemantics::builtin();
    for atoms in [
        [Some(("-", "1")), Some(("=", "1"))],
        [Some(("-", "1")), Some(("-", "2"))],
        [Some(("-", "1")), None],
        [None, Some(("-", "1"))],
    ] {
        let t = toy_tree(&sem, atoms);
        assert!(!sem.check(&t).valid);
        let l = log_likelihood(&sem, &Uniform, &t, CFG).unwrap();
        assert_eq!(l.logp, f64::NEG_INFINITY);
        assert!(l.blocked.is_some());
    }
}

#[test]
fn samples_are_valid_and_replay_exactly() {
    let sem = ToySemantics::builtin();
    for seed in 0..2000 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = gen_tree(&sem, &Uniform, &mut rng, CFG).unwrap();
        assert!(out.complete);
        assert!(
            sem.check(&out.tree).valid,
            "{}",
            out.tree.yield_string(sem.grammar())
        );
        let l = log_likelihood(&sem, &Uniform, &out.tree, CFG).unwrap();
        assert_eq!(l.trace, out.trace);
        assert_eq!(l.logp, out.logp());
    }
}

#[test]
fn sampling_is_deterministic() {
    let sem = ToySemantics::builtin();
    let run = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = gen_tree(&sem, &Uniform, &mut rng, CFG).unwrap();
        (out.tree.yield_string(sem.grammar()), out.trace.to_jsonl())
    };
    assert_eq!(run(42), run(42));
}

#[test]
fn trace_jsonl_round_trips() {
    let sem = ToySemantics::builtin();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let out = gen_tree(&sem, &Uniform, &mut rng, CFG).unwrap();
    let text = out.trace.to_jsonl();
    assert_eq!(text.lines().count(), out.trace.steps.len());
    assert_eq!(DecodeTrace::from_jsonl(&text).unwrap(), out.trace);
}

#[test]
fn atom_masks_follow_the_lazy_bit() {
    let sem = ToySemantics::builtin();
    for ring in [false, true] {
        let mut s = Session::new(&sem, &Uniform, CFG);
        assert!(matches!(s.next_decision().unwrap(), Decision::Lazy { .. }));
        s.choose_lazy(ring).unwrap();
        let root = s.compute_mask().unwrap().unwrap();
        assert_eq!(root.allowed, vec![true]);
        s.choose_rule(0).unwrap();
        let atom = s.compute_mask().unwrap().unwrap();
        assert_eq!(atom.allowed, vec![!ring, ring]);
    }
}

#[test]
fn plain_grammar_terminates_under_strict_budget() {
    let g = Grammar::load("<e> -> <e> '+' <e> | 'x'").unwrap();
    let sem = Plain::new(&g);
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = gen_tree(&sem, &Uniform, &mut rng, DecodeConfig::strict(9)).unwrap();
        assert!(out.complete);
        assert!(out.steps() <= 9);
    }
    let mut incomplete = 0;
    for seed in 0..200 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = gen_tree(&sem, &Uniform, &mut rng, DecodeConfig::truncate(9)).unwrap();
        assert!(out.steps() <= 9);
        incomplete += !out.complete as usize;
    }
    assert!(incomplete > 0);
}

#[test]
fn zero_weight_scorer_is_an_error() {
    struct Zero;
    impl RuleScorer for Zero {
        fn rule_weights(&self, q: &crate::scorer::RuleQuery) -> Vec<f64> {
            vec![0.0; q.alternatives]
        }
        fn lazy_prob(&self, _q: &crate::scorer::LazyQuery) -> f64 {
            0.5
        }
    }
    struct Nan;
    impl RuleScorer for Nan {
        fn rule_weights(&self, q: &crate::scorer::RuleQuery) -> Vec<f64> {
            vec![f64::NAN; q.alternatives]
        }
        fn lazy_prob(&self, _q: &crate::scorer::LazyQuery) -> f64 {
            0.5
        }
    }
    let g = Grammar::load("<e> -> 'a' | 'b'").unwrap();
    let sem = Plain::new(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(
        gen_tree(&sem, &Zero, &mut rng, DecodeConfig::strict(4)),
        Err(DecodeError::ZeroMass { .. })
    ));
    assert!(matches!(
        gen_tree(&sem, &Nan, &mut rng, DecodeConfig::strict(4)),
        Err(DecodeError::BadWeight { .. })
    ));
}

#[test]
fn validity_estimate_for_toy() {
    let sem = ToySemantics::builtin();
    let r = estimate_validity(&sem, &Uniform, 10, 10, 1, CFG);
    assert_eq!(r.decodes, 100);
    assert_eq!(r.valid, 100);
    assert_eq!(r.validity, 1.0);
    let one = estimate_validity(&sem, &Uniform, 1, 1, 1, CFG);
    assert!(one.validity == 0.0 || one.validity == 1.0);
}
