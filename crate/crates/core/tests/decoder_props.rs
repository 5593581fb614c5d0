use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdgen::decoder::{gen_tree, log_likelihood, Decision, DecodeConfig, Semantics, Session};
use sdgen::program::{gen_corpus, parse_program, ProgramSemantics};
use sdgen::scorer::Uniform;
use sdgen::smiles::{parse_smiles, SmilesSemantics};
use sdgen::toy::{parse_toy, ToySemantics};
use sdgen::GrammarId;

/// Walks random decodes; at random rule decisions forks the session, takes
/// every other allowed alternative and completes greedily. Returns the
/// number of forks, all of which must complete and pass the checker.
fn fork_and_complete<S: Semantics>(sem: &S, cfg: DecodeConfig, want: usize) -> usize {
    let mut forks = 0;
    let mut seed = 0u64;
    while forks < want {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        seed += 1;
        let mut s = Session::new(sem, &Uniform, cfg);
        loop {
            match s.next_decision().unwrap() {
                Decision::Done | Decision::Exhausted => break,
                Decision::Lazy { allowed, .. } => {
                    let v = if allowed[0] && allowed[1] {
                        rng.gen()
                    } else {
                        allowed[1]
                    };
                    s.choose_lazy(v).unwrap();
                }
                Decision::Rule(m) => {
                    let ok: Vec<usize> = (0..m.allowed.len()).filter(|&i| m.allowed[i]).collect();
                    let pick = ok[rng.gen_range(0..ok.len())];
                    if ok.len() > 1 && rng.gen_bool(0.3) {
                        for &alt in ok.iter().filter(|&&a| a != pick) {
                            let mut f = s.clone();
                            f.choose_rule(alt).unwrap();
                            assert!(
                                f.complete_greedily().unwrap(),
                                "greedy completion ran out of budget"
                            );
                            let text = f.tree().yield_string(sem.grammar());
                            assert!(sem.check(f.tree()).valid, "{text}");
                            forks += 1;
                        }
                    }
                    s.choose_rule(pick).unwrap();
                }
            }
        }
    }
    forks
}

#[test]
fn other_allowed_rules_still_complete_validly() {
    let p = ProgramSemantics::builtin();
    assert!(fork_and_complete(&p, DecodeConfig::strict(80), 1000) >= 1000);
    let s = SmilesSemantics::builtin();
    assert!(fork_and_complete(&s, DecodeConfig::strict(278), 1000) >= 1000);
    let t = ToySemantics::builtin();
    assert!(fork_and_complete(&t, DecodeConfig::strict(16), 1000) >= 1000);
}

#[test]
fn corpus_trees_have_finite_likelihood() {
    let p = ProgramSemantics::builtin();
    for prog in gen_corpus(2000, 5, 11) {
        let tree = parse_program(p.grammar(), &prog.to_string()).unwrap();
        let l = log_likelihood(&p, &Uniform, &tree, DecodeConfig::strict(80)).unwrap();
        assert!(l.logp.is_finite(), "{prog}");
    }
}

#[test]
fn masked_trees_have_zero_probability() {
    let p = ProgramSemantics::builtin();
    let tree = parse_program(p.grammar(), "v1=v2+1;return:v1").unwrap();
    let l = log_likelihood(&p, &Uniform, &tree, DecodeConfig::strict(80)).unwrap();
    assert_eq!(l.logp, f64::NEG_INFINITY);
    let b = l.blocked.unwrap();
    assert!(b.reason.contains("masked"), "{}", b.reason);
    assert_eq!(b.step, l.trace.steps.len());

    let s = SmilesSemantics::builtin();
    for bad in ["C1CC", "C(=O)(=O)(=O)C", "C=1CC#1", "C11CC1"] {
        let tree = parse_smiles(s.grammar(), bad).unwrap();
        let l = log_likelihood(&s, &Uniform, &tree, DecodeConfig::strict(278)).unwrap();
        assert_eq!(l.logp, f64::NEG_INFINITY, "{bad}");
        assert!(l.blocked.is_some());
    }

    let t = ToySemantics::builtin();
    let tree = parse_toy(t.grammar(), "C-1CC=1").unwrap();
    let l = log_likelihood(&t, &Uniform, &tree, DecodeConfig::strict(16)).unwrap();
    assert_eq!(l.logp, f64::NEG_INFINITY);
}

#[test]
fn budget_shortfall_blocks_teacher_forcing() {
    let p = ProgramSemantics::builtin();
    let text = "v1=sin(v0);v2=exp(v1);v3=v2-1;return:v3";
    let tree = parse_program(p.grammar(), text).unwrap();
    let steps = tree.rule_count();
    let fits = log_likelihood(&p, &Uniform, &tree, DecodeConfig::strict(steps)).unwrap();
    assert!(fits.logp.is_finite());
    let short = log_likelihood(&p, &Uniform, &tree, DecodeConfig::strict(steps - 1)).unwrap();
    assert_eq!(short.logp, f64::NEG_INFINITY);
}

#[test]
fn same_seed_same_trace() {
    for id in GrammarId::ALL {
        let cfg = DecodeConfig::strict(id.default_max_steps());
        let run = |seed| -> String {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            match id {
                GrammarId::Program => {
                    gen_tree(&ProgramSemantics::builtin(), &Uniform, &mut rng, cfg)
                }
                GrammarId::Smiles => gen_tree(&SmilesSemantics::builtin(), &Uniform, &mut rng, cfg),
                GrammarId::Toy => gen_tree(&ToySemantics::builtin(), &Uniform, &mut rng, cfg),
            }
            .unwrap()
            .trace
            .to_jsonl()
        };
        for seed in 0..20 {
            assert_eq!(run(seed), run(seed));
        }
        assert_ne!(
            (0..20).map(run).collect::<Vec<_>>().concat(),
            (20..40).map(run).collect::<Vec<_>>().concat()
        );
    }
}

#[test]
fn strict_decodes_never_exceed_the_budget() {
    let s = SmilesSemantics::builtin();
    let p = ProgramSemantics::builtin();
    for seed in 0..300 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = gen_tree(&s, &Uniform, &mut rng, DecodeConfig::strict(30)).unwrap();
        assert!(d.complete && d.steps() <= 30);
        let d = gen_tree(&p, &Uniform, &mut rng, DecodeConfig::strict(40)).unwrap();
        assert!(d.complete && d.steps() <= 40);
    }
}
