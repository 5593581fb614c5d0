use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::attr::{build_dependency_graph, check_noncircular, evaluate_offline, EvalOrder};
use crate::decoder::{gen_tree, log_likelihood, DecodeConfig, Semantics};
use crate::grammar::{rule_sequence_to_tree, tree_to_rule_sequence};
use crate::scorer::Uniform;
use crate::GrammarId;

fn sem() -> SmilesSemantics {
    SmilesSemantics::builtin()
}

fn cfg() -> DecodeConfig {
    DecodeConfig::strict(GrammarId::Smiles.default_max_steps())
}

fn check(text: &str) -> CheckReport {
    check_smiles_text(text).unwrap()
}

fn sample_lines() -> Vec<String> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/smiles_sample.smi");
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(str::to_string)
        .collect()
}

#[test]
fn parser_examples() {
    let g = GrammarId::Smiles.load_builtin();
    for ok in [
        "C1CC1",
        "c1ccccc1",
        "ClCBr",
        "[NH4+]",
        "[13C@@H](F)(Cl)Br",
        "C=1CC=1",
        "C(C)(=O)N",
    ] {
        let t = parse_smiles(&g, ok).unwrap();
        assert!(t.is_complete(&g));
        assert_eq!(t.yield_string(&g), ok);
    }
    assert!(matches!(
        parse_smiles(&g, "C((C)"),
        Err(ParseError::Syntax { position: 2, .. })
    ));
    assert!(matches!(
        parse_smiles(&g, "CC%12"),
        Err(ParseError::Lexical {
            position: 2,
            found: '%'
        })
    ));
    assert!(matches!(
        parse_smiles(&g, "C9"),
        Err(ParseError::Lexical {
            position: 1,
            found: '9'
        })
    ));
    assert!(parse_smiles(&g, "").is_err());
    assert!(parse_smiles(&g, "C(C)1").is_err());
    assert!(parse_smiles(&g, "[H]").is_err());
}

#[test]
fn checker_examples() {
    assert!(check("C1CC1").valid);
    assert!(check("C1CC").has(UNCLOSED_RING));
    let r = check("C(=O)(=O)(=O)C");
    assert!(r.has(VALENCE));
    assert_eq!(r.first().unwrap().location, 0);
    assert!(check("O=C=O").valid);
    assert!(check("C1CC1C1CC1").valid);
    assert!(check("C11").has(RINGBOND_REPEAT));
    assert!(check("C=1CC-1").has(RING_BOND_MISMATCH));
    assert!(check("C=1CC1").valid);
    assert!(!check("C#1CCCC1").has(VALENCE));
    assert!(check("C#1CCC=1").has(RING_BOND_MISMATCH));
    assert!(check("FC(F)(F)(F)F").has(VALENCE));
    assert!(check("[NH4+]").valid);
    assert!(check("[CH5]").has(VALENCE));
    assert!(check("C1C1").valid);
}

#[test]
fn ledger_reuses_digits_after_closing() {
    let mut l = RingLedger::default();
    let at = |atom| OpenRing {
        atom,
        bond: None,
        position: atom,
    };
    assert_eq!(l.feed(1, at(0)), RingEvent::Opened);
    assert!(matches!(l.feed(1, at(2)), RingEvent::Closed { partner } if partner.atom == 0));
    assert_eq!(l.feed(1, at(3)), RingEvent::Opened);
    assert!(l.open_ring(1).is_some());
    assert_eq!(l.closed, vec![(0, 2)]);
}

#[test]
fn sample_round_trips_and_is_valid() {
    let s = sem();
    let g = s.grammar();
    let lines = sample_lines();
    assert_eq!(lines.len(), 5000);
    for line in &lines {
        let tree = parse_smiles(g, line).unwrap();
        let seq = tree_to_rule_sequence(g, &tree).unwrap();
        let back = rule_sequence_to_tree(g, &seq).unwrap();
        assert_eq!(back.yield_string(g), *line);
        assert!(s.check(&tree).valid, "{line}");
    }
}

#[test]
fn sample_has_finite_likelihood() {
    let s = sem();
    for line in sample_lines().iter().step_by(5) {
        let tree = parse_smiles(s.grammar(), line).unwrap();
        let l = log_likelihood(&s, &Uniform, &tree, cfg()).unwrap();
        assert!(l.logp.is_finite(), "{line}");
    }
}

#[test]
fn schema_agrees_with_implied_closures() {
    let s = sem();
    let g = s.grammar();
    for line in sample_lines()
        .iter()
        .take(300)
        .chain(["C1CC1C1CC1".to_string()].iter())
    {
        let tree = parse_smiles(g, line).unwrap();
        assert!(check_noncircular(
            &build_dependency_graph(s.schema(), &tree).unwrap()
        ));
        let e = evaluate_offline(s.schema(), g, &tree, EvalOrder::Forward).unwrap();
        assert!(e.violations.is_empty(), "{line}");
        for (n, node) in tree.nodes() {
            if g.symbol(node.symbol).name == "branched atom" {
                let sa = e
                    .attrs
                    .value(s.schema(), &tree, n, "sa")
                    .and_then(|v| v.as_bits())
                    .unwrap();
                assert_eq!(sa, s.implied_lazy(&tree, n), "{line}");
            }
        }
    }
    let bad = parse_smiles(g, "C1CC").unwrap();
    let e = evaluate_offline(s.schema(), g, &bad, EvalOrder::Forward).unwrap();
    assert!(e.violations.iter().any(|v| v.rule == UNCLOSED_RING));
}

#[test]
fn decoded_molecules_are_valid() {
    let s = sem();
    let mut rings = 0;
    for seed in 0..1000 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = gen_tree(&s, &Uniform, &mut rng, cfg()).unwrap();
        assert!(out.complete);
        let text = out.tree.yield_string(s.grammar());
        let r = s.check(&out.tree);
        assert!(r.valid, "{text}: {:?}", r.violations);
        let l = log_likelihood(&s, &Uniform, &out.tree, cfg()).unwrap();
        assert_eq!(l.logp, out.logp(), "{text}");
        rings += text.contains('1') as usize;
    }
    assert!(rings > 0);
}

#[test]
fn tight_budgets_never_dead_end() {
    let s = sem();
    for t in [8usize, 15, 25, 40] {
        for seed in 0..300 {
            for c in [DecodeConfig::strict(t), DecodeConfig::truncate(t)] {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let out = gen_tree(&s, &Uniform, &mut rng, c).unwrap();
                if out.complete {
                    assert!(
                        s.check(&out.tree).valid,
                        "{}",
                        out.tree.yield_string(s.grammar())
                    );
                    assert!(out.tree.rule_count() <= t);
                }
            }
        }
    }
}

// Independent oracle for strings over {C, O, =, 1, (, )}: try every way of
// pairing the ring digits, accept pairings where no other occurrence of the
// digit sits between the two ends, then sum bond orders per atom. An atom
// may not carry the same digit twice.
fn oracle(m: &Molecule) -> bool {
    let mut edges: Vec<(usize, usize, u8)> = Vec::new();
    let mut atoms: Vec<u8> = Vec::new();
    let mut occ: Vec<(usize, u8, Option<Bond>)> = Vec::new();
    fn walk(
        c: &Chain,
        from: Option<(usize, Option<Bond>)>,
        atoms: &mut Vec<u8>,
        edges: &mut Vec<(usize, usize, u8)>,
        occ: &mut Vec<(usize, u8, Option<Bond>)>,
    ) {
        let mut prev = from;
        for (i, (bond, ba)) in c.links.iter().enumerate() {
            let a = atoms.len();
            atoms.push(ba.atom.element().max_valence());
            let link = if i == 0 {
                prev
            } else {
                prev.map(|(p, _)| (p, *bond))
            };
            if let Some((p, b)) = link {
                edges.push((p, a, b.map_or(1, |b| b.order())));
            }
            for r in &ba.rings {
                occ.push((a, r.digit, r.bond));
            }
            for br in &ba.branches {
                walk(&br.chain, Some((a, br.bond)), atoms, edges, occ);
            }
            prev = Some((a, None));
        }
    }
    walk(&m.chain, None, &mut atoms, &mut edges, &mut occ);

    fn pairings(
        free: Vec<usize>,
        occ: &[(usize, u8, Option<Bond>)],
        acc: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        let Some((&i, rest)) = free.split_first() else {
            out.push(acc.clone());
            return;
        };
        for (k, &j) in rest.iter().enumerate() {
            if occ[j].1 != occ[i].1 {
                continue;
            }
            let mut left = rest.to_vec();
            left.remove(k);
            acc.push((i, j));
            pairings(left, occ, acc, out);
            acc.pop();
        }
    }
    if (0..occ.len()).any(|i| (0..i).any(|j| occ[i].0 == occ[j].0 && occ[i].1 == occ[j].1)) {
        return false;
    }
    let mut all = Vec::new();
    pairings((0..occ.len()).collect(), &occ, &mut Vec::new(), &mut all);
    all.into_iter().any(|pairs| {
        let admissible = pairs.iter().all(|&(i, j)| {
            let (lo, hi) = (i.min(j), i.max(j));
            occ[i].0 != occ[j].0
                && (lo + 1..hi).all(|k| occ[k].1 != occ[i].1)
                && match (occ[i].2, occ[j].2) {
                    (Some(x), Some(y)) => x == y,
                    _ => true,
                }
        });
        if !admissible {
            return false;
        }
        let mut used = vec![0u8; atoms.len()];
        for &(a, b, o) in &edges {
            used[a] += o;
            used[b] += o;
        }
        for &(i, j) in &pairs {
            let o = occ[i].2.or(occ[j].2).map_or(1, |b| b.order());
            used[occ[i].0] += o;
            used[occ[j].0] += o;
        }
        used.iter().zip(&atoms).all(|(u, m)| u <= m)
    })
}

#[test]
fn masks_checker_and_oracle_agree_exhaustively() {
    let s = sem();
    let g = s.grammar();
    let alphabet = ['C', 'O', '=', '1', '(', ')'];
    let mut seen = [0usize; 2];
    let mut word = Vec::new();
    fn each(len: usize, word: &mut Vec<char>, alphabet: &[char], f: &mut dyn FnMut(&str)) {
        if word.len() == len {
            f(&word.iter().collect::<String>());
            return;
        }
        for &c in alphabet {
            word.push(c);
            each(len, word, alphabet, f);
            word.pop();
        }
    }
    for len in 1..=7 {
        each(len, &mut word, &alphabet, &mut |text| {
            let Ok(m) = Molecule::parse(text) else { return };
            let tree = m.to_tree(g);
            let want = oracle(&m);
            assert_eq!(s.check(&tree).valid, want, "{text}");
            let l = log_likelihood(&s, &Uniform, &tree, cfg()).unwrap();
            assert_eq!(l.logp.is_finite(), want, "{text}");
            seen[want as usize] += 1;
        });
    }
    assert!(seen[0] > 100 && seen[1] > 100, "{seen:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoded_yield_parses_back(seed in any::<u64>()) {
        let s = sem();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = gen_tree(&s, &Uniform, &mut rng, cfg()).unwrap();
        let text = out.tree.yield_string(s.grammar());
        let again = parse_smiles(s.grammar(), &text).unwrap();
        prop_assert_eq!(again.yield_string(s.grammar()), text.clone());
        prop_assert_eq!(Molecule::parse(&text).unwrap().to_string(), text.clone());
        prop_assert!(check_smiles_text(&text).unwrap().valid);
    }
}
