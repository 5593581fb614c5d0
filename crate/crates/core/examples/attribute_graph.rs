//! A hand-written attribute grammar: declare attributes, attach rules,
//! check the dependency graph and evaluate a tree offline.
//!
//! cargo run --example attribute_graph

use sdgen::attr::{
    build_dependency_graph, check_noncircular, evaluate_offline, AttrKind, CheckFn, Domain,
    EvalOrder, RuleFn, Schema, Value,
};
use sdgen::grammar::{rule_sequence_to_tree, Grammar};

fn main() {
    // Balanced-looking lists of a's and b's; `count` must stay under 4.
    let g = Grammar::load("<list> -> <item> <list> | <item>\n<item> -> 'a' | 'b'").unwrap();
    let mut s = Schema::new(&g);
    s.declare(&g, "list", "count", AttrKind::Synthesized, Domain::Counter)
        .unwrap();
    s.declare(&g, "list", "ok", AttrKind::Synthesized, Domain::Flag)
        .unwrap();
    s.rule(
        &g,
        "<list> -> <item> <list>",
        "0.count",
        &["2.count"],
        RuleFn::CounterAdd(1),
    )
    .unwrap();
    s.rule(
        &g,
        "<list> -> <item>",
        "0.count",
        &[],
        RuleFn::Const(Value::Counter(1)),
    )
    .unwrap();
    for p in ["<list> -> <item> <list>", "<list> -> <item>"] {
        s.rule(
            &g,
            p,
            "0.ok",
            &["0.count"],
            RuleFn::Check {
                check: CheckFn::AtMost(3),
                id: "too-long".into(),
            },
        )
        .unwrap();
    }

    for seq in [
        vec![1, 2],
        vec![0, 2, 0, 3, 1, 2],
        vec![0, 2, 0, 2, 0, 3, 1, 3],
    ] {
        let tree = rule_sequence_to_tree(&g, &seq).unwrap();
        let graph = build_dependency_graph(&s, &tree).unwrap();
        let e = evaluate_offline(&s, &g, &tree, EvalOrder::Forward).unwrap();
        let count = e.attrs.value(&s, &tree, tree.root(), "count").unwrap();
        println!(
            "{:<6} {} attribute instances, noncircular {}, count {count}, violations {:?}",
            tree.yield_string(&g),
            graph.len(),
            check_noncircular(&graph),
            e.violations
                .iter()
                .map(|v| v.rule.as_str())
                .collect::<Vec<_>>()
        );
    }
}
