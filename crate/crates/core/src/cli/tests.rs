use super::*;

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        std::iter::once("sdgen").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    fs::write(
        &path,
        "grammar = \"smiles\"\nseed = 7\nbudget-mode = \"paper-truncate\"\n",
    )
    .unwrap();
    let args = CommonArgs {
        config: Some(path.clone()),
        seed: Some(9),
        ..CommonArgs::default()
    };
    let c = RunConfig::resolve(&args).unwrap();
    assert_eq!(c.grammar, GrammarId::Smiles);
    assert_eq!(c.seed, 9);
    assert_eq!(c.max_steps, 278);
    assert_eq!(c.budget_mode, BudgetMode::Truncate);
    assert_eq!(c.scorer, ScorerSpec::Uniform);

    fs::write(&path, "colour = 1\n").unwrap();
    let args = CommonArgs {
        config: Some(path),
        ..CommonArgs::default()
    };
    assert!(matches!(
        RunConfig::resolve(&args),
        Err(CliError::Config { .. })
    ));
}

#[test]
fn defaults_follow_the_grammar() {
    for (id, t) in [(GrammarId::Program, 80), (GrammarId::Smiles, 278)] {
        let args = CommonArgs {
            grammar: Some(id),
            ..CommonArgs::default()
        };
        assert_eq!(RunConfig::resolve(&args).unwrap().max_steps, t);
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(call(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(call(&["sample", "--grammar", "lisp"]).0, EXIT_USAGE);
    assert_eq!(call(&["sample", "--jobs", "0"]).0, EXIT_USAGE);
    assert_eq!(call(&["check", "/nonexistent/file"]).0, EXIT_USAGE);
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("gen-corpus"));
}

#[test]
fn numbers_that_json_cannot_hold() {
    assert_eq!(num(f64::NEG_INFINITY), json!("-inf"));
    assert_eq!(num(-1.5), json!(-1.5));
}
