use std::fs;
use std::path::Path;

use serde_json::Value;

use sdgen::cli::{run, EXIT_FAILED, EXIT_OK, EXIT_USAGE};

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

fn rows(text: &str) -> Vec<Value> {
    text.lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn parse_reports_rule_sequences_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "in.txt", "CCC\n\nC-1CC-1\nCC\n");
    let (code, out, _) = call(&["--grammar", "toy", "parse", &f]);
    assert_eq!(code, EXIT_OK);
    let r = rows(&out);
    assert_eq!(r.len(), 3);
    assert_eq!(r[0]["ok"], true);
    assert_eq!(r[0]["rule_sequence"].as_array().unwrap().len(), 3);
    assert_eq!(r[2]["ok"], false);
    assert!(r[2]["error"].is_string());

    let (code, _, _) = call(&["--grammar", "toy", "--strict", "parse", &f]);
    assert_eq!(code, EXIT_FAILED);
}

#[test]
fn empty_input_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "empty.txt", "");
    let (code, out, err) = call(&["--strict", "check", &f]);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    assert!(err.contains("valid 0/0"));
}

#[test]
fn check_lists_violations_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(
        dir.path(),
        "mols.smi",
        "C1CC1\nC1CC\nC(=O)(=O)(=O)C\nC((C\n",
    );
    let (code, out, err) = call(&["--grammar", "smiles", "--strict", "check", &f]);
    assert_eq!(code, EXIT_FAILED);
    let r = rows(&out);
    assert_eq!(r[0]["valid"], true);
    assert_eq!(r[1]["violations"][0]["rule"], "unclosed-ring");
    assert_eq!(r[2]["violations"][0]["rule"], "valence");
    assert_eq!(r[3]["violations"][0]["rule"], "parse-error");
    assert!(err.contains("valid 1/4 (0.25000)"), "{err}");
}

#[test]
fn sample_is_deterministic_per_seed_and_job_count() {
    let args = |jobs: &str, seed: &str| {
        call(&[
            "--grammar",
            "smiles",
            "--seed",
            seed,
            "--jobs",
            jobs,
            "sample",
            "-n",
            "40",
        ])
        .1
    };
    let a = args("1", "5");
    assert_eq!(a, args("4", "5"));
    assert_ne!(a, args("1", "6"));
    for r in rows(&a) {
        assert_eq!(r["complete"], true);
        assert!(r["logp"].as_f64().unwrap() <= 0.0);
    }
}

#[test]
fn toy_likelihoods_and_blocked_rows() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "toy.txt", "CCC\nC-1CC=1\n");
    let (code, out, err) = call(&["--grammar", "toy", "likelihood", &f]);
    assert_eq!(code, EXIT_OK);
    let r = rows(&out);
    assert!((r[0]["logp"].as_f64().unwrap() - 0.5f64.ln()).abs() < 1e-12);
    assert_eq!(r[1]["logp"], "-inf");
    assert!(r[1]["blocked"].is_object());
    assert!(err.contains("over 1 of 2 lines"));
}

#[test]
fn trained_model_lowers_nll() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train.txt");
    let held = dir.path().join("held.txt");
    let model = dir.path().join("model.json");
    let (t, h, m) = (
        train.to_str().unwrap(),
        held.to_str().unwrap(),
        model.to_str().unwrap(),
    );
    assert_eq!(
        call(&["--seed", "1", "-o", t, "gen-corpus", "-n", "900"]).0,
        EXIT_OK
    );
    assert_eq!(
        call(&["--seed", "2", "-o", h, "gen-corpus", "-n", "100"]).0,
        EXIT_OK
    );
    let (code, _, err) = call(&["-o", m, "train", t]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(err.contains("trained on 900 of 900"));

    let nll = |scorer: &str| -> f64 {
        let out = call(&["--scorer", scorer, "likelihood", h]).1;
        let r = rows(&out);
        assert_eq!(r.len(), 100);
        -r.iter().map(|x| x["logp"].as_f64().unwrap()).sum::<f64>() / 100.0
    };
    assert!(nll(m) < nll("uniform"));

    let (code, _, err) = call(&["--grammar", "smiles", "--scorer", m, "sample"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("grammar"), "{err}");
    assert_eq!(call(&["train", t]).0, EXIT_USAGE);
}

#[test]
fn distance_rows() {
    let dir = tempfile::tempdir().unwrap();
    let target = write(dir.path(), "t", "v1=sin(v0);v2=exp(v1);v3=v2-1;return:v3\n");
    for (prog, want) in [
        ("v5=6+v0;v6=sin(v5);return:v6", "0.1436"),
        ("v2=1/5;v9=-1;v7=v2+v2;return:v7", "0.5497"),
        ("v7=5+v0;v5=cos(v7);return:v5", "0.1742"),
    ] {
        let c = write(dir.path(), "c", prog);
        let (code, out, _) = call(&["distance", &c, &target]);
        assert_eq!(code, EXIT_OK);
        assert_eq!(out.trim(), want);
    }
    let bad = write(dir.path(), "bad", "v1=;return:v1\n");
    assert_eq!(call(&["distance", &bad, &target]).0, EXIT_USAGE);
}

#[test]
fn gen_corpus_lines_check_clean() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.txt");
    let ps = p.to_str().unwrap();
    call(&[
        "--seed",
        "3",
        "-o",
        ps,
        "gen-corpus",
        "-n",
        "200",
        "--max-statements",
        "3",
    ]);
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().count(), 200);
    assert!(text.lines().all(|l| l.matches(';').count() <= 3));
    let (code, _, err) = call(&["--strict", "check", ps]);
    assert_eq!(code, EXIT_OK);
    assert!(err.contains("valid 200/200"));
}

#[test]
fn estimate_reports_full_validity() {
    let (code, out, _) = call(&[
        "--grammar",
        "program",
        "estimate",
        "--contexts",
        "20",
        "--decodes",
        "10",
    ]);
    assert_eq!(code, EXIT_OK);
    let r: Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(r["decodes"], 200);
    assert_eq!(r["validity"], 1.0);
}

#[test]
fn grammar_dir_overrides_shipped_grammar() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    // The shipped toy grammar, reformatted.
    write(
        dir.path(),
        "toy_smiles.grm",
        "# local copy\n<s> -> <atom> 'C' <atom>\n<atom> -> 'C'\n    | 'C' <bond> <digit>\n\
         <bond> -> '-' | '=' | '#'\n\
         <digit> -> '1' | '2' | '3' | '4' | '5' | '6' | '7' | '8' | '9'\n",
    );
    let (code, out, err) = call(&["--grammar", "toy", "--grammar-dir", d, "sample", "-n", "30"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let texts: Vec<String> = rows(&out)
        .iter()
        .map(|r| r["text"].as_str().unwrap().to_string())
        .collect();
    assert!(texts.iter().any(|t| t == "CCC"));
    assert!(texts.iter().any(|t| t.len() == 7));

    write(
        dir.path(),
        "toy_smiles.grm",
        "<s> -> <atom> 'C' <atom>\n<atom> -> 'C'\n<bond> -> '-' | '=' | '#'\n<digit> -> '1'\n",
    );
    let (code, _, err) = call(&["--grammar", "toy", "--grammar-dir", d, "sample"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(
        err.contains("toy_smiles.grm") && err.contains("production 2"),
        "{err}"
    );

    write(
        dir.path(),
        "toy_smiles.grm",
        "<s> -> <atom> 'C' <atom>\n<atom> -> 'C' <bond> <digit> | 'C'\n\
         <bond> -> '-' | '=' | '#'\n<digit> -> '1' | '2' | '3' | '4' | '5' | '6' | '7' | '8' | '9'\n",
    );
    assert_eq!(
        call(&["--grammar", "toy", "--grammar-dir", d, "sample"]).0,
        EXIT_USAGE
    );
    write(dir.path(), "toy_smiles.grm", "<s> -> <nowhere>\n");
    assert_eq!(
        call(&["--grammar", "toy", "--grammar-dir", d, "sample"]).0,
        EXIT_USAGE
    );
    fs::remove_file(dir.path().join("toy_smiles.grm")).unwrap();
    assert_eq!(
        call(&["--grammar", "toy", "--grammar-dir", d, "sample"]).0,
        EXIT_USAGE
    );
}
