//! The `sdgen` command line: parse, check, sample, estimate, likelihood,
//! train, distance and gen-corpus.
//!
//! Machine-readable results go to stdout (or `--output`) as JSON lines;
//! human summaries go to stderr. Exit codes: 0 on success, 1 when
//! `--strict` is set and some item failed, 2 on usage or configuration
//! errors.

mod config;
mod frontend;

pub use config::{RunConfig, ScorerSpec};
pub use frontend::Frontend;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde_json::{json, Value as Json};
use thiserror::Error;

use crate::decoder::{BudgetMode, DecodeError, Likelihood};
use crate::grammar::{tree_to_rule_sequence, GrammarError};
use crate::grammars::GrammarId;
use crate::program::{self, Program};
use crate::rng::item_rng;
use crate::scorer::{AnyScorer, CountModel, ModelError, Uniform, DEFAULT_ALPHA};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("config {}: {source}", path.display())]
    Config {
        path: PathBuf,
        source: toml::de::Error,
    },
    #[error("grammar {}: {source}", path.display())]
    Grammar { path: PathBuf, source: GrammarError },
    #[error("grammar {}: production {index} is `{found}`, expected `{expected}`", path.display())]
    Incompatible {
        path: PathBuf,
        index: usize,
        expected: String,
        found: String,
    },
    #[error("scorer: {0}")]
    Model(#[from] ModelError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sdgen",
    version,
    about = "Syntax-directed generation and checking of programs and SMILES"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every command. Unset flags fall back to the config file,
/// then to defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// program, smiles or toy.
    #[arg(long, global = true)]
    pub grammar: Option<GrammarId>,
    /// `uniform` or the path of a trained count model.
    #[arg(long, global = true)]
    pub scorer: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub max_steps: Option<usize>,
    /// strict-budget or paper-truncate.
    #[arg(long, global = true)]
    pub budget_mode: Option<BudgetMode>,
    /// Worker threads for batch commands.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Exit with status 1 if any item fails.
    #[arg(long, global = true)]
    pub strict: bool,
    /// TOML file with any of the fields above.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    /// Directory with replacement grammar files.
    #[arg(long, global = true, env = "SDGEN_GRAMMAR_DIR")]
    pub grammar_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse each line and print its rule sequence.
    Parse { files: Vec<PathBuf> },
    /// Check each line with the offline semantic checker.
    Check { files: Vec<PathBuf> },
    /// Decode samples.
    Sample {
        #[arg(short, long, default_value_t = 10)]
        n: usize,
    },
    /// Monte Carlo validity of the decoder.
    Estimate {
        #[arg(long, default_value_t = 1000)]
        contexts: usize,
        #[arg(long, default_value_t = 100)]
        decodes: usize,
    },
    /// Teacher-forced log-likelihood of each line.
    Likelihood { files: Vec<PathBuf> },
    /// Fit a count model on a corpus; `--output` names the model file.
    Train {
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Distance between two programs, one per file.
    Distance { candidate: PathBuf, target: PathBuf },
    /// Generate a random valid program corpus.
    GenCorpus {
        #[arg(short, long)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        max_statements: usize,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(failed) => {
            if failed && cli.common.strict {
                EXIT_FAILED
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

/// Runs a parsed command. Returns whether some item failed.
pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool, CliError> {
    let cfg = RunConfig::resolve(&cli.common)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    if let Command::Train { corpus, alpha } = &cli.command {
        return train(&cfg, &pool, corpus, *alpha, err);
    }
    if let Command::Distance { candidate, target } = &cli.command {
        return distance(candidate, target, out);
    }
    let mut file;
    let sink: &mut dyn Write = match &cfg.output {
        Some(path) => {
            file = io::BufWriter::new(fs::File::create(path).map_err(CliError::io(path))?);
            &mut file
        }
        None => out,
    };
    let failed = match &cli.command {
        Command::Parse { files } => parse(&cfg, &pool, files, sink),
        Command::Check { files } => check(&cfg, &pool, files, sink, err),
        Command::Sample { n } => sample(&cfg, &pool, *n, sink, err),
        Command::Estimate { contexts, decodes } => {
            estimate(&cfg, &pool, *contexts, *decodes, sink, err)
        }
        Command::Likelihood { files } => likelihood(&cfg, &pool, files, sink, err),
        Command::GenCorpus { n, max_statements } => {
            gen_corpus(&cfg, *n, *max_statements, sink, err)
        }
        Command::Train { .. } | Command::Distance { .. } => unreachable!("handled above"),
    }?;
    sink.flush().map_err(CliError::io("<output>"))?;
    Ok(failed)
}

/// Non-empty lines of the given files, or of stdin when none are given.
pub fn read_lines(files: &[PathBuf]) -> Result<Vec<String>, CliError> {
    let mut text = String::new();
    if files.is_empty() {
        io::stdin()
            .read_to_string(&mut text)
            .map_err(CliError::io("<stdin>"))?;
    } else {
        for f in files {
            text.push_str(&fs::read_to_string(f).map_err(CliError::io(f))?);
            text.push('\n');
        }
    }
    Ok(text
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect())
}

fn emit(sink: &mut dyn Write, value: &Json) -> Result<(), CliError> {
    writeln!(sink, "{value}").map_err(CliError::io("<output>"))
}

/// JSON number, or a string for non-finite values.
fn num(x: f64) -> Json {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        json!("nan")
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn parse(
    cfg: &RunConfig,
    pool: &ThreadPool,
    files: &[PathBuf],
    sink: &mut dyn Write,
) -> Result<bool, CliError> {
    let fe = cfg.frontend()?;
    let lines = read_lines(files)?;
    let rows: Vec<Json> = pool.install(|| {
        lines
            .par_iter()
            .map(|line| match fe.parse(line) {
                Ok(tree) => {
                    let seq = tree_to_rule_sequence(fe.grammar(), &tree)
                        .expect("parsed trees are complete");
                    json!({"input": line, "ok": true, "rule_sequence": seq})
                }
                Err(e) => json!({"input": line, "ok": false, "error": e}),
            })
            .collect()
    });
    let mut failed = false;
    for row in &rows {
        failed |= row["ok"] == json!(false);
        emit(sink, row)?;
    }
    Ok(failed)
}

fn check(
    cfg: &RunConfig,
    pool: &ThreadPool,
    files: &[PathBuf],
    sink: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<bool, CliError> {
    let fe = cfg.frontend()?;
    let lines = read_lines(files)?;
    let rows: Vec<(bool, Json)> = pool.install(|| {
        lines
            .par_iter()
            .map(|line| match fe.parse(line) {
                Ok(tree) => {
                    let r = fe.check(&tree);
                    (
                        r.valid,
                        json!({"input": line, "valid": r.valid, "violations": r.violations}),
                    )
                }
                Err(e) => {
                    let v = json!([{"location": 0, "rule": "parse-error", "detail": e}]);
                    (
                        false,
                        json!({"input": line, "valid": false, "violations": v}),
                    )
                }
            })
            .collect()
    });
    let valid = rows.iter().filter(|r| r.0).count();
    for (_, row) in &rows {
        emit(sink, row)?;
    }
    let frac = if rows.is_empty() {
        1.0
    } else {
        valid as f64 / rows.len() as f64
    };
    let _ = writeln!(err, "valid {valid}/{} ({frac:.5})", rows.len());
    Ok(valid < rows.len())
}

fn sample(
    cfg: &RunConfig,
    pool: &ThreadPool,
    n: usize,
    sink: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<bool, CliError> {
    let fe = cfg.frontend()?;
    let scorer = cfg.scorer(fe.grammar())?;
    let dc = cfg.decode_config();
    let rows: Vec<(bool, bool, Json)> = pool.install(|| {
        (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(cfg.seed, i as u64);
            let d = fe.sample(&scorer, &mut rng, dc)?;
            let text = d.tree.yield_string(fe.grammar());
            let valid = d.complete && fe.check(&d.tree).valid;
            let row = json!({"text": text, "complete": d.complete, "steps": d.steps(), "logp": num(d.logp())});
            Ok((d.complete, valid, row))
        })
        .collect::<Result<_, DecodeError>>()
    })?;
    for (_, _, row) in &rows {
        emit(sink, row)?;
    }
    let complete = rows.iter().filter(|r| r.0).count();
    let valid = rows.iter().filter(|r| r.1).count();
    let _ = writeln!(err, "{n} decodes: {complete} complete, {valid} valid");
    Ok(valid < n)
}

fn estimate(
    cfg: &RunConfig,
    pool: &ThreadPool,
    contexts: usize,
    decodes: usize,
    sink: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<bool, CliError> {
    let fe = cfg.frontend()?;
    let scorer = cfg.scorer(fe.grammar())?;
    let r = pool.install(|| fe.estimate(&scorer, contexts, decodes, cfg.seed, cfg.decode_config()));
    emit(sink, &serde_json::to_value(&r).expect("report serializes"))?;
    let _ = writeln!(
        err,
        "validity {:.5}, completion {:.5}, mean steps {:.2} over {} decodes",
        r.validity, r.completion_rate, r.mean_steps, r.decodes
    );
    Ok(r.valid < r.decodes)
}

fn likelihood_row(line: &str, l: Result<Likelihood, String>) -> (Option<f64>, Json) {
    match l {
        Ok(l) => {
            let finite = l.logp.is_finite().then_some(l.logp);
            (
                finite,
                json!({"text": line, "logp": num(l.logp), "blocked": l.blocked}),
            )
        }
        Err(e) => (
            None,
            json!({"text": line, "logp": num(f64::NEG_INFINITY), "error": e}),
        ),
    }
}

fn likelihood(
    cfg: &RunConfig,
    pool: &ThreadPool,
    files: &[PathBuf],
    sink: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<bool, CliError> {
    let fe = cfg.frontend()?;
    let scorer = cfg.scorer(fe.grammar())?;
    let dc = cfg.decode_config();
    let lines = read_lines(files)?;
    let rows: Vec<(Option<f64>, Json)> = pool.install(|| {
        lines
            .par_iter()
            .map(|line| {
                let l = fe
                    .parse(line)
                    .and_then(|t| fe.likelihood(&scorer, &t, dc).map_err(|e| e.to_string()));
                likelihood_row(line, l)
            })
            .collect()
    });
    for (_, row) in &rows {
        emit(sink, row)?;
    }
    let finite: Vec<f64> = rows.iter().filter_map(|r| r.0).collect();
    if !finite.is_empty() {
        let nll = -finite.iter().sum::<f64>() / finite.len() as f64;
        let _ = writeln!(
            err,
            "mean NLL {nll:.6} over {} of {} lines",
            finite.len(),
            rows.len()
        );
    }
    Ok(finite.len() < rows.len())
}

fn train(
    cfg: &RunConfig,
    pool: &ThreadPool,
    corpus: &Path,
    alpha: f64,
    err: &mut dyn Write,
) -> Result<bool, CliError> {
    let Some(path) = &cfg.output else {
        return Err(CliError::Usage(
            "train needs --output for the model file".into(),
        ));
    };
    let fe = cfg.frontend()?;
    let dc = cfg.decode_config();
    let lines = read_lines(&[corpus.to_path_buf()])?;
    let traces: Vec<Option<_>> = pool.install(|| {
        lines
            .par_iter()
            .map(|line| {
                let tree = fe.parse(line).ok()?;
                let l = fe
                    .likelihood(&AnyScorer::Uniform(Uniform), &tree, dc)
                    .ok()?;
                l.blocked.is_none().then_some(l.trace)
            })
            .collect()
    });
    let mut model = CountModel::new(fe.grammar(), alpha)?;
    model.train(fe.grammar(), traces.iter().flatten());
    model.save(path)?;
    let used = traces.iter().flatten().count();
    let _ = writeln!(err, "trained on {used} of {} lines", lines.len());
    Ok(used < lines.len())
}

fn read_program(path: &Path) -> Result<Program, CliError> {
    let lines = read_lines(&[path.to_path_buf()])?;
    let first = lines
        .first()
        .ok_or_else(|| CliError::Usage(format!("{} is empty", path.display())))?;
    Program::parse(first).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn distance(candidate: &Path, target: &Path, out: &mut dyn Write) -> Result<bool, CliError> {
    let d = program::distance(&read_program(candidate)?, &read_program(target)?);
    writeln!(out, "{d:.4}").map_err(CliError::io("<output>"))?;
    Ok(false)
}

fn gen_corpus(
    cfg: &RunConfig,
    n: usize,
    max_statements: usize,
    sink: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<bool, CliError> {
    if max_statements == 0 {
        return Err(CliError::Usage(
            "--max-statements must be at least 1".into(),
        ));
    }
    for p in program::gen_corpus(n, max_statements, cfg.seed) {
        writeln!(sink, "{p}").map_err(CliError::io("<output>"))?;
    }
    let _ = writeln!(err, "wrote {n} programs");
    Ok(false)
}

#[cfg(test)]
mod tests;
