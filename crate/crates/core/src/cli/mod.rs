//! Command-line front end.
//!
//! Exit codes: `0` preserves / success, `1` not preserving (a counterexample
//! or refuting certificate was produced), `2` inconclusive, `64` input error,
//! `70` internal numerical failure.

pub mod json;
pub mod problem;
pub mod verify;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Read;
use std::time::Instant;

use crate::canonical::{extract, rebase_pd, Extracted, Rebased};
use crate::congruence::{diagonalize_family, diagonalize_pair, FamilyDiagonalization};
use crate::decide::{decide, decide_form, DecisionConfig, Outcome, DEFAULT_PATTERN_CAP};
use crate::falsify::{falsify, is_violation, sample_oracle, FalsifierConfig};
use crate::symmat::{SymMatrix, DEFAULT_TOL};
use problem::{ProblemFile, ProblemKind};

pub const EXIT_PRESERVES: i32 = 0;
pub const EXIT_NOT_PRESERVING: i32 = 1;
pub const EXIT_INCONCLUSIVE: i32 = 2;
pub const EXIT_INPUT: i32 = 64;
pub const EXIT_INTERNAL: i32 = 70;

/// Environment variable that replaces the built-in default tolerance.
pub const TOL_ENV: &str = "PDPKIT_TOL";

const FORMAT_HELP: &str = "\
Problem files are JSON objects with \"n\" and exactly one of:
  \"map\": N×N matrix (N = n(n+1)/2, rows or flat row-major) acting on svec
         coordinates ordered (1,1),(1,2),…,(1,n),(2,2),(2,3),…,(n,n), with
         off-diagonal coordinates scaled by √2;
  \"canonical\": {\"B\": [n×n, …], \"U\": [n×n, …]} for T(A) = Σ tr(A B_k) U_k;
  \"matrices\": [n×n, …] (diagonalize only).
Optional \"tol\" and \"seed\". Tolerance precedence: --tol, file, $PDPKIT_TOL, 1e-9.
Exit codes: 0 preserves/ok, 1 not preserving, 2 inconclusive, 64 input error, 70 internal error.";

#[derive(Parser, Debug)]
#[command(name = "pdpkit", version, about = "Positive definiteness preservation for linear maps on symmetric matrices", after_help = FORMAT_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether the map preserves positive definiteness.
    Decide(CommonArgs),
    /// Extract the trace form and re-base it onto a positive definite basis.
    Canonical(CommonArgs),
    /// Simultaneous congruence diagonalization of a matrix list (or the image basis).
    Diagonalize(CommonArgs),
    /// Search for a counterexample (descent falsifier plus random sampling).
    Falsify(CommonArgs),
    /// Re-check every claim in a decide or falsify report.
    Verify(CommonArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Input file (problem file, or report for verify); stdin when omitted or "-".
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Random samples drawn by the falsify oracle.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Include wall-clock timings (makes output non-reproducible).
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

enum Failure {
    Input(String),
    Internal(String),
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        match e {
            crate::Error::InvalidInput(_) | crate::Error::NotPositiveDefinite { .. } | crate::Error::DimensionMismatch { .. } => {
                Failure::Input(e.to_string())
            }
            other => Failure::Internal(other.to_string()),
        }
    }
}

struct Settings {
    tol: f64,
    seed: u64,
    falsifier: FalsifierConfig,
}

struct Rendered {
    code: i32,
    report: Value,
    text: String,
    warnings: Vec<String>,
}

fn value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Value {
    let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    value(&rows)
}

fn read_input(args: &CommonArgs, stdin: &mut dyn Read) -> Result<String, Failure> {
    match args.input.as_deref() {
        Some(path) if path != "-" => {
            std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("cannot read {path}: {e}")))
        }
        _ => {
            let mut s = String::new();
            stdin
                .read_to_string(&mut s)
                .map_err(|e| Failure::Input(format!("cannot read stdin: {e}")))?;
            Ok(s)
        }
    }
}

fn resolve(args: &CommonArgs, file_tol: Option<f64>, file_seed: Option<u64>, env_tol: Option<&str>) -> Result<Settings, Failure> {
    let env_tol = match env_tol {
        Some(s) => Some(
            s.trim()
                .parse::<f64>()
                .map_err(|_| Failure::Input(format!("{TOL_ENV} is not a number: {s:?}")))?,
        ),
        None => None,
    };
    let tol = args.tol.or(file_tol).or(env_tol).unwrap_or(DEFAULT_TOL);
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(Failure::Input(format!("tolerance must be positive, got {tol}")));
    }
    let seed = args.seed.or(file_seed).unwrap_or(0);
    let defaults = FalsifierConfig::default();
    let falsifier = FalsifierConfig {
        restarts: args.restarts.unwrap_or(defaults.restarts),
        max_iters: args.max_iters.unwrap_or(defaults.max_iters),
        seed,
        tol,
        ..defaults
    };
    if falsifier.restarts == 0 || falsifier.max_iters == 0 {
        return Err(Failure::Input("--restarts and --max-iters must be positive".into()));
    }
    Ok(Settings { tol, seed, falsifier })
}

fn load_problem(args: &CommonArgs, stdin: &mut dyn Read, env_tol: Option<&str>) -> Result<(ProblemFile, Settings), Failure> {
    let text = read_input(args, stdin)?;
    let problem = ProblemFile::parse(&text).map_err(Failure::Input)?;
    let settings = resolve(args, problem.tol, problem.seed, env_tol)?;
    Ok((problem, settings))
}

fn header(command: &str, n: usize, s: &Settings) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("n".into(), json!(n));
    m.insert("tol".into(), json!(s.tol));
    m.insert("seed".into(), json!(s.seed));
    m
}

fn outcome_code(o: Outcome) -> i32 {
    match o {
        Outcome::Preserves => EXIT_PRESERVES,
        Outcome::NotPreserving => EXIT_NOT_PRESERVING,
        Outcome::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn text_matrix(label: &str, m: &SymMatrix) -> String {
    let mut s = format!("{label}:\n");
    for row in m.rows() {
        let cells: Vec<String> = row.iter().map(|x| format!("{x:.6e}")).collect();
        s.push_str(&format!("  [{}]\n", cells.join(", ")));
    }
    s
}

fn cmd_decide(args: &CommonArgs, stdin: &mut dyn Read, env_tol: Option<&str>) -> Result<Rendered, Failure> {
    let (problem, s) = load_problem(args, stdin, env_tol)?;
    let map = problem
        .to_map()
        .ok_or_else(|| Failure::Input("decide needs a \"map\" or \"canonical\" problem".into()))?;
    let cfg = DecisionConfig {
        tol: s.tol,
        falsifier: s.falsifier.clone(),
        pattern_cap: DEFAULT_PATTERN_CAP,
    };
    let verdict = match &problem.kind {
        ProblemKind::Canonical(cf) => decide_form(cf, &cfg)?,
        _ => decide(&map, &cfg)?,
    };
    let mut r = header("decide", problem.n, &s);
    r.insert("map".into(), matrix_rows(map.matrix()));
    r.insert("outcome".into(), value(&verdict.outcome));
    r.insert("rule".into(), value(&verdict.rule()));
    r.insert("certificate".into(), value(&verdict.certificate));
    r.insert("canonical".into(), value(&verdict.form));
    if let Some(a) = &verdict.counterexample {
        r.insert("counterexample".into(), value(a));
    }
    let mut text = format!(
        "outcome: {:?}\nrule: {:?}\nrank: {}\n",
        verdict.outcome,
        verdict.rule(),
        verdict.form.as_ref().map_or(0, |f| f.rank())
    );
    if let Some(a) = &verdict.counterexample {
        text.push_str(&text_matrix("counterexample", a));
    }
    Ok(Rendered {
        code: outcome_code(verdict.outcome),
        report: Value::Object(r),
        text,
        warnings: problem.warnings,
    })
}

fn cmd_canonical(args: &CommonArgs, stdin: &mut dyn Read, env_tol: Option<&str>) -> Result<Rendered, Failure> {
    let (problem, s) = load_problem(args, stdin, env_tol)?;
    let map = problem
        .to_map()
        .ok_or_else(|| Failure::Input("canonical needs a \"map\" or \"canonical\" problem".into()))?;
    let mut r = header("canonical", problem.n, &s);
    r.insert("map".into(), matrix_rows(map.matrix()));
    let (code, status, text) = match extract(&map, s.tol)? {
        Extracted::ZeroMap => {
            r.insert("rank".into(), json!(0));
            (EXIT_NOT_PRESERVING, "zero_map", "status: zero_map\nrank: 0\n".to_string())
        }
        Extracted::Form(cf) => {
            r.insert("rank".into(), json!(cf.rank()));
            r.insert("extracted".into(), value(&cf));
            match rebase_pd(&cf, s.tol)? {
                Rebased::ImageHasNoPdElement { t_identity } => {
                    let text = format!("status: image_has_no_pd_element\nrank: {}\n", cf.rank())
                        + &text_matrix("T(I)", &t_identity);
                    r.insert("t_identity".into(), value(&t_identity));
                    (EXIT_NOT_PRESERVING, "image_has_no_pd_element", text)
                }
                Rebased::Form(pd) => {
                    let mut text = format!("status: ok\nrank: {}\n", pd.rank());
                    for (k, (b, u)) in pd.b.iter().zip(&pd.u).enumerate() {
                        text.push_str(&text_matrix(&format!("B_{}", k + 1), b));
                        text.push_str(&text_matrix(&format!("U_{}", k + 1), u));
                    }
                    r.insert("canonical".into(), value(&pd));
                    (EXIT_PRESERVES, "ok", text)
                }
            }
        }
    };
    r.insert("status".into(), json!(status));
    Ok(Rendered {
        code,
        report: Value::Object(r),
        text,
        warnings: problem.warnings,
    })
}

fn cmd_diagonalize(args: &CommonArgs, stdin: &mut dyn Read, env_tol: Option<&str>) -> Result<Rendered, Failure> {
    let (problem, s) = load_problem(args, stdin, env_tol)?;
    let mats = match &problem.kind {
        ProblemKind::Matrices(m) => m.clone(),
        ProblemKind::Canonical(cf) => cf.u.clone(),
        ProblemKind::Map(t) => match extract(t, s.tol)? {
            Extracted::ZeroMap => return Err(Failure::Input("zero map has no image basis".into())),
            Extracted::Form(cf) => match rebase_pd(&cf, s.tol)? {
                Rebased::Form(pd) => pd.u,
                Rebased::ImageHasNoPdElement { .. } => {
                    return Err(Failure::Input("image of the map contains no positive definite matrix".into()))
                }
            },
        },
    };
    let mut r = header("diagonalize", problem.n, &s);
    r.insert("matrices".into(), value(&mats));
    if mats.len() == 2 {
        let pair = diagonalize_pair(&mats[0], &mats[1], s.tol)?;
        let text = format!("kind: pair\nmu: {:?}\n", pair.mu);
        r.insert("kind".into(), json!("pair"));
        r.insert("mu_min".into(), json!(pair.mu_min()));
        r.insert("mu_max".into(), json!(pair.mu_max()));
        r.insert("mu".into(), value(&pair.mu));
        r.insert("w".into(), matrix_rows(&pair.w));
        return Ok(Rendered {
            code: EXIT_PRESERVES,
            report: Value::Object(r),
            text,
            warnings: problem.warnings.clone(),
        });
    }
    r.insert("kind".into(), json!("family"));
    match diagonalize_family(&mats, s.tol)? {
        FamilyDiagonalization::Diagonalizable(jd) => {
            let text = format!("kind: family\ndiagonalizable: true\nlambda rows: {:?}\n", (0..jd.n()).map(|i| jd.row(i)).collect::<Vec<_>>());
            r.insert("diagonalizable".into(), json!(true));
            r.insert("w".into(), matrix_rows(&jd.w));
            r.insert("lambda".into(), matrix_rows(&jd.lambda));
            Ok(Rendered {
                code: EXIT_PRESERVES,
                report: Value::Object(r),
                text,
                warnings: problem.warnings.clone(),
            })
        }
        FamilyDiagonalization::NotSimultaneouslyDiagonalizable { pair, commutator_norm } => {
            let text = format!(
                "kind: family\ndiagonalizable: false\npair: {pair:?}\ncommutator_norm: {commutator_norm:e}\n"
            );
            r.insert("diagonalizable".into(), json!(false));
            r.insert("pair".into(), json!([pair.0, pair.1]));
            r.insert("commutator_norm".into(), json!(commutator_norm));
            Ok(Rendered {
                code: EXIT_INCONCLUSIVE,
                report: Value::Object(r),
                text,
                warnings: problem.warnings.clone(),
            })
        }
    }
}

fn cmd_falsify(args: &CommonArgs, stdin: &mut dyn Read, env_tol: Option<&str>) -> Result<Rendered, Failure> {
    if args.trials == 0 {
        return Err(Failure::Input("--trials must be positive".into()));
    }
    let (problem, s) = load_problem(args, stdin, env_tol)?;
    let map = problem
        .to_map()
        .ok_or_else(|| Failure::Input("falsify needs a \"map\" or \"canonical\" problem".into()))?;
    let n = problem.n;
    let mut r = header("falsify", n, &s);
    r.insert("map".into(), matrix_rows(map.matrix()));
    r.insert("trials".into(), json!(args.trials));

    let pd_form = match extract(&map, s.tol)? {
        Extracted::ZeroMap => None,
        Extracted::Form(cf) => match rebase_pd(&cf, s.tol)? {
            Rebased::Form(pd) => Some(pd),
            Rebased::ImageHasNoPdElement { .. } => None,
        },
    };
    let counterexample = match &pd_form {
        None => {
            // T(I) is already not PD.
            let id = SymMatrix::identity(n);
            r.insert("source".into(), json!("t_identity"));
            Some(id)
        }
        Some(cf) => {
            let report = falsify(cf, &s.falsifier)?;
            let oracle = sample_oracle(cf, args.trials, s.seed, s.tol)?;
            r.insert("falsifier".into(), value(&report));
            r.insert("oracle_violation".into(), value(&oracle));
            r.insert("canonical".into(), value(cf));
            if report.found {
                r.insert("source".into(), json!("falsifier"));
                Some(report.best_a)
            } else if let Some(a) = oracle {
                r.insert("source".into(), json!("oracle"));
                Some(a)
            } else {
                None
            }
        }
    };
    let found = match &counterexample {
        Some(a) => is_violation(a, &map.apply(a)?, s.tol),
        None => false,
    };
    r.insert("found".into(), json!(found));
    let mut text = format!("found: {found}\n");
    if let (true, Some(a)) = (found, &counterexample) {
        text.push_str(&text_matrix("counterexample", a));
        r.insert("counterexample".into(), value(a));
    }
    Ok(Rendered {
        code: if found { EXIT_NOT_PRESERVING } else { EXIT_INCONCLUSIVE },
        report: Value::Object(r),
        text,
        warnings: problem.warnings,
    })
}

fn cmd_verify(args: &CommonArgs, stdin: &mut dyn Read) -> Result<Rendered, Failure> {
    let text = read_input(args, stdin)?;
    let report: Value = serde_json::from_str(&text).map_err(|e| Failure::Input(format!("malformed report: {e}")))?;
    let checks = verify::verify_report(&report).map_err(Failure::Input)?;
    let ok = checks.iter().all(|c| c.ok);
    let mut out = String::new();
    for c in &checks {
        out.push_str(&format!("[{}] {}: {}\n", if c.ok { "ok" } else { "FAIL" }, c.name, c.detail));
    }
    out.push_str(&format!("verified: {ok}\n"));
    Ok(Rendered {
        code: if ok { EXIT_PRESERVES } else { EXIT_NOT_PRESERVING },
        report: json!({ "command": "verify", "verified": ok, "checks": value(&checks) }),
        text: out,
        warnings: Vec::new(),
    })
}

/// Runs the CLI with explicit arguments, stdin and `PDPKIT_TOL` value.
pub fn run_with<I, T>(argv: I, stdin: &mut dyn Read, env_tol: Option<&str>) -> CliOutput
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                CliOutput { code, stdout: String::new(), stderr: rendered }
            } else {
                CliOutput { code, stdout: rendered, stderr: String::new() }
            };
        }
    };
    let (args, result) = match &cli.command {
        Command::Decide(a) => (a, timed(a, || cmd_decide(a, stdin, env_tol))),
        Command::Canonical(a) => (a, timed(a, || cmd_canonical(a, stdin, env_tol))),
        Command::Diagonalize(a) => (a, timed(a, || cmd_diagonalize(a, stdin, env_tol))),
        Command::Falsify(a) => (a, timed(a, || cmd_falsify(a, stdin, env_tol))),
        Command::Verify(a) => (a, timed(a, || cmd_verify(a, stdin))),
    };
    match result {
        Ok(r) => CliOutput {
            code: r.code,
            stdout: match args.format {
                Format::Json => json::render(&r.report),
                Format::Text => r.text,
            },
            stderr: r.warnings.iter().map(|w| format!("warning: {w}\n")).collect(),
        },
        Err(Failure::Input(msg)) => CliOutput {
            code: EXIT_INPUT,
            stdout: String::new(),
            stderr: format!("error: {msg}\n"),
        },
        Err(Failure::Internal(msg)) => CliOutput {
            code: EXIT_INTERNAL,
            stdout: String::new(),
            stderr: format!("internal error: {msg}\n"),
        },
    }
}

fn timed(args: &CommonArgs, f: impl FnOnce() -> Result<Rendered, Failure>) -> Result<Rendered, Failure> {
    let start = Instant::now();
    let mut r = f()?;
    if args.timings {
        if let Value::Object(m) = &mut r.report {
            m.insert("timings".into(), json!({ "total_ms": start.elapsed().as_secs_f64() * 1e3 }));
        }
    }
    Ok(r)
}

/// Entry point used by the binary.
pub fn run() -> i32 {
    let env_tol = std::env::var(TOL_ENV).ok();
    let out = run_with(std::env::args_os(), &mut std::io::stdin().lock(), env_tol.as_deref());
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    out.code
}
