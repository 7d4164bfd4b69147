//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command as Process;
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};

use crate::corpus::{self, Spec};
use crate::cost::CostVector;
use crate::error::Error;
use crate::evaluator::{check, Assignment, Evaluator};
use crate::parser::parse_input;
use crate::solver::{Solver, SolverConfig, Status};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_TIMEOUT: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "isla-forge", version, about = "Generate and check inputs under grammar and tree constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate inputs that satisfy the constraint.
    Solve(SolveArgs),
    /// Check whether an input satisfies the constraint.
    Check(CheckArgs),
    /// Feed generated inputs to a target command and record its exit codes.
    Fuzz(FuzzArgs),
}

#[derive(Args, Debug)]
struct SpecArgs {
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[arg(long)]
    constraint: Option<PathBuf>,
    /// Spec directory with grammar.bnf and constraint.isla, or the name of a
    /// bundled spec.
    #[arg(long, conflicts_with_all = ["grammar", "constraint"])]
    spec: Option<String>,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(short = 'n', default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, env = "ISLA_FORGE_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 40)]
    max_depth: usize,
    #[arg(long)]
    timeout_s: Option<f64>,
    /// Five comma-separated cost weights.
    #[arg(long)]
    weights: Option<CostVector>,
    /// Write the transition graph in DOT format to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    gen: GenArgs,
    /// Write one file per input instead of printing them.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CheckArgs {
    #[command(flatten)]
    spec: SpecArgs,
    /// Print the failing sub-formulas.
    #[arg(long)]
    explain: bool,
    input: PathBuf,
}

#[derive(Args, Debug)]
struct FuzzArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[command(flatten)]
    gen: GenArgs,
    /// Command to run; the input file path is appended as its last argument.
    #[arg(long)]
    target: String,
    #[arg(long, default_value = "fuzz-out")]
    out: PathBuf,
    /// Report file; defaults to report.tsv in the output directory.
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let res = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Check(a) => check_input(a),
        Command::Fuzz(a) => fuzz(a),
    };
    match res {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn load(a: &SpecArgs) -> Result<Spec, Error> {
    if let Some(s) = &a.spec {
        let dir = Path::new(s);
        return if dir.is_dir() { corpus::load_spec_dir(dir) } else { corpus::load_spec(s) };
    }
    match (&a.grammar, &a.constraint) {
        (Some(g), Some(c)) => corpus::from_texts("", &read(g)?, &read(c)?),
        _ => Err(Error::UnknownSpec("need --spec or both --grammar and --constraint".into())),
    }
}

fn config(g: &GenArgs) -> SolverConfig {
    SolverConfig {
        max_outputs: g.n as usize,
        max_depth: g.max_depth,
        weights: g.weights.unwrap_or_default(),
        seed: g.seed,
        timeout: g.timeout_s.map(Duration::from_secs_f64),
        trace: g.trace.is_some(),
        ..SolverConfig::default()
    }
}

fn write_trace(path: &Option<PathBuf>, s: &Solver) -> Result<(), Error> {
    if let Some(p) = path {
        fs::write(p, s.trace_dot()).map_err(|source| Error::Io { path: p.display().to_string(), source })?;
    }
    Ok(())
}

fn io_err(p: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: p.display().to_string(), source }
}

fn file_name(i: usize, n: u64) -> String {
    let width = n.to_string().len();
    format!("{i:0width$}.txt")
}

fn solve(a: SolveArgs) -> Result<i32, Error> {
    let spec = load(&a.spec)?;
    let mut solver = Solver::new(&spec.grammar, &spec.registry, spec.formula.clone(), config(&a.gen))?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let stdout = std::io::stdout();
    let mut count = 0;
    while let Some(sol) = solver.next_solution() {
        count += 1;
        match &a.out {
            Some(dir) => {
                let p = dir.join(file_name(count, a.gen.n));
                fs::write(&p, &sol.text).map_err(io_err(&p))?;
            }
            None => {
                let mut lock = stdout.lock();
                let _ = writeln!(lock, "{}", sol.text);
            }
        }
    }
    write_trace(&a.gen.trace, &solver)?;
    if let Some(dir) = &a.out {
        eprintln!("wrote {count} inputs to {}", dir.display());
    }
    if count == 0 && solver.status() == Status::TimedOut {
        eprintln!("timed out before the first input");
        return Ok(EXIT_TIMEOUT);
    }
    if count < a.gen.n as usize {
        eprintln!("found {count} of {} inputs ({:?})", a.gen.n, solver.status());
    }
    Ok(EXIT_OK)
}

fn check_input(a: CheckArgs) -> Result<i32, Error> {
    let spec = load(&a.spec)?;
    let text = read(&a.input)?;
    let tree = match parse_input(&spec.grammar, &text) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("parse error: {e}");
            return Ok(EXIT_USAGE);
        }
    };
    let ok = check(&spec.formula, &tree, &spec.grammar, &spec.registry)?;
    if ok {
        return Ok(EXIT_OK);
    }
    if a.explain {
        let ev = Evaluator { g: &spec.grammar, registry: &spec.registry, tree: &tree };
        for line in ev.explain(&spec.formula, &Assignment::start(&tree))? {
            eprintln!("{line}");
        }
    }
    Ok(EXIT_INVALID)
}

fn on_path(cmd: &str) -> bool {
    if cmd.contains('/') {
        return Path::new(cmd).is_file();
    }
    std::env::var_os("PATH").is_some_and(|paths| std::env::split_paths(&paths).any(|d| d.join(cmd).is_file()))
}

enum Outcome {
    Accepted,
    Rejected(i32),
    Crashed(String),
}

fn run_target(target: &str, input: &Path) -> Result<Outcome, std::io::Error> {
    let status = Process::new("sh")
        .arg("-c")
        .arg(format!("{target} \"$1\""))
        .arg("isla-forge-fuzz")
        .arg(input)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()?;
    Ok(match status.code() {
        Some(0) => Outcome::Accepted,
        Some(c) if c >= 128 => Outcome::Crashed(format!("exit {c}")),
        Some(c) => Outcome::Rejected(c),
        None => Outcome::Crashed("signal".into()),
    })
}

fn fuzz(a: FuzzArgs) -> Result<i32, Error> {
    let program = a.target.split_whitespace().next().unwrap_or("");
    if !on_path(program) {
        eprintln!("error: target {program:?} not found");
        return Ok(EXIT_USAGE);
    }
    let spec = load(&a.spec)?;
    let mut solver = Solver::new(&spec.grammar, &spec.registry, spec.formula.clone(), config(&a.gen))?;
    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let report_path = a.report.clone().unwrap_or_else(|| a.out.join("report.tsv"));
    let mut report = fs::File::create(&report_path).map_err(io_err(&report_path))?;
    let started = Instant::now();
    let (mut sent, mut accepted, mut rejected, mut crashed) = (0, 0, 0, 0);
    while let Some(sol) = solver.next_solution() {
        sent += 1;
        let p = a.out.join(file_name(sent, a.gen.n));
        fs::write(&p, &sol.text).map_err(io_err(&p))?;
        let outcome = run_target(&a.target, &p).map_err(io_err(&p))?;
        let (code, kind) = match outcome {
            Outcome::Accepted => {
                accepted += 1;
                ("0".to_string(), "accepted")
            }
            Outcome::Rejected(c) => {
                rejected += 1;
                (c.to_string(), "rejected")
            }
            Outcome::Crashed(why) => {
                crashed += 1;
                (why, "crashed")
            }
        };
        writeln!(report, "{}\t{code}\t{kind}", p.display()).map_err(io_err(&report_path))?;
    }
    write_trace(&a.gen.trace, &solver)?;
    eprintln!(
        "sent {sent} inputs in {:.1}s: {accepted} accepted, {rejected} rejected, {crashed} crashed",
        started.elapsed().as_secs_f64()
    );
    if sent == 0 && solver.status() == Status::TimedOut {
        return Ok(EXIT_TIMEOUT);
    }
    Ok(EXIT_OK)
}
