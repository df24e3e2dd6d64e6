//! Command-line front end. `main_with` is the whole program minus process
//! exit, so tests can drive it in-process.
//!
//! Exit codes: 0 for a positive outcome or a verified certificate, 2 for
//! input or validation errors, 3 for negative outcomes and rejected
//! certificates, 4 for inconclusive outcomes.

pub mod cert;
pub mod commands;
pub mod problem;
pub mod verify;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::scalar::Place;

pub use cert::{Certificate, Evidence, Outcome};
pub use commands::{run, Command};
pub use problem::{parse_problem, Overrides, Problem};
pub use verify::verify_certificate;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_REJECTED: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "prodense",
    version,
    about = "Certified ping-pong and free-subgroup synthesis"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Singular profile, contraction and proximality of one element.
    Analyze(ProblemArgs),
    /// Certify a ping-pong tuple, or run the freeness oracle on the generators.
    Pingpong(ProblemArgs),
    /// Search for free tuples and auxiliary elements.
    Synthesize(ProblemArgs),
    /// Bass–Serre tree computations for an amalgam.
    Tree(ProblemArgs),
    /// Re-check a certificate written by another command.
    Verify { file: PathBuf },
}

#[derive(Args, Debug)]
struct ProblemArgs {
    file: PathBuf,
    /// Write the certificate here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a search budget, e.g. `--budget factors=3`.
    #[arg(long = "budget", value_name = "NAME=VALUE")]
    budgets: Vec<String>,
    /// Tree search radius.
    #[arg(long)]
    radius: Option<usize>,
    /// Longest word tried by the freeness oracle.
    #[arg(long = "oracle-len")]
    oracle_len: Option<usize>,
    /// `arch` or `p:PRIME`; overrides the file header.
    #[arg(long)]
    place: Option<String>,
}

impl ProblemArgs {
    fn overrides(&self) -> crate::Result<Overrides> {
        let mut ov = Overrides::default();
        if let Some(p) = &self.place {
            ov.place = Some(p.parse::<Place>()?);
        }
        for b in &self.budgets {
            let (k, v) = b
                .split_once('=')
                .ok_or_else(|| Error::Invalid(format!("--budget expects NAME=VALUE, got `{b}`")))?;
            let k = k.trim();
            if !problem::BUDGET_KEYS.contains(&k) {
                return Err(Error::Invalid(format!("unknown budget `{k}`")));
            }
            ov.params
                .insert(format!("budget.{k}"), v.trim().to_string());
        }
        if let Some(r) = self.radius {
            ov.params.insert("radius".into(), r.to_string());
        }
        if let Some(n) = self.oracle_len {
            ov.params.insert("oracle_len".into(), n.to_string());
        }
        Ok(ov)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code. Certificates go to `out` unless `--out` is given; messages go to
/// `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    match cli.command {
        Cmd::Analyze(a) => run_problem(Command::Analyze, &a, out, err),
        Cmd::Pingpong(a) => run_problem(Command::Pingpong, &a, out, err),
        Cmd::Synthesize(a) => run_problem(Command::Synthesize, &a, out, err),
        Cmd::Tree(a) => run_problem(Command::Tree, &a, out, err),
        Cmd::Verify { file } => run_verify(&file, out, err),
    }
}

/// Parses and runs a problem text in-process.
pub fn run_text(command: Command, text: &str, ov: &Overrides) -> crate::Result<Certificate> {
    run(command, parse_problem(text, ov)?)
}

fn run_problem(command: Command, a: &ProblemArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = std::fs::read_to_string(&a.file)
        .map_err(|e| Error::Invalid(format!("{}: {e}", a.file.display())))
        .and_then(|text| run_text(command, &text, &a.overrides()?));
    let cert = match result {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let json = cert.to_canonical_json();
    let written = match &a.out {
        Some(path) => std::fs::write(path, &json).map_err(|e| e.to_string()),
        None => out.write_all(json.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: cannot write certificate: {e}");
        return EXIT_INPUT;
    }
    let _ = writeln!(err, "verdict: {}", outcome_name(cert.verdict));
    cert.verdict.exit_code()
}

fn outcome_name(o: Outcome) -> String {
    serde_json::to_value(o)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default()
}

/// Verifies certificate text: 0 accepted, 2 unreadable, 3 rejected.
pub fn verify_text(text: &str) -> (i32, String) {
    let cert = match Certificate::from_json(text) {
        Ok(c) => c,
        Err(e) => return (EXIT_INPUT, format!("error: {e}")),
    };
    match catch_unwind(AssertUnwindSafe(|| verify_certificate(&cert))) {
        Ok(Ok(())) => (0, format!("verified: {}", outcome_name(cert.verdict))),
        Ok(Err(reason)) => (EXIT_REJECTED, format!("rejected: {reason}")),
        Err(_) => (EXIT_REJECTED, "rejected: malformed certificate data".into()),
    }
}

fn run_verify(file: &PathBuf, _out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match std::fs::read_to_string(file) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", file.display());
            return EXIT_INPUT;
        }
    };
    let (code, msg) = verify_text(&text);
    let _ = writeln!(err, "{msg}");
    code
}
