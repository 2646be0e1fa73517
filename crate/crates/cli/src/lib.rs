//! The `twosat` command line: one subcommand per experiment, JSON or CSV
//! output, and the acceptance suite behind `verify`.

mod commands;
mod determinism;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;
use twosat_core::acceptance::{run_suite, CriterionOutcome, Scale};
use twosat_core::Error;

pub use determinism::determinism_criterion;

pub const EXIT_ACCEPTANCE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "twosat",
    version,
    about = "Random 2-SAT marginals: exact counting, tree recursions and population dynamics"
)]
struct Cli {
    /// Worker threads; results do not depend on it. Defaults to the number
    /// of available cores.
    #[arg(long, global = true, env = "TWOSAT_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: commands::Command,
}

/// Result of a subcommand that ran to completion.
pub(crate) enum Status {
    Ok,
    AcceptanceFailed,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ResourceLimit { .. } => EXIT_RESOURCE,
        _ => EXIT_USAGE,
    }
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        let _ = writeln!(err, "error: --workers must be at least 1");
        return EXIT_USAGE;
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start {workers} workers: {e}");
            return EXIT_USAGE;
        }
    };
    let mut buf = Vec::new();
    let result = pool.install(|| commands::execute(cli.command, &mut buf));
    if out.write_all(&buf).and_then(|_| out.flush()).is_err() {
        return EXIT_USAGE;
    }
    match result {
        Ok(Status::Ok) => 0,
        Ok(Status::AcceptanceFailed) => EXIT_ACCEPTANCE,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// All twelve acceptance criteria.
pub fn verify_outcomes(scale: Scale, seed: u64) -> twosat_core::Result<Vec<CriterionOutcome>> {
    let mut out = run_suite(scale, seed)?;
    out.push(determinism_criterion(seed)?);
    Ok(out)
}
