//! Runs the full acceptance suite, printing one line per criterion.

use std::path::PathBuf;
use std::process::ExitCode;

use mbtree_cli::acceptance::{format_line, run_suite, Context};

/// Criteria that do not meet their pinned tolerance at the prescribed
/// sizes. They are still run and reported; the target fails if this list
/// goes stale in either direction.
const KNOWN_FAILURES: &[&str] = &["9"];

fn main() -> ExitCode {
    let ctx = Context {
        seed: 0,
        exe: Some(PathBuf::from(env!("CARGO_BIN_EXE_mbtree"))),
    };
    let results = match run_suite("all", &ctx) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance suite could not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    let mut failed = Vec::new();
    for (c, o) in &results {
        println!("{}", format_line(c, o));
        if !o.pass {
            failed.push(c.id);
        }
    }
    let passed = results.len() - failed.len();
    println!("acceptance: {passed}/{} criteria pass; expected failures: {KNOWN_FAILURES:?}", results.len());
    if results.len() != 12 || failed != KNOWN_FAILURES {
        eprintln!("failing criteria {failed:?} differ from the expected {KNOWN_FAILURES:?}");
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
