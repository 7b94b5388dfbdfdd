//! Acceptance suite: runs every criterion at full scale, prints one PASS/FAIL
//! line each, and exits non-zero if any fails.

use std::process::ExitCode;

use trunctest::checks::{run_all, Scale};

fn main() -> ExitCode {
    let dir = tempfile::tempdir().expect("scratch directory");
    let results = run_all(&Scale::acceptance(), dir.path());
    println!();
    for c in &results {
        println!("{}", c.line());
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("\nacceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
