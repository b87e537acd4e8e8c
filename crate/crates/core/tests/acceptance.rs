//! Runs the full fast verification suite and prints one line per check.
//! Built without the libtest harness so the lines are never captured.

use std::process::ExitCode;

use opinion_kinetics::verify::{check_ids, run_checks, Suite};

fn main() -> ExitCode {
    let report = run_checks(Suite::Fast, 20_240_601, &[]);
    assert_eq!(report.checks.len(), check_ids().len());
    for check in &report.checks {
        println!("{}", check.summary_line());
    }
    let failed: Vec<u32> = report.checks.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    if failed.is_empty() {
        println!("acceptance: {} of {} checks passed", report.checks.len(), report.checks.len());
        ExitCode::SUCCESS
    } else {
        eprintln!("failed checks: {failed:?}\n{}", report.to_json());
        ExitCode::FAILURE
    }
}
