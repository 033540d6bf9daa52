//! Prints one PASS/FAIL line per acceptance criterion and exits nonzero if
//! any fails. Runs without the libtest harness so nothing is captured.

use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let clock = Instant::now();
    let outcomes = brickwall_suite::run_all(|o| {
        eprintln!("criterion {} evaluated ({:.0} s elapsed)", o.id, clock.elapsed().as_secs_f64());
    });
    println!();
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.0} s)",
        outcomes.len() - failed,
        clock.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
