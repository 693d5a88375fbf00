//! Randomized Chern/Todd identity suite in dimensions 1 to 4.

use quillen::chern_calculus::verify::run_suite;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for n in 1..=4 {
        let trials = if n == 4 { 5 } else { 100 };
        let start = std::time::Instant::now();
        let report = run_suite(n, trials, 7)?;
        println!(
            "n={n} trials={trials} passes={} ({:.2?})\n{}",
            report.passes(),
            start.elapsed(),
            serde_json::to_string_pretty(&report.max_residuals)?
        );
    }
    Ok(())
}
