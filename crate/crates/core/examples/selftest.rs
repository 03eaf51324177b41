//! Runs the numerical oracle suite and prints one line per check.

use latent_workbench::selftest::run_selftest;

fn main() -> latent_workbench::Result<()> {
    let report = run_selftest()?;
    for check in &report.checks {
        println!("{check}");
    }
    println!(
        "{} checks, {} failed, {:.1}s",
        report.checks.len(),
        report.failures(),
        report.seconds
    );
    Ok(())
}
