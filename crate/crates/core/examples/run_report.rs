//! Writes a run report, reloads it, and retrains from the echoed config to
//! show the result is bitwise reproducible.
//!
//! `cargo run --release --example run_report -- <out_dir>`

use std::path::PathBuf;

use latent_workbench::experiments::{load_report, train, write_report, ExperimentConfig, DETERMINISTIC_FILES};

fn main() -> latent_workbench::Result<()> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "run_report".into()));
    let cfg = ExperimentConfig::from_overrides(&["n=200", "image_size=16", "epochs=3"].map(String::from))?;
    let data = cfg.load_dataset()?;
    let first = root.join("first");
    write_report(&first, &train(&cfg, &data)?, &data, true)?;
    println!("wrote {}", first.display());
    print!(
        "{}",
        std::fs::read_to_string(first.join("config.txt")).expect("report has a config")
    );

    let echoed = load_report(&first)?.config;
    let again = echoed.load_dataset()?;
    let second = root.join("second");
    write_report(&second, &train(&echoed, &again)?, &again, true)?;
    for name in DETERMINISTIC_FILES {
        let same = std::fs::read(first.join(name)).ok() == std::fs::read(second.join(name)).ok();
        println!("{name:<18} {}", if same { "identical" } else { "DIFFERS" });
    }
    Ok(())
}
