//! Trains the amortized encoder and a randomly initialised lookup table on
//! the same synthetic data and compares how well each separates the two
//! conformations, and how long an epoch takes.
//!
//! Extra `key=value` arguments override the small default config, e.g.
//! `cargo run --release --example encoder_vs_lookup_table -- n=2000 epochs=50`.

use latent_workbench::experiments::{train, ExperimentConfig};

fn main() -> latent_workbench::Result<()> {
    let mut overrides: Vec<String> = ["n=400", "image_size=16", "epochs=20"].map(String::from).to_vec();
    overrides.extend(std::env::args().skip(1));
    for backend in ["encoder", "vlt"] {
        let mut o = overrides.clone();
        o.insert(0, format!("backend={backend}"));
        let cfg = ExperimentConfig::from_overrides(&o)?;
        let data = cfg.load_dataset()?;
        let out = train(&cfg, &data)?;
        let r = &out.report;
        let last = r.losses.last().expect("at least one epoch");
        let m = r.metrics.as_ref().expect("synthetic data has labels");
        println!(
            "{backend:<8} neg_elbo {:.2}  5-NN {:.3}  separation {}  {:.2}s/epoch",
            last.neg_elbo,
            m.knn_accuracy,
            m.separation_ratio.map_or("n/a".into(), |s| format!("{s:.2}")),
            r.mean_seconds()
        );
    }
    Ok(())
}
