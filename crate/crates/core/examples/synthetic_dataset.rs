//! Generates a small two-state synthetic dataset, prints its statistics,
//! and writes the first few noisy images and the two clean phantom
//! projections as PGM files.
//!
//! `cargo run --release --example synthetic_dataset -- [out_dir]`

use std::path::PathBuf;

use latent_workbench::decoder::write_pgm;
use latent_workbench::forward::{generate_dataset, make_phantom, project, DatasetSpec};

fn main() -> latent_workbench::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synthetic_dataset".into()));
    std::fs::create_dir_all(&out).map_err(|e| latent_workbench::Error::Io {
        path: out.clone(),
        source: e,
    })?;

    let spec = DatasetSpec {
        n: 200,
        size: 32,
        seed: 7,
        ..DatasetSpec::default()
    };
    let data = generate_dataset(&spec)?;
    let (mean, var) = data.pixel_moments();
    println!(
        "{} images of {}x{}, pixel mean {mean:.3}, variance {var:.3}",
        data.len(),
        spec.size,
        spec.size
    );
    let labels = data.discrete_labels().unwrap_or_default();
    let ones = labels.iter().filter(|&&l| l == 1).count();
    println!("state counts: {} / {ones}", labels.len() - ones);

    for p in data.images.iter().take(4) {
        write_pgm(&out.join(format!("noisy_{}.pgm", p.index)), &p.pixels)?;
        println!(
            "image {}: conformation {}, noise sd {:.3}",
            p.index, p.truth, p.noise_sd
        );
    }
    for c in [0.0, 1.0] {
        let clean = project(&make_phantom(c, spec.size)?);
        write_pgm(&out.join(format!("clean_state_{c}.pgm")), &clean)?;
    }
    println!("wrote images to {}", out.display());
    Ok(())
}
