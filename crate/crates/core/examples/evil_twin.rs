//! Evil-twin training: the encoder sees a fixed, unrelated image (or pure
//! noise) in place of each particle while the loss still targets the real
//! particle. A large enough encoder can memorise the pairing, so the
//! reconstruction loss barely suffers.

use latent_workbench::experiments::{evil_twin_train, train, ExperimentConfig};

fn main() -> latent_workbench::Result<()> {
    let base: Vec<String> = ["n=300", "image_size=16", "epochs=15", "encoder_preset=large", "z_dim=8"]
        .map(String::from)
        .to_vec();
    let cfg = ExperimentConfig::from_overrides(&base)?;
    let data = cfg.load_dataset()?;
    let plain = train(&cfg, &data)?;
    let baseline = plain.report.losses.last().expect("epochs > 0").recon;
    println!("plain training       recon {baseline:.2}");

    for mode in ["permutation", "noise"] {
        let mut o = base.clone();
        o.push(format!("twin_mode={mode}"));
        let twin_cfg = ExperimentConfig::from_overrides(&o)?;
        let out = evil_twin_train(&twin_cfg, &data)?;
        let recon = out.report.losses.last().expect("epochs > 0").recon;
        println!(
            "{mode:<12} twins    recon {recon:.2}  ({:+.1}% vs plain)",
            100.0 * (recon - baseline) / baseline
        );
    }
    Ok(())
}
