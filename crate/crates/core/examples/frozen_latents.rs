//! Freezing the lookup table. With every row at zero the decoder can only
//! learn one consensus volume; with rows copied from a trained encoder the
//! frozen table keeps its conformation structure while the decoder trains.

use latent_workbench::decoder::TomographicDecoder;
use latent_workbench::experiments::{train, Backend, Decoder, ExperimentConfig, Model};
use latent_workbench::tensor::checkpoint;

fn spread(dec: &TomographicDecoder, model: &Model, rows: usize, z: usize) -> latent_workbench::Result<f64> {
    let Backend::Vlt(table) = &model.backend else {
        unreachable!("lookup-table run")
    };
    let first = dec.decode_volume(&table.table().row(0)[..z])?;
    let mut worst = 0.0f64;
    for i in 1..rows {
        let v = dec.decode_volume(&table.table().row(i)[..z])?;
        for (a, b) in v.data().iter().zip(first.data()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

fn main() -> latent_workbench::Result<()> {
    let base = ["n=300", "image_size=16", "epochs=10"].map(String::from);
    let enc_cfg = ExperimentConfig::from_overrides(&base)?;
    let data = enc_cfg.load_dataset()?;
    let encoder = train(&enc_cfg, &data)?;
    let knn =
        |m: &Option<latent_workbench::experiments::ClusterMetrics>| m.as_ref().map_or(f64::NAN, |m| m.knn_accuracy);
    println!("encoder run: 5-NN {:.3}", knn(&encoder.report.metrics));

    let dir = tempfile::tempdir().expect("temp dir is writable");
    let ckpt = dir.path().join("encoder_latents.ckpt");
    checkpoint::save(&ckpt, &[("latents", &encoder.report.latents)])?;

    for (label, init) in [
        ("zero-init", vec!["backend_init=zeros".to_string()]),
        (
            "encoder-init",
            vec![
                "backend_init=checkpoint".to_string(),
                format!("init_checkpoint={}", ckpt.display()),
            ],
        ),
    ] {
        let mut o: Vec<String> = base.to_vec();
        o.extend(["backend=vlt".to_string(), "freeze_latents=true".to_string()]);
        o.extend(init);
        let cfg = ExperimentConfig::from_overrides(&o)?;
        let out = train(&cfg, &data)?;
        let Decoder::Tomographic(dec) = &out.model.decoder else {
            unreachable!("synthetic data")
        };
        let losses = &out.report.losses;
        println!(
            "{label:<13} recon {:.1} → {:.1}, 5-NN {:.3}, max voxel spread across rows {:.2e}",
            losses[0].recon,
            losses.last().expect("epochs > 0").recon,
            knn(&out.report.metrics),
            spread(dec, &out.model, 20, cfg.z_dim)?
        );
    }
    Ok(())
}
