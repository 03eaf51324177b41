//! How far does a trained encoder move an image's latent mean when the
//! input is shifted by a pixel or rotated by 90°? Identity augmentations
//! (shift by 0, four quarter turns) move nothing.

use latent_workbench::experiments::{augment_probe, train, Augmentation, ExperimentConfig};

fn main() -> latent_workbench::Result<()> {
    let cfg = ExperimentConfig::from_overrides(&["n=400", "image_size=16", "epochs=15"].map(String::from))?;
    let data = cfg.load_dataset()?;
    let out = train(&cfg, &data)?;
    for aug in ["shift:0", "shift:1", "shift:-2", "rotate90", "rotate90x4"] {
        let aug: Augmentation = aug.parse()?;
        println!("{}", augment_probe(&out.model, &data, aug)?.summary_line());
    }
    Ok(())
}
