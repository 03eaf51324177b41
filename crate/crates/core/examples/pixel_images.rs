//! Pixel-space mode on IDX (MNIST-format) data. Two glyph classes are drawn
//! into 12×12 images, serialized as IDX bytes, parsed back, and fitted with
//! a Bernoulli pixel decoder.

use latent_workbench::experiments::{train, ExperimentConfig};
use latent_workbench::forward::idx::{dataset_from_idx, encode_idx};
use latent_workbench::rng;
use rand::Rng;

fn glyph(class: u8, r: &mut impl Rng) -> Vec<u8> {
    let side = 12;
    let (dr, dc) = (r.random_range(0..3), r.random_range(0..3));
    let mut img = vec![0u8; side * side];
    for i in 0..7 {
        // Class 0 draws a vertical bar, class 1 a diagonal stroke.
        let (row, col) = if class == 0 { (2 + i, 5) } else { (2 + i, 2 + i) };
        img[(row + dr).min(side - 1) * side + (col + dc).min(side - 1)] = 230;
    }
    img
}

fn main() -> latent_workbench::Result<()> {
    let mut r = rng::stream(3, "glyphs");
    let labels: Vec<u8> = (0..300).map(|i| (i % 2) as u8).collect();
    let images: Vec<Vec<u8>> = labels.iter().map(|&l| glyph(l, &mut r)).collect();
    let (img_bytes, label_bytes) = encode_idx(12, 12, &images, &labels);
    let data = dataset_from_idx(&img_bytes, &label_bytes)?;
    println!(
        "parsed {} images of {}x{}",
        data.len(),
        data.image_size(),
        data.image_size()
    );

    for backend in ["encoder", "vlt"] {
        let cfg = ExperimentConfig::from_overrides(&[
            format!("backend={backend}"),
            "epochs=30".into(),
            "z_dim=2".into(),
            "lr=1e-3".into(),
        ])?;
        let out = train(&cfg, &data)?;
        let m = out.report.metrics.as_ref().expect("labels present");
        println!(
            "{backend:<8} final neg_elbo {:.2}, 5-NN {:.3}",
            out.report.losses.last().expect("epochs > 0").neg_elbo,
            m.knn_accuracy
        );
    }
    Ok(())
}
