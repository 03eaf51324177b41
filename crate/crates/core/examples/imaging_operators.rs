//! The imaging chain one step at a time: rotate a phantom, project it,
//! shift the projection, and blur it with a filter from the bank. Each
//! operator's adjoint is checked against its dense matrix on a small grid.

use latent_workbench::check::adjoint_mismatch;
use latent_workbench::forward::{
    apply_ctf, make_phantom, project, rotate_volume, translate_image, CtfFilter, Pose, PoseOperator, Projection,
    Quaternion, Rotation, Translation,
};
use latent_workbench::tensor::LinearMap;

fn main() -> latent_workbench::Result<()> {
    let size = 24;
    let volume = make_phantom(0.5, size)?;
    let q = Quaternion::from_axis_angle([1.0, 1.0, 0.0], 0.7);
    let rotated = rotate_volume(&volume, &q)?;
    println!(
        "mass before/after rotation: {:.4} / {:.4}",
        volume.mass(),
        rotated.mass()
    );

    let image = project(&rotated);
    let shifted = translate_image(&image, [1.5, -0.5])?;
    let filtered = apply_ctf(&shifted, 2)?;
    let sum = |d: &[f64]| d.iter().sum::<f64>();
    println!(
        "projection sum {:.4}, shifted {:.4}, filtered {:.4}",
        sum(image.data()),
        sum(shifted.data()),
        sum(filtered.data())
    );

    let small = 8;
    let pose = Pose {
        rotation: q,
        translation: [0.5, -0.25],
        ctf_kernel: 1,
    };
    let maps: Vec<(&str, Box<dyn LinearMap>)> = vec![
        ("rotation", Box::new(Rotation::new(small, &q)?)),
        ("projection", Box::new(Projection { size: small })),
        ("translation", Box::new(Translation::new(small, [0.5, -0.25]))),
        ("filter", Box::new(CtfFilter::new(small, 1)?)),
        ("full pose", Box::new(PoseOperator::new(small, &pose)?)),
    ];
    for (name, map) in maps {
        println!(
            "{name:<12} {}→{}  max |A - (Aᵀ)ᵀ| = {:.1e}",
            map.input_len(),
            map.output_len(),
            adjoint_mismatch(map.as_ref())
        );
    }
    Ok(())
}
