//! Synthetic tomographic image formation and dataset ingestion.
//!
//! An observation is `x = h ∗ (T_t P R_ω V_c) + ε`: a conformation-dependent
//! phantom `V_c` is rotated, projected along the last grid axis, shifted in
//! the image plane, low-pass filtered by a kernel from a small bank, and
//! corrupted by white Gaussian noise. All four imaging operators are linear
//! and implement [`LinearMap`](crate::tensor::LinearMap) with exact adjoints.

mod dataset;
mod grid;
pub mod idx;
mod noise;
mod operators;
mod phantom;
mod pose;

pub use dataset::{generate_dataset, ConformationLaw, Dataset, DatasetSpec, Mode, ParticleImage, PoseLaw};
pub use grid::{Image, Volume};
pub use idx::load_idx;
pub use noise::{add_noise, add_noise_with, signal_variance, NoiseProfile};
pub use operators::{
    apply_ctf, back_project, project, rotate_volume, translate_image, CtfFilter, PoseOperator, Projection, Rotation,
    Translation, KERNEL_BANK,
};
pub use phantom::{lobe_a_center, lobe_b_center, make_phantom, phantom_lobes};
pub use pose::{Pose, Quaternion};
