//! Miniature variational-autoencoder workbench for synthetic tomographic
//! data.
//!
//! The crate compares two ways of producing the per-image latent
//! distribution `q(z_i)` consumed by a pose-conditioned volume decoder:
//!
//! * an **amortized encoder** `x_i ↦ (μ_i, log σ_i)` shared across images, and
//! * a **variational lookup table** (VLT) holding an independent row
//!   `(μ_i, log σ_i)` per image index.
//!
//! Module map:
//!
//! * [`tensor`]: f64 tensors, reverse-mode tape, SGD/Adam, checkpoints.
//! * [`forward`]: phantom, rotation/projection/shift/filter operators,
//!   noise, synthetic datasets, IDX ingestion.
//! * [`inference`]: encoder, VLT, reparameterized sampling, analytic KL,
//!   ELBO, and the closed-form linear-Gaussian model used as an oracle.
//! * [`decoder`]: tomographic (volume grid) and pixel decoders, dumps.
//! * [`experiments`]: training runs, evil twins, augmentation probes,
//!   PCA, cluster metrics and run reports.
//! * [`check`]: finite-difference and dense-operator oracles; [`selftest`]
//!   runs them as a suite.

pub mod check;
pub mod cli;
pub mod decoder;
pub mod error;
pub mod experiments;
pub mod forward;
pub mod inference;
pub mod rng;
pub mod selftest;
pub mod tensor;

pub use error::{Error, Result};
