//! Variational machinery: where `q(z_i)` comes from and how it is scored.

mod elbo;
mod encoder;
mod latent;
pub mod linear_gaussian;
mod mlp;
mod vlt;

pub use elbo::{elbo, log_likelihood_rows, ElboTerms, Likelihood, BERNOULLI_CLAMP};
pub use encoder::{Encoder, EncoderPreset};
pub use latent::{
    kl_rows, kl_standard_normal, reparameterize, sample_z, sample_z_with, LatentDistribution, LOG_SIGMA_MAX,
    LOG_SIGMA_MIN,
};
pub use linear_gaussian::{exact_linear_gaussian_posterior, LinearGaussian};
pub use mlp::Mlp;
pub use vlt::{VltBackend, VltInit};
