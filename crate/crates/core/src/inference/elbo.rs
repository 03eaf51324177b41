use std::f64::consts::PI;

use super::latent::{kl_standard_normal, LatentDistribution};
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Reconstructions are clamped to `[ε, 1 − ε]` before taking logs.
pub const BERNOULLI_CLAMP: f64 = 1e-7;

/// Observation model `p(x | x̂)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Likelihood {
    /// Isotropic Gaussian with fixed noise level σ_n, constant included.
    Gaussian { sigma_n: f64 },
    /// Independent Bernoulli per pixel; `x̂` is the success probability.
    Bernoulli,
}

impl Likelihood {
    /// `log p(x | x̂)` summed over pixels.
    pub fn log_prob(&self, x: &[f64], x_hat: &[f64]) -> Result<f64> {
        if x.len() != x_hat.len() {
            return Err(Error::Shape {
                op: "log likelihood",
                lhs: vec![x.len()],
                rhs: vec![x_hat.len()],
            });
        }
        match *self {
            Likelihood::Gaussian { sigma_n } => {
                let sq: f64 = x.iter().zip(x_hat).map(|(a, b)| (a - b) * (a - b)).sum();
                Ok(-sq / (2.0 * sigma_n * sigma_n) - x.len() as f64 * gaussian_const(sigma_n))
            }
            Likelihood::Bernoulli => {
                if x.iter().chain(x_hat).any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::contract("bernoulli likelihood needs x and x_hat in [0, 1]"));
                }
                Ok(x.iter()
                    .zip(x_hat)
                    .map(|(&t, &p)| {
                        let p = p.clamp(BERNOULLI_CLAMP, 1.0 - BERNOULLI_CLAMP);
                        t * p.ln() + (1.0 - t) * (1.0 - p).ln()
                    })
                    .sum())
            }
        }
    }
}

fn gaussian_const(sigma_n: f64) -> f64 {
    0.5 * (2.0 * PI).ln() + sigma_n.ln()
}

/// One image's evidence lower bound, split into its two terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElboTerms {
    pub recon: f64,
    pub kl: f64,
    pub elbo: f64,
    pub beta: f64,
}

impl ElboTerms {
    pub fn new(recon: f64, kl: f64, beta: f64) -> Self {
        ElboTerms {
            recon,
            kl,
            elbo: recon - beta * kl,
            beta,
        }
    }
}

/// Single-sample ELBO: `log p(x | x̂) − β·KL(q ‖ N(0, I))`.
pub fn elbo(x: &[f64], x_hat: &[f64], d: &LatentDistribution, likelihood: Likelihood, beta: f64) -> Result<ElboTerms> {
    let recon = likelihood.log_prob(x, x_hat)?;
    Ok(ElboTerms::new(recon, kl_standard_normal(d), beta))
}

/// Per-row log-likelihood of the constant targets `x` under `x_hat`, both
/// `[B, P]`; returns `[B]`.
pub fn log_likelihood_rows(tape: &mut Tape<'_>, x_hat: Var, x: &Tensor, likelihood: Likelihood) -> Result<Var> {
    let shape = tape.value(x_hat).shape().to_vec();
    if shape != x.shape() {
        return Err(Error::Shape {
            op: "log likelihood",
            lhs: shape,
            rhs: x.shape().to_vec(),
        });
    }
    let pixels = x.row_len() as f64;
    let target = tape.constant(x.clone());
    match likelihood {
        Likelihood::Gaussian { sigma_n } => {
            let diff = tape.sub(x_hat, target)?;
            let sq = tape.square(diff);
            let rows = tape.row_sums(sq)?;
            let scaled = tape.scale(rows, -1.0 / (2.0 * sigma_n * sigma_n));
            Ok(tape.add_scalar(scaled, -pixels * gaussian_const(sigma_n)))
        }
        Likelihood::Bernoulli => {
            if x.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::contract("bernoulli targets must lie in [0, 1]"));
            }
            let p = tape.clamp(x_hat, BERNOULLI_CLAMP, 1.0 - BERNOULLI_CLAMP);
            let log_p = tape.log(p);
            let neg = tape.scale(p, -1.0);
            let q = tape.add_scalar(neg, 1.0);
            let log_q = tape.log(q);
            let inv = tape.constant(x.map(|t| 1.0 - t));
            let a = tape.mul(log_p, target)?;
            let b = tape.mul(log_q, inv)?;
            let s = tape.add(a, b)?;
            tape.row_sums(s)
        }
    }
}
