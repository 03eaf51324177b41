use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::{Tape, Var};

pub const LOG_SIGMA_MIN: f64 = -20.0;
pub const LOG_SIGMA_MAX: f64 = 5.0;

/// Diagonal Gaussian `N(μ, diag σ²)` stored as `(μ, log σ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentDistribution {
    pub mu: Vec<f64>,
    pub log_sigma: Vec<f64>,
}

impl LatentDistribution {
    pub fn new(mu: Vec<f64>, log_sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != log_sigma.len() {
            return Err(Error::Shape {
                op: "latent distribution",
                lhs: vec![mu.len()],
                rhs: vec![log_sigma.len()],
            });
        }
        if mu.iter().chain(&log_sigma).any(|v| !v.is_finite()) {
            return Err(Error::contract("latent distribution has non-finite components"));
        }
        let log_sigma = log_sigma
            .into_iter()
            .map(|v| v.clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX))
            .collect();
        Ok(LatentDistribution { mu, log_sigma })
    }

    pub fn standard(dim: usize) -> Self {
        LatentDistribution {
            mu: vec![0.0; dim],
            log_sigma: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn sigma(&self) -> Vec<f64> {
        self.log_sigma.iter().map(|v| v.exp()).collect()
    }
}

/// `z = μ + exp(log σ)·ε` for a given `ε`.
pub fn sample_z_with(d: &LatentDistribution, eps: &[f64]) -> Vec<f64> {
    d.mu.iter()
        .zip(&d.log_sigma)
        .zip(eps)
        .map(|((m, ls), e)| m + ls.exp() * e)
        .collect()
}

pub fn sample_z(d: &LatentDistribution, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, "sample");
    let eps: Vec<f64> = (0..d.dim()).map(|_| r.sample(StandardNormal)).collect();
    sample_z_with(d, &eps)
}

/// `KL(N(μ, diag σ²) ‖ N(0, I)) = ½ Σ (μ² + σ² − 1 − log σ²)`.
pub fn kl_standard_normal(d: &LatentDistribution) -> f64 {
    0.5 * d
        .mu
        .iter()
        .zip(&d.log_sigma)
        .map(|(m, ls)| m * m + (2.0 * ls).exp() - 1.0 - 2.0 * ls)
        .sum::<f64>()
}

/// Tape version of the reparameterization over a `[B, z]` batch.
pub fn reparameterize(tape: &mut Tape<'_>, mu: Var, log_sigma: Var, eps: Var) -> Result<Var> {
    let sigma = tape.exp(log_sigma);
    let noise = tape.mul(sigma, eps)?;
    tape.add(mu, noise)
}

/// Per-row analytic KL to the standard normal, shape `[B]`.
pub fn kl_rows(tape: &mut Tape<'_>, mu: Var, log_sigma: Var) -> Result<Var> {
    let mu2 = tape.square(mu);
    let two_ls = tape.scale(log_sigma, 2.0);
    let var = tape.exp(two_ls);
    let a = tape.add(mu2, var)?;
    let b = tape.sub(a, two_ls)?;
    let c = tape.add_scalar(b, -1.0);
    let per_row = tape.row_sums(c)?;
    Ok(tape.scale(per_row, 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn kl_known_values() {
        assert_eq!(kl_standard_normal(&LatentDistribution::standard(4)), 0.0);
        let d = LatentDistribution::new(vec![1.0, 0.0], vec![0.0, 0.0]).unwrap();
        assert!((kl_standard_normal(&d) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_and_vanishing_variance() {
        let d = LatentDistribution::new(vec![0.3, -2.0], vec![1.0, 0.5]).unwrap();
        assert_eq!(sample_z_with(&d, &[0.0, 0.0]), d.mu);
        let tight = LatentDistribution::new(vec![0.0; 3], vec![-20.0; 3]).unwrap();
        assert!(sample_z(&tight, 4).iter().all(|z| z.abs() < 1e-8));
    }

    #[test]
    fn log_sigma_is_clamped() {
        let d = LatentDistribution::new(vec![0.0, 0.0], vec![-50.0, 9.0]).unwrap();
        assert_eq!(d.log_sigma, vec![LOG_SIGMA_MIN, LOG_SIGMA_MAX]);
        assert!(LatentDistribution::new(vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn tape_kl_matches_closed_form() {
        let d = LatentDistribution::new(vec![0.7, -1.1, 0.2], vec![-0.3, 0.4, 0.0]).unwrap();
        let mut tape = Tape::new();
        let mu = tape.constant(Tensor::matrix(1, 3, d.mu.clone()).unwrap());
        let ls = tape.constant(Tensor::matrix(1, 3, d.log_sigma.clone()).unwrap());
        let kl = kl_rows(&mut tape, mu, ls).unwrap();
        assert!((tape.value(kl).data()[0] - kl_standard_normal(&d)).abs() < 1e-14);
    }
}
