//! The scalar conjugate model `z ~ N(0, 1)`, `x | z ~ N(a·z, s²)`.
//!
//! Everything here has a closed form, which makes it the reference against
//! which the variational machinery is checked: for any Gaussian `q`,
//! `ELBO(q) + KL(q ‖ p(z | x)) = log p(x)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearGaussian {
    pub a: f64,
    pub s: f64,
}

/// Exact posterior `(mean, variance)` of `z` given `x`.
pub fn exact_linear_gaussian_posterior(x: f64, a: f64, s: f64) -> Result<(f64, f64)> {
    LinearGaussian::new(a, s)?.posterior(x)
}

fn log_normal(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * PI * var).ln() - (x - mean) * (x - mean) / (2.0 * var)
}

impl LinearGaussian {
    pub fn new(a: f64, s: f64) -> Result<Self> {
        if s.is_nan() || s <= 0.0 || !a.is_finite() || !s.is_finite() {
            return Err(Error::contract(format!(
                "linear-Gaussian model needs finite a and s > 0, got a={a}, s={s}"
            )));
        }
        Ok(LinearGaussian { a, s })
    }

    pub fn posterior(&self, x: f64) -> Result<(f64, f64)> {
        let denom = self.a * self.a + self.s * self.s;
        Ok((self.a * x / denom, self.s * self.s / denom))
    }

    /// `log p(x)` with `x ~ N(0, a² + s²)`.
    pub fn log_evidence(&self, x: f64) -> f64 {
        log_normal(x, 0.0, self.a * self.a + self.s * self.s)
    }

    /// Unnormalized `log p(x, z)`.
    pub fn log_joint(&self, x: f64, z: f64) -> f64 {
        log_normal(z, 0.0, 1.0) + log_normal(x, self.a * z, self.s * self.s)
    }

    /// `E_q[log p(x | z)]` for `q = N(μ, σ²)`.
    pub fn expected_log_likelihood(&self, x: f64, mu: f64, sigma: f64) -> f64 {
        let r = x - self.a * mu;
        -0.5 * (2.0 * PI * self.s * self.s).ln() - (r * r + self.a * self.a * sigma * sigma) / (2.0 * self.s * self.s)
    }

    pub fn elbo(&self, x: f64, mu: f64, sigma: f64) -> f64 {
        let kl = 0.5 * (mu * mu + sigma * sigma - 1.0) - sigma.ln();
        self.expected_log_likelihood(x, mu, sigma) - kl
    }

    /// `KL(N(μ, σ²) ‖ p(z | x))`.
    pub fn kl_to_posterior(&self, x: f64, mu: f64, sigma: f64) -> f64 {
        let (m, v) = self.posterior(x).expect("validated at construction");
        0.5 * ((sigma * sigma + (mu - m) * (mu - m)) / v - 1.0 + v.ln()) - sigma.ln()
    }

    /// Tape version of [`Self::expected_log_likelihood`] for columns
    /// `μ, log σ` of shape `[B, 1]` against observations `x` (length B).
    /// Returns `[B]`.
    pub fn expected_log_likelihood_rows(&self, tape: &mut Tape<'_>, mu: Var, log_sigma: Var, x: &[f64]) -> Result<Var> {
        let xs = tape.constant(crate::tensor::Tensor::matrix(x.len(), 1, x.to_vec())?);
        let pred = tape.scale(mu, self.a);
        let r = tape.sub(xs, pred)?;
        let r2 = tape.square(r);
        let two_ls = tape.scale(log_sigma, 2.0);
        let var = tape.exp(two_ls);
        let spread = tape.scale(var, self.a * self.a);
        let total = tape.add(r2, spread)?;
        let rows = tape.row_sums(total)?;
        let scaled = tape.scale(rows, -1.0 / (2.0 * self.s * self.s));
        Ok(tape.add_scalar(scaled, -0.5 * (2.0 * PI * self.s * self.s).ln()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conjugate_examples() {
        assert_eq!(exact_linear_gaussian_posterior(2.0, 1.0, 1.0).unwrap(), (1.0, 0.5));
        assert_eq!(exact_linear_gaussian_posterior(5.0, 0.0, 2.0).unwrap(), (0.0, 1.0));
        assert!(exact_linear_gaussian_posterior(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn elbo_is_tight_at_the_posterior() {
        let m = LinearGaussian::new(1.3, 0.6).unwrap();
        let (mean, var) = m.posterior(0.9).unwrap();
        assert!((m.elbo(0.9, mean, var.sqrt()) - m.log_evidence(0.9)).abs() < 1e-12);
        assert!(m.kl_to_posterior(0.9, mean, var.sqrt()).abs() < 1e-12);
        assert!(m.elbo(0.9, mean + 0.1, var.sqrt()) < m.log_evidence(0.9));
    }
}
