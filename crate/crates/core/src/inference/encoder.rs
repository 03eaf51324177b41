use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::latent::{LatentDistribution, LOG_SIGMA_MAX, LOG_SIGMA_MIN};
use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Named encoder architectures.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderPreset {
    /// 3 hidden layers of 256, z_dim 8.
    Standard,
    /// 5 hidden layers of 1024, used for the evil-twin capacity runs.
    Large,
    /// 2 hidden layers of 256, z_dim 2.
    Small,
}

impl EncoderPreset {
    pub fn hidden(self) -> Vec<usize> {
        match self {
            EncoderPreset::Standard => vec![256; 3],
            EncoderPreset::Large => vec![1024; 5],
            EncoderPreset::Small => vec![256; 2],
        }
    }

    pub fn default_z_dim(self) -> usize {
        match self {
            EncoderPreset::Small => 2,
            _ => 8,
        }
    }
}

impl fmt::Display for EncoderPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncoderPreset::Standard => "standard",
            EncoderPreset::Large => "large",
            EncoderPreset::Small => "small",
        })
    }
}

impl FromStr for EncoderPreset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(EncoderPreset::Standard),
            "large" => Ok(EncoderPreset::Large),
            "small" => Ok(EncoderPreset::Small),
            _ => Err(Error::Config(format!(
                "unknown encoder_preset '{s}' (expected standard, large or small)"
            ))),
        }
    }
}

/// Amortized posterior `x ↦ (μ, log σ)`: an MLP whose last layer has
/// `2·z_dim` outputs, the first half read as μ and the second as log σ.
#[derive(Clone, Debug, PartialEq)]
pub struct Encoder {
    mlp: Mlp,
    z_dim: usize,
}

impl Encoder {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: &[usize], z_dim: usize, rng: &mut R) -> Self {
        // A small output gain keeps the initial posteriors close to the prior.
        Encoder {
            mlp: Mlp::new(&Self::sizes(input, hidden, z_dim), 0.1, rng),
            z_dim,
        }
    }

    pub fn from_preset<R: Rng + ?Sized>(preset: EncoderPreset, input: usize, z_dim: usize, rng: &mut R) -> Self {
        Self::new(input, &preset.hidden(), z_dim, rng)
    }

    pub fn zeros(input: usize, hidden: &[usize], z_dim: usize) -> Self {
        Encoder {
            mlp: Mlp::zeros(&Self::sizes(input, hidden, z_dim)),
            z_dim,
        }
    }

    pub fn from_mlp(mlp: Mlp) -> Result<Self> {
        let out = mlp.output_width();
        if out == 0 || !out.is_multiple_of(2) {
            return Err(Error::contract(format!(
                "encoder output width must be 2·z_dim, got {out}"
            )));
        }
        Ok(Encoder { mlp, z_dim: out / 2 })
    }

    fn sizes(input: usize, hidden: &[usize], z_dim: usize) -> Vec<usize> {
        let mut sizes = vec![input];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * z_dim);
        sizes
    }

    pub fn z_dim(&self) -> usize {
        self.z_dim
    }

    pub fn input_width(&self) -> usize {
        self.mlp.input_width()
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    /// Batched forward pass on the tape: `[B, input] → ([B, z], [B, z])`.
    pub fn forward(&self, tape: &mut Tape<'_>, bound: &[Var], x: Var) -> Result<(Var, Var)> {
        let out = self.mlp.forward(tape, bound, x)?;
        let mu = tape.narrow(out, 1, 0, self.z_dim)?;
        let raw = tape.narrow(out, 1, self.z_dim, self.z_dim)?;
        let log_sigma = tape.clamp(raw, LOG_SIGMA_MIN, LOG_SIGMA_MAX);
        Ok((mu, log_sigma))
    }

    /// Posterior for a single flattened image.
    pub fn encode(&self, x: &[f64]) -> Result<LatentDistribution> {
        if x.len() != self.input_width() {
            return Err(Error::contract(format!(
                "encoder expects {} inputs, got {}",
                self.input_width(),
                x.len()
            )));
        }
        let out = self.mlp.eval(&Tensor::matrix(1, x.len(), x.to_vec())?)?;
        let (mu, ls) = out.data().split_at(self.z_dim);
        LatentDistribution::new(mu.to_vec(), ls.to_vec())
    }

    /// Posteriors for a `[B, input]` batch, returned as `(μ, log σ)` rows.
    pub fn encode_batch(&self, x: &Tensor) -> Result<Vec<LatentDistribution>> {
        let out = self.mlp.eval(x)?;
        (0..out.rows())
            .map(|i| {
                let (mu, ls) = out.row(i).split_at(self.z_dim);
                LatentDistribution::new(mu.to_vec(), ls.to_vec())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_encoder_gives_prior() {
        let enc = Encoder::zeros(16, &[8, 8], 3);
        let d = enc.encode(&[0.7; 16]).unwrap();
        assert_eq!(d, LatentDistribution::standard(3));
    }

    #[test]
    fn deterministic_and_width_checked() {
        let enc = Encoder::from_preset(EncoderPreset::Small, 16, 2, &mut rng::stream(1, "init"));
        let x: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        assert_eq!(enc.encode(&x).unwrap(), enc.encode(&x).unwrap());
        assert!(matches!(enc.encode(&x[..15]), Err(Error::Contract(_))));
    }

    #[test]
    fn batch_matches_single() {
        let enc = Encoder::new(6, &[5], 2, &mut rng::stream(2, "init"));
        let x = Tensor::matrix(2, 6, (0..12).map(|i| i as f64 * 0.1).collect()).unwrap();
        let batch = enc.encode_batch(&x).unwrap();
        let single = enc.encode(x.row(1)).unwrap();
        for (a, b) in batch[1].mu.iter().zip(&single.mu) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn preset_shapes() {
        assert_eq!(EncoderPreset::Large.hidden(), vec![1024; 5]);
        assert_eq!(EncoderPreset::Small.default_z_dim(), 2);
        assert!("huge".parse::<EncoderPreset>().is_err());
    }
}
