use rand::Rng;

use crate::error::{Error, Result};
use crate::forward::Image;
use crate::inference::Mlp;
use crate::tensor::{Tape, Tensor, Var};

/// `z ↦ σ(MLP(z))`, a `D×D` image of Bernoulli means.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelDecoder {
    mlp: Mlp,
    size: usize,
}

impl PixelDecoder {
    pub fn new<R: Rng + ?Sized>(z_dim: usize, hidden: &[usize], size: usize, rng: &mut R) -> Self {
        PixelDecoder {
            mlp: Mlp::new(&Self::sizes(z_dim, hidden, size), 1.0, rng),
            size,
        }
    }

    pub fn zeros(z_dim: usize, hidden: &[usize], size: usize) -> Self {
        PixelDecoder {
            mlp: Mlp::zeros(&Self::sizes(z_dim, hidden, size)),
            size,
        }
    }

    pub fn from_mlp(mlp: Mlp, size: usize) -> Result<Self> {
        if mlp.output_width() != size * size {
            return Err(Error::contract(format!(
                "decoder output width {} is not {size}²",
                mlp.output_width()
            )));
        }
        Ok(PixelDecoder { mlp, size })
    }

    fn sizes(z_dim: usize, hidden: &[usize], size: usize) -> Vec<usize> {
        let mut s = vec![z_dim];
        s.extend_from_slice(hidden);
        s.push(size * size);
        s
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn z_dim(&self) -> usize {
        self.mlp.input_width()
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        &mut self.mlp
    }

    pub fn decode_pixels(&self, z: &[f64]) -> Result<Image> {
        if z.len() != self.z_dim() {
            return Err(Error::contract(format!(
                "decoder expects z of length {}, got {}",
                self.z_dim(),
                z.len()
            )));
        }
        let logits = self.mlp.eval(&Tensor::matrix(1, z.len(), z.to_vec())?)?;
        Image::new(self.size, logits.map(crate::tensor::sigmoid).into_data())
    }

    /// `[B, z_dim] → [B, D²]` on the tape.
    pub fn decode_rows(&self, tape: &mut Tape<'_>, bound: &[Var], z: Var) -> Result<Var> {
        let logits = self.mlp.forward(tape, bound, z)?;
        Ok(tape.sigmoid(logits))
    }
}
