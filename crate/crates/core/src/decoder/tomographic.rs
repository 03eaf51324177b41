use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::forward::{Image, Pose, PoseOperator, Volume};
use crate::inference::Mlp;
use crate::tensor::{LinearMap, Tape, Tensor, Var};

/// `z ↦ V̂(z)`, an MLP with `L³` outputs read as a voxel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TomographicDecoder {
    mlp: Mlp,
    size: usize,
}

impl TomographicDecoder {
    pub fn new<R: Rng + ?Sized>(z_dim: usize, hidden: &[usize], size: usize, rng: &mut R) -> Self {
        TomographicDecoder {
            mlp: Mlp::new(&Self::sizes(z_dim, hidden, size), 0.1, rng),
            size,
        }
    }

    pub fn zeros(z_dim: usize, hidden: &[usize], size: usize) -> Self {
        TomographicDecoder {
            mlp: Mlp::zeros(&Self::sizes(z_dim, hidden, size)),
            size,
        }
    }

    pub fn from_mlp(mlp: Mlp, size: usize) -> Result<Self> {
        if mlp.output_width() != size.pow(3) {
            return Err(Error::contract(format!(
                "decoder output width {} is not {size}³",
                mlp.output_width()
            )));
        }
        Ok(TomographicDecoder { mlp, size })
    }

    fn sizes(z_dim: usize, hidden: &[usize], size: usize) -> Vec<usize> {
        let mut s = vec![z_dim];
        s.extend_from_slice(hidden);
        s.push(size.pow(3));
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

    fn check_z(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.z_dim() {
            return Err(Error::contract(format!(
                "decoder expects z of length {}, got {}",
                self.z_dim(),
                z.len()
            )));
        }
        Ok(())
    }

    pub fn decode_volume(&self, z: &[f64]) -> Result<Volume> {
        self.check_z(z)?;
        let out = self.mlp.eval(&Tensor::matrix(1, z.len(), z.to_vec())?)?;
        Volume::new(self.size, out.into_data())
    }

    /// `x̂ = h ∗ (T_t P R_ω V̂(z))`.
    pub fn render(&self, z: &[f64], pose: &Pose) -> Result<Image> {
        let v = self.decode_volume(z)?;
        let op = PoseOperator::new(self.size, pose)?;
        let mut out = vec![0.0; self.size * self.size];
        op.apply(v.data(), &mut out);
        Image::new(self.size, out)
    }

    /// Batched render on the tape: `z` is `[B, z_dim]`, one operator per row.
    /// Returns `[B, D²]`.
    pub fn render_rows(&self, tape: &mut Tape<'_>, bound: &[Var], z: Var, ops: Vec<Arc<dyn LinearMap>>) -> Result<Var> {
        let volumes = self.mlp.forward(tape, bound, z)?;
        tape.linear_rows(volumes, ops)
    }
}
