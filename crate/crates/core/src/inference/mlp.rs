use rand::Rng;

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Fully connected ReLU network with a linear output layer. Parameters are
/// stored as `[w0, b0, w1, b1, …]` with `w_k` shaped `[fan_in, fan_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    params: Vec<Tensor>,
    sizes: Vec<usize>,
}

impl Mlp {
    /// He-uniform weights, zero biases. The output layer's weights are
    /// additionally multiplied by `output_gain`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output widths");
        let mut params = Vec::with_capacity(2 * (sizes.len() - 1));
        for (k, w) in sizes.windows(2).enumerate() {
            let bound = (6.0 / w[0] as f64).sqrt();
            let gain = if k + 2 == sizes.len() { output_gain } else { 1.0 };
            let data = (0..w[0] * w[1])
                .map(|_| gain * rng.random_range(-bound..bound))
                .collect();
            params.push(Tensor::matrix(w[0], w[1], data).unwrap());
            params.push(Tensor::zeros(&[w[1]]));
        }
        Mlp {
            params,
            sizes: sizes.to_vec(),
        }
    }

    pub fn zeros(sizes: &[usize]) -> Self {
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            params.push(Tensor::zeros(&[w[0], w[1]]));
            params.push(Tensor::zeros(&[w[1]]));
        }
        Mlp {
            params,
            sizes: sizes.to_vec(),
        }
    }

    /// Rebuilds from a parameter list, checking shapes.
    pub fn from_params(sizes: &[usize], params: Vec<Tensor>) -> Result<Self> {
        let want = Self::zeros(sizes);
        if want.params.len() != params.len() || want.params.iter().zip(&params).any(|(a, b)| a.shape() != b.shape()) {
            return Err(Error::contract(format!(
                "parameter list does not match layer sizes {sizes:?}"
            )));
        }
        Ok(Mlp {
            params,
            sizes: sizes.to_vec(),
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_width(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    /// Puts every parameter on the tape (borrowed, no copies).
    pub fn bind<'p>(&'p self, tape: &mut Tape<'p>) -> Vec<Var> {
        self.params.iter().map(|p| tape.param(p)).collect()
    }

    /// Forward pass of a `[B, in]` batch; returns `[B, out]`.
    pub fn forward(&self, tape: &mut Tape<'_>, bound: &[Var], x: Var) -> Result<Var> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 2 || shape[1] != self.input_width() {
            return Err(Error::contract(format!(
                "MLP expects input width {}, got shape {shape:?}",
                self.input_width()
            )));
        }
        let batch = shape[0];
        let layers = bound.len() / 2;
        let mut h = x;
        for k in 0..layers {
            let lin = tape.matmul(h, bound[2 * k])?;
            let bias = tape.repeat_rows(bound[2 * k + 1], batch)?;
            h = tape.add(lin, bias)?;
            if k + 1 < layers {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    /// Forward pass without gradient bookkeeping.
    pub fn eval(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let xv = tape.constant(x.clone());
        let out = self.forward(&mut tape, &bound, xv)?;
        Ok(tape.value(out).clone())
    }
}
