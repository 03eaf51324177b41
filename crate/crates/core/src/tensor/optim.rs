//! First-order optimizers over flat parameter lists.

use super::array::Tensor;
use crate::error::{Error, Result};

fn check(params: &[Tensor], grads: &[Tensor]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::contract(format!(
            "missing gradient: {} parameters but {} gradients",
            params.len(),
            grads.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() {
            return Err(Error::Shape {
                op: "optimizer step",
                lhs: p.shape().to_vec(),
                rhs: g.shape().to_vec(),
            });
        }
        if g.is_empty() && !p.is_empty() {
            return Err(Error::contract(format!("missing gradient for parameter {i}")));
        }
    }
    Ok(())
}

/// Plain gradient descent: `w ← w − lr·g`.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn new(lr: f64) -> Self {
        Sgd { lr }
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        check(params, grads)?;
        for (p, g) in params.iter_mut().zip(grads) {
            for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
                *w -= self.lr * d;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }

    #[inline]
    fn update(&self, w: &mut f64, g: f64, m: &mut f64, v: &mut f64, bc1: f64, bc2: f64) {
        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        let mhat = *m / bc1;
        let vhat = *v / bc2;
        *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
    }
}

/// Adam with bias correction. One moment pair per parameter tensor.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        Adam {
            config,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            t: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        check(params, grads)?;
        if params.len() != self.m.len() {
            return Err(Error::contract("optimizer state does not match parameter list"));
        }
        self.t += 1;
        let bc1 = 1.0 - self.config.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.config.beta2.powi(self.t as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (((w, &d), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                self.config.update(w, d, mi, vi, bc1, bc2);
            }
        }
        Ok(())
    }
}

/// Update rule for lookup-table rows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RowStep {
    Adam(AdamConfig),
    /// `row ← row − lr·g`.
    Sgd {
        lr: f64,
    },
}

impl From<AdamConfig> for RowStep {
    fn from(c: AdamConfig) -> Self {
        RowStep::Adam(c)
    }
}

/// Row-sparse optimizer for lookup tables: only the rows named in a step
/// are read or written, and under Adam each row keeps its own step count
/// for bias correction. Rows outside the step are left bitwise untouched.
#[derive(Clone, Debug)]
pub struct RowOptimizer {
    pub rule: RowStep,
    m: Vec<f64>,
    v: Vec<f64>,
    t: Vec<u32>,
    width: usize,
}

impl RowOptimizer {
    pub fn new(rule: RowStep, table: &Tensor) -> Self {
        let moments = match rule {
            RowStep::Adam(_) => table.len(),
            RowStep::Sgd { .. } => 0,
        };
        RowOptimizer {
            rule,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            t: vec![0; table.rows()],
            width: table.row_len(),
        }
    }

    /// `rows` may repeat; each distinct row is updated once with its
    /// accumulated gradient.
    pub fn step_rows(&mut self, table: &mut Tensor, grad: &Tensor, rows: &[usize]) -> Result<()> {
        if table.shape() != grad.shape() {
            return Err(Error::Shape {
                op: "row optimizer",
                lhs: table.shape().to_vec(),
                rhs: grad.shape().to_vec(),
            });
        }
        let mut distinct = rows.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let w = self.width;
        for r in distinct {
            if r >= self.t.len() {
                return Err(Error::Lookup(format!("row {r} out of range")));
            }
            self.t[r] += 1;
            let span = r * w..(r + 1) * w;
            let g = &grad.data()[span.clone()];
            let row = &mut table.data_mut()[span.clone()];
            match self.rule {
                RowStep::Sgd { lr } => {
                    for (x, &d) in row.iter_mut().zip(g) {
                        *x -= lr * d;
                    }
                }
                RowStep::Adam(c) => {
                    let t = self.t[r] as i32;
                    let bc1 = 1.0 - c.beta1.powi(t);
                    let bc2 = 1.0 - c.beta2.powi(t);
                    for (j, (x, &d)) in row.iter_mut().zip(g).enumerate() {
                        let k = span.start + j;
                        c.update(x, d, &mut self.m[k], &mut self.v[k], bc1, bc2);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_single_step() {
        let mut p = vec![Tensor::vector(vec![1.0])];
        Sgd::new(0.1).step(&mut p, &[Tensor::vector(vec![2.0])]).unwrap();
        assert!((p[0].data()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_bounded_by_lr() {
        let mut p = vec![Tensor::vector(vec![0.0, 0.0, 0.0])];
        let g = vec![Tensor::vector(vec![1e-3, -5.0, 1e4])];
        let mut opt = Adam::new(AdamConfig::with_lr(0.01), &p);
        opt.step(&mut p, &g).unwrap();
        for (w, d) in p[0].data().iter().zip(g[0].data()) {
            assert!(w.abs() <= 0.01 * (1.0 + 1e-6));
            assert!(w.signum() == -d.signum());
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let init = Tensor::vector(vec![0.3, -1.2]);
        let mut p = vec![init.clone()];
        let mut opt = Adam::new(AdamConfig::default(), &p);
        opt.step(&mut p, &[Tensor::zeros(&[2])]).unwrap();
        assert_eq!(p[0], init);
        Sgd::new(1.0).step(&mut p, &[Tensor::zeros(&[2])]).unwrap();
        assert_eq!(p[0], init);
    }

    #[test]
    fn missing_gradient_is_a_contract_error() {
        let mut p = vec![Tensor::zeros(&[2]), Tensor::zeros(&[3])];
        let mut opt = Adam::new(AdamConfig::default(), &p);
        assert!(matches!(
            opt.step(&mut p, &[Tensor::zeros(&[2])]),
            Err(Error::Contract(_))
        ));
        assert!(Sgd::new(0.1).step(&mut p, &[]).is_err());
    }

    #[test]
    fn row_adam_touches_named_rows_only() {
        let mut table = Tensor::matrix(3, 2, vec![1.0; 6]).unwrap();
        let before = table.clone();
        let grad = Tensor::matrix(3, 2, vec![1.0; 6]).unwrap();
        let mut opt = RowOptimizer::new(AdamConfig::with_lr(0.1).into(), &table);
        opt.step_rows(&mut table, &grad, &[1]).unwrap();
        assert_eq!(table.row(0), before.row(0));
        assert_eq!(table.row(2), before.row(2));
        assert!(table.row(1).iter().all(|&v| (v - 0.9).abs() < 1e-9));
    }

    #[test]
    fn row_sgd_steps_along_the_gradient() {
        let mut table = Tensor::matrix(2, 2, vec![1.0; 4]).unwrap();
        let grad = Tensor::matrix(2, 2, vec![0.0, 0.0, 2.0, -4.0]).unwrap();
        let mut opt = RowOptimizer::new(RowStep::Sgd { lr: 0.25 }, &table);
        opt.step_rows(&mut table, &grad, &[1, 1]).unwrap();
        assert_eq!(table.data(), &[1.0, 1.0, 0.5, 2.0]);
    }
}
