use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;

use super::latent::{LatentDistribution, LOG_SIGMA_MAX, LOG_SIGMA_MIN};
use crate::error::{Error, Result};
use crate::tensor::{RowOptimizer, RowStep, Tape, Tensor, Var};

/// How a lookup table starts out.
#[derive(Clone, Debug, PartialEq)]
pub enum VltInit {
    /// μ ~ N(0, I), log σ = `log_sigma`.
    Normal { log_sigma: f64 },
    /// μ = 0, log σ = −8.
    Zeros,
    /// Rows copied from an existing `[n, 2·z]` table, e.g. an encoder's output.
    Table(Tensor),
}

pub const ZERO_INIT_LOG_SIGMA: f64 = -8.0;

/// Variational lookup table: row `i` holds `(μ_i, log σ_i)` for dataset
/// item `i`. Rows are independent parameters; a step only touches the rows
/// of the current minibatch.
#[derive(Clone, Debug)]
pub struct VltBackend {
    table: Tensor,
    z_dim: usize,
    frozen: bool,
    optim: RowOptimizer,
}

impl VltBackend {
    pub fn new<R: Rng + ?Sized>(
        n: usize,
        z_dim: usize,
        init: VltInit,
        frozen: bool,
        optim: impl Into<RowStep>,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 || z_dim == 0 {
            return Err(Error::contract("lookup table needs n ≥ 1 and z_dim ≥ 1"));
        }
        let table = match init {
            VltInit::Normal { log_sigma } => {
                let mut t = Tensor::full(&[n, 2 * z_dim], log_sigma);
                for i in 0..n {
                    for v in &mut t.row_mut(i)[..z_dim] {
                        *v = rng.sample(StandardNormal);
                    }
                }
                t
            }
            VltInit::Zeros => {
                let mut t = Tensor::zeros(&[n, 2 * z_dim]);
                for i in 0..n {
                    t.row_mut(i)[z_dim..].fill(ZERO_INIT_LOG_SIGMA);
                }
                t
            }
            VltInit::Table(t) => {
                if t.shape() != [n, 2 * z_dim] {
                    return Err(Error::Shape {
                        op: "lookup table init",
                        lhs: vec![n, 2 * z_dim],
                        rhs: t.shape().to_vec(),
                    });
                }
                if !t.all_finite() {
                    return Err(Error::contract("initial lookup table is not finite"));
                }
                t
            }
        };
        let mut backend = VltBackend {
            optim: RowOptimizer::new(optim.into(), &table),
            table,
            z_dim,
            frozen,
        };
        let all: Vec<usize> = (0..n).collect();
        backend.clamp_rows(&all);
        Ok(backend)
    }

    pub fn len(&self) -> usize {
        self.table.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn z_dim(&self) -> usize {
        self.z_dim
    }

    pub fn frozen(&self) -> bool {
        self.frozen
    }

    pub fn table(&self) -> &Tensor {
        &self.table
    }

    fn check(&self, i: usize) -> Result<()> {
        if i >= self.len() {
            return Err(Error::Lookup(format!(
                "latent row {i} out of range for a table of {}",
                self.len()
            )));
        }
        Ok(())
    }

    pub fn lookup(&self, i: usize) -> Result<LatentDistribution> {
        self.check(i)?;
        let (mu, ls) = self.table.row(i).split_at(self.z_dim);
        Ok(LatentDistribution {
            mu: mu.to_vec(),
            log_sigma: ls.to_vec(),
        })
    }

    pub fn set_row(&mut self, i: usize, d: &LatentDistribution) -> Result<()> {
        self.check(i)?;
        if d.dim() != self.z_dim {
            return Err(Error::Shape {
                op: "set_row",
                lhs: vec![self.z_dim],
                rhs: vec![d.dim()],
            });
        }
        let row = self.table.row_mut(i);
        row[..self.z_dim].copy_from_slice(&d.mu);
        row[self.z_dim..].copy_from_slice(&d.log_sigma);
        self.clamp_rows(&[i]);
        Ok(())
    }

    /// Binds the table to the tape and selects `rows`, returning
    /// `(table_var, μ [B, z], log σ [B, z])`. Gradients reach only the
    /// selected rows. A frozen table is bound as a constant.
    pub fn lookup_rows<'p>(&'p self, tape: &mut Tape<'p>, rows: &[usize]) -> Result<(Var, Var, Var)> {
        for &i in rows {
            self.check(i)?;
        }
        let table = if self.frozen {
            tape.constant(self.table.clone())
        } else {
            tape.param(&self.table)
        };
        let picked = tape.index_select(table, rows)?;
        let mu = tape.narrow(picked, 1, 0, self.z_dim)?;
        let ls = tape.narrow(picked, 1, self.z_dim, self.z_dim)?;
        Ok((table, mu, ls))
    }

    /// Updates `rows` from the gradient of the batch-mean loss. No-op when
    /// frozen. Under SGD the gradient is first scaled by the batch length, so
    /// each row descends its own term and `lr` does not depend on batch size.
    pub fn step(&mut self, grad: &Tensor, rows: &[usize]) -> Result<()> {
        if self.frozen {
            return Ok(());
        }
        match self.optim.rule {
            RowStep::Sgd { .. } => {
                let mut g = grad.clone();
                let b = rows.len() as f64;
                g.data_mut().iter_mut().for_each(|v| *v *= b);
                self.optim.step_rows(&mut self.table, &g, rows)?;
            }
            RowStep::Adam(_) => self.optim.step_rows(&mut self.table, grad, rows)?,
        }
        self.clamp_rows(rows);
        Ok(())
    }

    fn clamp_rows(&mut self, rows: &[usize]) {
        for &i in rows {
            for v in &mut self.table.row_mut(i)[self.z_dim..] {
                *v = v.clamp(LOG_SIGMA_MIN, LOG_SIGMA_MAX);
            }
        }
    }

    /// `index, mu_0…, log_sigma_0…` with one line per row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        for j in 0..self.z_dim {
            write!(out, ",mu_{j}").unwrap();
        }
        for j in 0..self.z_dim {
            write!(out, ",log_sigma_{j}").unwrap();
        }
        out.push('\n');
        for i in 0..self.len() {
            write!(out, "{i}").unwrap();
            for v in self.table.row(i) {
                write!(out, ",{v:e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::tensor::AdamConfig;

    fn table(n: usize, frozen: bool) -> VltBackend {
        VltBackend::new(
            n,
            2,
            VltInit::Normal { log_sigma: 0.0 },
            frozen,
            AdamConfig::with_lr(0.1),
            &mut rng::stream(3, "init"),
        )
        .unwrap()
    }

    #[test]
    fn set_then_lookup() {
        let mut vlt = table(5, false);
        let d = LatentDistribution::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        vlt.set_row(3, &d).unwrap();
        assert_eq!(vlt.lookup(3).unwrap(), d);
        assert!(matches!(vlt.lookup(5), Err(Error::Lookup(_))));
    }

    #[test]
    fn gradient_reaches_only_selected_rows() {
        let mut vlt = table(6, false);
        let before = vlt.table().clone();
        let grad = {
            let mut tape = Tape::new();
            let (t, mu, _) = vlt.lookup_rows(&mut tape, &[3]).unwrap();
            let sq = tape.square(mu);
            let loss = tape.sum(sq);
            let g = tape.backward(loss).unwrap();
            g.expect(t).unwrap().clone()
        };
        for i in 0..6 {
            let nonzero = grad.row(i).iter().any(|v| *v != 0.0);
            assert_eq!(nonzero, i == 3);
        }
        vlt.step(&grad, &[3]).unwrap();
        for i in 0..6 {
            assert_eq!(vlt.table().row(i) == before.row(i), i != 3, "row {i}");
        }
    }

    #[test]
    fn frozen_table_is_never_touched() {
        let mut vlt = table(4, true);
        let before = vlt.table().clone();
        let grad = Tensor::ones(&[4, 4]);
        vlt.step(&grad, &[0, 1, 2, 3]).unwrap();
        assert_eq!(vlt.table(), &before);
        let mut tape = Tape::new();
        let (t, _, _) = vlt.lookup_rows(&mut tape, &[0]).unwrap();
        assert!(!tape.requires_grad(t));
    }

    #[test]
    fn zero_init_and_table_init() {
        let vlt = VltBackend::new(
            3,
            2,
            VltInit::Zeros,
            true,
            AdamConfig::default(),
            &mut rng::stream(0, "init"),
        )
        .unwrap();
        assert_eq!(vlt.lookup(2).unwrap().log_sigma, vec![-8.0, -8.0]);
        let bad = VltInit::Table(Tensor::zeros(&[3, 3]));
        assert!(VltBackend::new(3, 2, bad, false, AdamConfig::default(), &mut rng::stream(0, "init")).is_err());
        assert!(vlt
            .to_csv()
            .starts_with("index,mu_0,mu_1,log_sigma_0,log_sigma_1\n0,0e0,0e0,-8e0,-8e0\n"));
    }
}
