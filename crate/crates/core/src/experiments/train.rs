use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::config::{BackendInit, BackendKind, ExperimentConfig};
use super::metrics::{cluster_metrics, ClusterMetrics};
use super::pca::{latent_pca, Pca};
use super::twins::{assign_twins, TwinAssignment};
use crate::decoder::{PixelDecoder, TomographicDecoder};
use crate::error::{Error, Result};
use crate::forward::{Dataset, Mode, PoseOperator};
use crate::inference::{kl_rows, log_likelihood_rows, reparameterize, Encoder, Likelihood, Mlp, VltBackend, VltInit};
use crate::rng;
use crate::tensor::{checkpoint, Adam, AdamConfig, LinearMap, Tape, Tensor, Var};

/// Where `q(z_i)` comes from.
#[derive(Clone, Debug)]
pub enum Backend {
    Encoder(Encoder),
    Vlt(VltBackend),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Decoder {
    Tomographic(TomographicDecoder),
    Pixel(PixelDecoder),
}

impl Decoder {
    pub fn mlp(&self) -> &Mlp {
        match self {
            Decoder::Tomographic(d) => d.mlp(),
            Decoder::Pixel(d) => d.mlp(),
        }
    }

    pub fn mlp_mut(&mut self) -> &mut Mlp {
        match self {
            Decoder::Tomographic(d) => d.mlp_mut(),
            Decoder::Pixel(d) => d.mlp_mut(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Model {
    pub backend: Backend,
    pub decoder: Decoder,
}

impl Model {
    /// Fresh parameters for `cfg` on `data`. The decoder, encoder and table
    /// draw from separate init streams, so an encoder run and a table run
    /// with the same seed start from the same decoder.
    pub fn new(cfg: &ExperimentConfig, data: &Dataset) -> Result<Self> {
        let d = data.image_size();
        let hidden = cfg.decoder_hidden(data.mode);
        let mut dec_rng = rng::item_stream(cfg.seed, "init", 0);
        let decoder = match data.mode {
            Mode::Tomographic => Decoder::Tomographic(TomographicDecoder::new(cfg.z_dim, &hidden, d, &mut dec_rng)),
            Mode::PixelImage => Decoder::Pixel(PixelDecoder::new(cfg.z_dim, &hidden, d, &mut dec_rng)),
        };
        let backend = match cfg.backend {
            BackendKind::Encoder => Backend::Encoder(Encoder::from_preset(
                cfg.encoder_preset,
                data.pixel_count(),
                cfg.z_dim,
                &mut rng::item_stream(cfg.seed, "init", 1),
            )),
            BackendKind::Vlt => {
                let init = match cfg.backend_init {
                    BackendInit::Normal => VltInit::Normal {
                        log_sigma: cfg.vlt_log_sigma,
                    },
                    BackendInit::Zeros => VltInit::Zeros,
                    BackendInit::Checkpoint => {
                        let path = cfg.init_checkpoint.as_ref().expect("validated");
                        let entries = checkpoint::load(path)?;
                        VltInit::Table(checkpoint::find(&entries, "latents")?.clone())
                    }
                };
                Backend::Vlt(VltBackend::new(
                    data.len(),
                    cfg.z_dim,
                    init,
                    cfg.freeze_latents,
                    cfg.latent_step(),
                    &mut rng::item_stream(cfg.seed, "init", 2),
                )?)
            }
        };
        Ok(Model { backend, decoder })
    }

    pub fn z_dim(&self) -> usize {
        self.decoder.mlp().input_width()
    }

    /// `[n, 2·z]` table of `(μ_i, log σ_i)`. Encoder rows are computed from
    /// whatever the encoder was trained on (twins included).
    pub fn latent_table(&self, data: &Dataset, twins: &TwinAssignment) -> Result<Tensor> {
        match &self.backend {
            Backend::Vlt(v) => Ok(v.table().clone()),
            Backend::Encoder(e) => {
                let z = e.z_dim();
                let mut out = Vec::with_capacity(data.len() * 2 * z);
                let idx: Vec<usize> = (0..data.len()).collect();
                for chunk in idx.chunks(256) {
                    let x = encoder_inputs(data, twins, chunk)?;
                    for d in e.encode_batch(&x)? {
                        out.extend_from_slice(&d.mu);
                        out.extend_from_slice(&d.log_sigma);
                    }
                }
                Tensor::matrix(data.len(), 2 * z, out)
            }
        }
    }

    /// Flat checkpoint entries: `decoder.sizes`, `decoder.p{k}`, and either
    /// `encoder.sizes`/`encoder.p{k}` or `table`.
    pub fn checkpoint_entries(&self) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        let mut push_mlp = |prefix: &str, m: &Mlp| {
            let sizes = m.sizes().iter().map(|&s| s as f64).collect();
            out.push((format!("{prefix}.sizes"), Tensor::vector(sizes)));
            for (k, p) in m.params().iter().enumerate() {
                out.push((format!("{prefix}.p{k}"), p.clone()));
            }
        };
        push_mlp("decoder", self.decoder.mlp());
        match &self.backend {
            Backend::Encoder(e) => push_mlp("encoder", e.mlp()),
            Backend::Vlt(v) => out.push(("table".to_string(), v.table().clone())),
        }
        out
    }

    /// Rebuilds a model from [`Self::checkpoint_entries`].
    pub fn from_checkpoint(entries: &[(String, Tensor)], cfg: &ExperimentConfig, data: &Dataset) -> Result<Self> {
        let mlp = |prefix: &str| -> Result<Mlp> {
            let sizes: Vec<usize> = checkpoint::find(entries, &format!("{prefix}.sizes"))?
                .data()
                .iter()
                .map(|&s| s as usize)
                .collect();
            let params = (0..2 * (sizes.len().saturating_sub(1)))
                .map(|k| checkpoint::find(entries, &format!("{prefix}.p{k}")).cloned())
                .collect::<Result<Vec<_>>>()?;
            Mlp::from_params(&sizes, params)
        };
        let d = data.image_size();
        let decoder = match data.mode {
            Mode::Tomographic => Decoder::Tomographic(TomographicDecoder::from_mlp(mlp("decoder")?, d)?),
            Mode::PixelImage => Decoder::Pixel(PixelDecoder::from_mlp(mlp("decoder")?, d)?),
        };
        let backend = match cfg.backend {
            BackendKind::Encoder => Backend::Encoder(Encoder::from_mlp(mlp("encoder")?)?),
            BackendKind::Vlt => Backend::Vlt(VltBackend::new(
                data.len(),
                cfg.z_dim,
                VltInit::Table(checkpoint::find(entries, "table")?.clone()),
                cfg.freeze_latents,
                cfg.latent_step(),
                &mut rng::stream(cfg.seed, "init"),
            )?),
        };
        Ok(Model { backend, decoder })
    }
}

fn encoder_inputs(data: &Dataset, twins: &TwinAssignment, rows: &[usize]) -> Result<Tensor> {
    let w = data.pixel_count();
    let mut x = Vec::with_capacity(rows.len() * w);
    for &i in rows {
        x.extend_from_slice(&twins.input(data, i));
    }
    Tensor::matrix(rows.len(), w, x)
}

/// Per-image means over one epoch. `recon` is the reconstruction loss
/// `−E_q[log p(x | z)]`, so lower is better for all three.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochLosses {
    pub epoch: usize,
    pub neg_elbo: f64,
    pub recon: f64,
    pub kl: f64,
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub losses: Vec<EpochLosses>,
    /// Wall-clock seconds per epoch. Not part of the deterministic output.
    pub seconds: Vec<f64>,
    /// `[n, 2·z]`, row i = `(μ_i, log σ_i)` after training.
    pub latents: Tensor,
    pub truths: Vec<f64>,
    pub labels: Option<Vec<usize>>,
    pub metrics: Option<ClusterMetrics>,
    pub pca: Option<Pca>,
}

impl RunReport {
    pub fn z_dim(&self) -> usize {
        self.latents.row_len() / 2
    }

    pub fn means(&self) -> Vec<Vec<f64>> {
        let z = self.z_dim();
        (0..self.latents.rows())
            .map(|i| self.latents.row(i)[..z].to_vec())
            .collect()
    }

    pub fn mean_seconds(&self) -> f64 {
        if self.seconds.is_empty() {
            0.0
        } else {
            self.seconds.iter().sum::<f64>() / self.seconds.len() as f64
        }
    }
}

pub struct TrainOutcome {
    pub report: RunReport,
    pub model: Model,
}

/// Plain training (the twin mode in `cfg` is honoured, see
/// [`evil_twin_train`]).
pub fn train(cfg: &ExperimentConfig, data: &Dataset) -> Result<TrainOutcome> {
    let twins = assign_twins(cfg.twin_mode, data, cfg.seed)?;
    train_with_twins(cfg, data, &twins)
}

/// Training where the encoder consumes twin inputs while the loss targets
/// the true images.
pub fn evil_twin_train(cfg: &ExperimentConfig, data: &Dataset) -> Result<TrainOutcome> {
    if cfg.twin_mode == super::config::TwinMode::None {
        return Err(Error::Config(
            "evil-twin training needs twin_mode = permutation or noise".into(),
        ));
    }
    train(cfg, data)
}

pub fn train_with_twins(cfg: &ExperimentConfig, data: &Dataset, twins: &TwinAssignment) -> Result<TrainOutcome> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::contract("cannot train on an empty dataset"));
    }
    let mut model = Model::new(cfg, data)?;
    let ops = pose_operators(data)?;
    let likelihood = cfg.likelihood(data.mode);
    let adam = AdamConfig::with_lr(cfg.lr);
    let mut dec_opt = Adam::new(adam, model.decoder.mlp().params());
    let mut enc_opt = match &model.backend {
        Backend::Encoder(e) => Some(Adam::new(adam, e.mlp().params())),
        Backend::Vlt(_) => None,
    };
    let z_dim = cfg.z_dim;
    let n = data.len();
    let mut losses = Vec::with_capacity(cfg.epochs);
    let mut seconds = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::item_stream(cfg.seed, "shuffle", epoch as u64));
        let mut sample = rng::item_stream(cfg.seed, "sample", epoch as u64);
        let (mut sum_ll, mut sum_kl) = (0.0, 0.0);

        for (b, rows) in order.chunks(cfg.batch_size).enumerate() {
            let eps: Vec<f64> = (0..rows.len() * z_dim).map(|_| sample.sample(StandardNormal)).collect();
            let eps = Tensor::matrix(rows.len(), z_dim, eps)?;

            let (grads, ll_rows, kl_rows_v) = {
                let mut tape = Tape::new();
                let graph = batch_graph(&mut tape, &model, data, twins, &ops, rows, eps, likelihood, cfg.beta)?;
                let ll_v = tape.value(graph.log_likelihood).data().to_vec();
                let kl_v = tape.value(graph.kl).data().to_vec();
                if !tape.value(graph.loss).data()[0].is_finite() {
                    let per: Vec<f64> = tape.value(graph.per_row).data().iter().map(|v| -v).collect();
                    return Err(Error::NonFinite {
                        epoch: epoch + 1,
                        batch: b,
                        snapshot: format!("indices={rows:?} neg_elbo={per:?}"),
                    });
                }
                let mut g = tape.backward(graph.loss)?;
                let take = |g: &mut crate::tensor::Gradients, vars: &[Var]| -> Result<Vec<Tensor>> {
                    vars.iter()
                        .map(|&v| g.take(v).ok_or_else(|| Error::contract("missing parameter gradient")))
                        .collect()
                };
                let dec_g = take(&mut g, &graph.decoder_vars)?;
                let enc_g = take(&mut g, &graph.encoder_vars)?;
                let table_g = match graph.table_var {
                    Some(t) if tape.requires_grad(t) => g.take(t),
                    _ => None,
                };
                ((dec_g, enc_g, table_g), ll_v, kl_v)
            };
            sum_ll += ll_rows.iter().sum::<f64>();
            sum_kl += kl_rows_v.iter().sum::<f64>();

            let (dec_g, enc_g, table_g) = grads;
            dec_opt.step(model.decoder.mlp_mut().params_mut(), &dec_g)?;
            match &mut model.backend {
                Backend::Encoder(e) => enc_opt
                    .as_mut()
                    .expect("encoder optimizer")
                    .step(e.mlp_mut().params_mut(), &enc_g)?,
                Backend::Vlt(v) => {
                    if let Some(g) = table_g {
                        v.step(&g, rows)?;
                    }
                }
            }
        }
        let nf = n as f64;
        let recon = -sum_ll / nf;
        let kl = sum_kl / nf;
        losses.push(EpochLosses {
            epoch: epoch + 1,
            neg_elbo: recon + cfg.beta * kl,
            recon,
            kl,
        });
        seconds.push(start.elapsed().as_secs_f64());
    }

    let latents = model.latent_table(data, twins)?;
    let report = summarize(cfg.clone(), data, latents, losses, seconds)?;
    Ok(TrainOutcome { report, model })
}

/// One imaging operator per image; empty for pixel data.
pub fn pose_operators(data: &Dataset) -> Result<Vec<Arc<dyn LinearMap>>> {
    match data.mode {
        Mode::Tomographic => data
            .images
            .iter()
            .map(|p| Ok(Arc::new(PoseOperator::new(data.image_size(), &p.pose)?) as Arc<dyn LinearMap>))
            .collect(),
        Mode::PixelImage => Ok(Vec::new()),
    }
}

/// Handles into the graph of one minibatch objective.
pub struct BatchGraph {
    /// `−mean_i (log p(x_i | z_i) − β·KL_i)`, the minimized scalar.
    pub loss: Var,
    /// `log p(x_i | z_i) − β·KL_i` per row.
    pub per_row: Var,
    pub log_likelihood: Var,
    pub kl: Var,
    pub decoder_vars: Vec<Var>,
    pub encoder_vars: Vec<Var>,
    pub table_var: Option<Var>,
}

/// Records the single-sample negative ELBO of `rows` on `tape`, with the
/// reparameterization noise `eps` (`[rows, z]`) supplied by the caller.
#[allow(clippy::too_many_arguments)]
pub fn batch_graph<'p>(
    tape: &mut Tape<'p>,
    model: &'p Model,
    data: &Dataset,
    twins: &TwinAssignment,
    ops: &[Arc<dyn LinearMap>],
    rows: &[usize],
    eps: Tensor,
    likelihood: Likelihood,
    beta: f64,
) -> Result<BatchGraph> {
    let x = data.batch(rows);
    let decoder_vars = model.decoder.mlp().bind(tape);
    let (mu, ls, encoder_vars, table_var) = match &model.backend {
        Backend::Encoder(e) => {
            let vars = e.mlp().bind(tape);
            let xin = tape.constant(encoder_inputs(data, twins, rows)?);
            let (mu, ls) = e.forward(tape, &vars, xin)?;
            (mu, ls, vars, None)
        }
        Backend::Vlt(v) => {
            let (t, mu, ls) = v.lookup_rows(tape, rows)?;
            (mu, ls, Vec::new(), Some(t))
        }
    };
    let eps = tape.constant(eps);
    let z = reparameterize(tape, mu, ls, eps)?;
    let x_hat = match &model.decoder {
        Decoder::Tomographic(d) => {
            if ops.len() != data.len() {
                return Err(Error::contract("one imaging operator per image is required"));
            }
            let batch_ops = rows.iter().map(|&i| Arc::clone(&ops[i])).collect();
            d.render_rows(tape, &decoder_vars, z, batch_ops)?
        }
        Decoder::Pixel(d) => d.decode_rows(tape, &decoder_vars, z)?,
    };
    let log_likelihood = log_likelihood_rows(tape, x_hat, &x, likelihood)?;
    let kl = kl_rows(tape, mu, ls)?;
    let weighted = tape.scale(kl, beta);
    let per_row = tape.sub(log_likelihood, weighted)?;
    let mean = tape.mean(per_row);
    let loss = tape.scale(mean, -1.0);
    Ok(BatchGraph {
        loss,
        per_row,
        log_likelihood,
        kl,
        decoder_vars,
        encoder_vars,
        table_var,
    })
}

fn summarize(
    config: ExperimentConfig,
    data: &Dataset,
    latents: Tensor,
    losses: Vec<EpochLosses>,
    seconds: Vec<f64>,
) -> Result<RunReport> {
    let z = latents.row_len() / 2;
    let means: Vec<Vec<f64>> = (0..latents.rows()).map(|i| latents.row(i)[..z].to_vec()).collect();
    let labels = data.discrete_labels();
    let metrics = labels.as_ref().map(|l| cluster_metrics(&means, l)).transpose()?;
    let pca = if z >= 2 { Some(latent_pca(&means)?) } else { None };
    Ok(RunReport {
        config,
        losses,
        seconds,
        latents,
        truths: data.truths(),
        labels,
        metrics,
        pca,
    })
}
