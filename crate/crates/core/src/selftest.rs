//! The oracle suite: finite-difference gradients, dense-matrix adjoints,
//! Monte-Carlo KL, and the linear-Gaussian ELBO identity. Every check uses
//! fixed internal seeds, so the output is identical run to run.

use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::check::{adjoint_mismatch, finite_difference, monte_carlo_kl, quadrature_posterior, relative_error};
use crate::error::{Error, Result};
use crate::experiments::{batch_graph, pose_operators, Backend, ExperimentConfig, Model, TwinAssignment};
use crate::forward::idx::{dataset_from_idx, encode_idx};
use crate::forward::{
    CtfFilter, Dataset, Pose, PoseOperator, Projection, Quaternion, Rotation, Translation, KERNEL_BANK,
};
use crate::inference::{
    kl_rows, kl_standard_normal, log_likelihood_rows, reparameterize, LatentDistribution, Likelihood, LinearGaussian,
    Mlp, VltBackend, VltInit,
};
use crate::rng::{self, Rng as StreamRng};
use crate::tensor::{AdamConfig, LinearMap, Tape, Tensor, Var};

pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const ADJOINT_TOLERANCE: f64 = 1e-10;
pub const KL_RELATIVE_TOLERANCE: f64 = 0.01;
pub const KL_SAMPLES: usize = 1_000_000;
pub const ELBO_IDENTITY_TOLERANCE: f64 = 1e-8;
pub const VLT_MEAN_TOLERANCE: f64 = 1e-3;
pub const VLT_SD_TOLERANCE: f64 = 1e-2;

const SEED: u64 = 0x5e1f_7e57;
const FD_STEP: f64 = 1e-5;
const FD_COORDS: usize = 24;

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// The measured quantity, e.g. `rel_err=3.1e-11`.
    pub detail: String,
}

impl CheckResult {
    fn bounded(name: impl Into<String>, label: &str, value: f64, tol: f64) -> Self {
        CheckResult {
            name: name.into(),
            passed: value < tol,
            detail: format!("{label}={value:.3e} (< {tol:e})"),
        }
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {} {}", self.name, self.detail)
    }
}

#[derive(Clone, Debug)]
pub struct SelftestReport {
    pub checks: Vec<CheckResult>,
    pub seconds: f64,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }
}

/// Runs every family of checks in a fixed order.
pub fn run_selftest() -> Result<SelftestReport> {
    let start = Instant::now();
    let mut checks = gradient_checks()?;
    checks.extend(adjoint_checks(16)?);
    checks.extend(kl_checks()?);
    checks.extend(elbo_identity_checks()?);
    checks.push(vlt_posterior_check()?.into_check());
    Ok(SelftestReport {
        checks,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn random_tensor(r: &mut StreamRng, shape: &[usize], f: impl Fn(&mut StreamRng) -> f64) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| f(r)).collect();
    Tensor::new(shape.to_vec(), data).expect("shape matches data")
}

fn normal(r: &mut StreamRng) -> f64 {
    r.sample(StandardNormal)
}

/// Values with `|x| ∈ [0.1, 1.1]`, keeping ReLU and clamp kinks out of reach
/// of the finite-difference step.
fn off_kink(r: &mut StreamRng) -> f64 {
    let m = 0.1 + r.random::<f64>();
    if r.random_bool(0.5) {
        m
    } else {
        -m
    }
}

fn positive(r: &mut StreamRng) -> f64 {
    0.5 + 1.5 * r.random::<f64>()
}

fn sample_coords(r: &mut StreamRng, len: usize) -> Vec<usize> {
    if len <= FD_COORDS {
        (0..len).collect()
    } else {
        (0..FD_COORDS).map(|_| r.random_range(0..len)).collect()
    }
}

fn random_pose(r: &mut StreamRng, size: usize) -> Pose {
    let bound = size as f64 / 8.0;
    Pose {
        rotation: Quaternion::random(r),
        translation: [r.random_range(-bound..bound), r.random_range(-bound..bound)],
        ctf_kernel: r.random_range(0..KERNEL_BANK.len()),
    }
}

type Build<'a> = dyn Fn(&mut Tape<'_>, &[Var]) -> Result<Var> + 'a;

/// Analytic gradient of `Σ w ⊙ op(inputs)` for fixed random `w`, checked
/// against central differences on a sample of coordinates of every input.
fn op_check(name: &str, inputs: Vec<Tensor>, build: &Build<'_>, r: &mut StreamRng) -> Result<CheckResult> {
    let mut tape = Tape::new();
    let leaves: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &leaves)?;
    let w = random_tensor(r, tape.value(out).shape(), normal);
    let wv = tape.constant(w.clone());
    let prod = tape.mul(out, wv)?;
    let loss = tape.sum(prod);
    let grads = tape.backward(loss)?;

    let value = |xs: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let leaves: Vec<Var> = xs.iter().map(|t| tape.constant(t.clone())).collect();
        let out = build(&mut tape, &leaves)?;
        Ok(tape.value(out).dot(&w))
    };

    let mut worst = 0.0f64;
    for (k, leaf) in leaves.iter().enumerate() {
        let analytic = grads.expect(*leaf)?;
        let coords = sample_coords(r, inputs[k].len());
        let mut xs = inputs.clone();
        let numeric = finite_difference(
            |x| {
                xs[k].data_mut().copy_from_slice(x);
                value(&xs).unwrap_or(f64::NAN)
            },
            inputs[k].data(),
            FD_STEP,
            Some(&coords),
        );
        let picked: Vec<f64> = coords.iter().map(|&j| analytic.data()[j]).collect();
        worst = worst.max(nan_max(relative_error(&picked, &numeric)));
    }
    Ok(CheckResult::bounded(
        format!("gradient/{name}"),
        "rel_err",
        worst,
        GRADIENT_TOLERANCE,
    ))
}

fn nan_max(x: f64) -> f64 {
    if x.is_nan() {
        f64::INFINITY
    } else {
        x
    }
}

/// One finite-difference check per tape operation and composite, then the
/// full training loss for each backend and decoder.
pub fn gradient_checks() -> Result<Vec<CheckResult>> {
    let mut r = rng::stream(SEED, "gradients");
    let r = &mut r;
    let mut out = Vec::new();
    let m34 = |r: &mut StreamRng| random_tensor(r, &[3, 4], normal);

    let cases: Vec<(&str, Vec<Tensor>, Box<Build<'static>>)> = vec![
        ("add", vec![m34(r), m34(r)], Box::new(|t, v| t.add(v[0], v[1]))),
        ("sub", vec![m34(r), m34(r)], Box::new(|t, v| t.sub(v[0], v[1]))),
        ("mul", vec![m34(r), m34(r)], Box::new(|t, v| t.mul(v[0], v[1]))),
        (
            "matmul",
            vec![m34(r), random_tensor(r, &[4, 5], normal)],
            Box::new(|t, v| t.matmul(v[0], v[1])),
        ),
        ("sum", vec![m34(r)], Box::new(|t, v| Ok(t.sum(v[0])))),
        ("mean", vec![m34(r)], Box::new(|t, v| Ok(t.mean(v[0])))),
        ("row_sums", vec![m34(r)], Box::new(|t, v| t.row_sums(v[0]))),
        ("exp", vec![m34(r)], Box::new(|t, v| Ok(t.exp(v[0])))),
        (
            "log",
            vec![random_tensor(r, &[3, 4], positive)],
            Box::new(|t, v| Ok(t.log(v[0]))),
        ),
        (
            "relu",
            vec![random_tensor(r, &[3, 4], off_kink)],
            Box::new(|t, v| Ok(t.relu(v[0]))),
        ),
        ("sigmoid", vec![m34(r)], Box::new(|t, v| Ok(t.sigmoid(v[0])))),
        ("square", vec![m34(r)], Box::new(|t, v| Ok(t.square(v[0])))),
        ("scale", vec![m34(r)], Box::new(|t, v| Ok(t.scale(v[0], -1.7)))),
        ("add_scalar", vec![m34(r)], Box::new(|t, v| Ok(t.add_scalar(v[0], 0.3)))),
        (
            "clamp",
            vec![random_tensor(r, &[3, 4], |r| 1.5 * off_kink(r) + 0.05)],
            Box::new(|t, v| Ok(t.clamp(v[0], -0.5, 0.5))),
        ),
        (
            "concat_rows",
            vec![m34(r), random_tensor(r, &[2, 4], normal)],
            Box::new(|t, v| t.concat(&[v[0], v[1]], 0)),
        ),
        (
            "concat_cols",
            vec![m34(r), random_tensor(r, &[3, 2], normal)],
            Box::new(|t, v| t.concat(&[v[0], v[1]], 1)),
        ),
        ("narrow", vec![m34(r)], Box::new(|t, v| t.narrow(v[0], 1, 1, 2))),
        (
            "index_select",
            vec![m34(r)],
            Box::new(|t, v| t.index_select(v[0], &[2, 0, 2])),
        ),
        (
            "repeat_rows",
            vec![random_tensor(r, &[4], normal)],
            Box::new(|t, v| t.repeat_rows(v[0], 3)),
        ),
        ("reshape", vec![m34(r)], Box::new(|t, v| t.reshape(v[0], &[4, 3]))),
    ];
    for (name, inputs, build) in cases {
        out.push(op_check(name, inputs, build.as_ref(), r)?);
    }

    let size = 8;
    let maps: Vec<Arc<dyn LinearMap>> = (0..2)
        .map(|_| -> Result<Arc<dyn LinearMap>> { Ok(Arc::new(PoseOperator::new(size, &random_pose(r, size))?)) })
        .collect::<Result<_>>()?;
    let vol = random_tensor(r, &[2, size * size * size], normal);
    out.push(op_check(
        "linear_rows",
        vec![vol],
        &move |t: &mut Tape<'_>, v: &[Var]| t.linear_rows(v[0], maps.clone()),
        r,
    )?);

    let eps = random_tensor(r, &[3, 2], normal);
    out.push(op_check(
        "reparameterize",
        vec![random_tensor(r, &[3, 2], normal), random_tensor(r, &[3, 2], normal)],
        &move |t: &mut Tape<'_>, v: &[Var]| {
            let e = t.constant(eps.clone());
            reparameterize(t, v[0], v[1], e)
        },
        r,
    )?);
    out.push(op_check(
        "kl_rows",
        vec![random_tensor(r, &[3, 2], normal), random_tensor(r, &[3, 2], normal)],
        &|t: &mut Tape<'_>, v: &[Var]| kl_rows(t, v[0], v[1]),
        r,
    )?);
    let x = random_tensor(r, &[3, 5], normal);
    out.push(op_check(
        "gaussian_log_likelihood",
        vec![random_tensor(r, &[3, 5], normal)],
        &move |t: &mut Tape<'_>, v: &[Var]| log_likelihood_rows(t, v[0], &x, Likelihood::Gaussian { sigma_n: 0.7 }),
        r,
    )?);
    let x01 = random_tensor(r, &[3, 5], |r| r.random::<f64>());
    out.push(op_check(
        "bernoulli_log_likelihood",
        vec![random_tensor(r, &[3, 5], |r| 0.05 + 0.9 * r.random::<f64>())],
        &move |t: &mut Tape<'_>, v: &[Var]| log_likelihood_rows(t, v[0], &x01, Likelihood::Bernoulli),
        r,
    )?);
    let model = LinearGaussian::new(1.3, 0.6)?;
    let xs: Vec<f64> = (0..3).map(|_| normal(r)).collect();
    out.push(op_check(
        "linear_gaussian_expected_log_likelihood",
        vec![random_tensor(r, &[3, 1], normal), random_tensor(r, &[3, 1], normal)],
        &move |t: &mut Tape<'_>, v: &[Var]| model.expected_log_likelihood_rows(t, v[0], v[1], &xs),
        r,
    )?);
    let mlp = Mlp::new(&[4, 6, 3], 1.0, r);
    let mut mlp_inputs = vec![random_tensor(r, &[5, 4], normal)];
    mlp_inputs.extend(mlp.params().iter().cloned());
    out.push(op_check(
        "mlp",
        mlp_inputs,
        &|t: &mut Tape<'_>, v: &[Var]| mlp.forward(t, &v[1..], v[0]),
        r,
    )?);

    let tomo = |backend: &str| -> Result<(ExperimentConfig, Dataset)> {
        let cfg = small_config(&[backend])?;
        let data = cfg.load_dataset()?;
        Ok((cfg, data))
    };
    let (cfg, data) = tomo("backend=encoder")?;
    out.push(model_loss_check("model_loss/encoder_tomographic", &cfg, &data, r)?);
    let (cfg, data) = tomo("backend=vlt")?;
    out.push(model_loss_check("model_loss/vlt_tomographic", &cfg, &data, r)?);
    let pixels = pixel_dataset(r)?;
    let cfg = small_config(&["backend=encoder"])?;
    out.push(model_loss_check("model_loss/encoder_pixel", &cfg, &pixels, r)?);
    let cfg = small_config(&["backend=vlt"])?;
    out.push(model_loss_check("model_loss/vlt_pixel", &cfg, &pixels, r)?);
    Ok(out)
}

fn small_config(extra: &[&str]) -> Result<ExperimentConfig> {
    let mut overrides: Vec<String> = [
        "n=4",
        "image_size=16",
        "z_dim=3",
        "encoder_preset=small",
        "decoder_width=12",
        "batch_size=4",
        "seed=11",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    overrides.extend(extra.iter().map(|s| s.to_string()));
    // encoder_preset resets z_dim, so restate it last.
    overrides.push("z_dim=3".into());
    ExperimentConfig::from_overrides(&overrides)
}

/// Loss of the whole training graph at fixed noise `eps`.
fn model_loss(model: &Model, data: &Dataset, cfg: &ExperimentConfig, eps: &Tensor) -> Result<f64> {
    let ops = pose_operators(data)?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let mut tape = Tape::new();
    let g = batch_graph(
        &mut tape,
        model,
        data,
        &TwinAssignment::Identity,
        &ops,
        &rows,
        eps.clone(),
        cfg.likelihood(data.mode),
        cfg.beta,
    )?;
    tape.value(g.loss).item()
}

/// Which parameter tensor of a model a gradient belongs to.
#[derive(Clone, Copy)]
enum Slot {
    Decoder(usize),
    Encoder(usize),
    Table,
}

fn perturbed(model: &Model, slot: Slot, values: &[f64]) -> Result<Model> {
    let mut m = model.clone();
    match slot {
        Slot::Decoder(k) => m.decoder.mlp_mut().params_mut()[k].data_mut().copy_from_slice(values),
        Slot::Encoder(k) => match &mut m.backend {
            Backend::Encoder(e) => e.mlp_mut().params_mut()[k].data_mut().copy_from_slice(values),
            Backend::Vlt(_) => return Err(Error::contract("no encoder in a lookup-table model")),
        },
        Slot::Table => match &m.backend {
            Backend::Vlt(v) => {
                let mut t = v.table().clone();
                t.data_mut().copy_from_slice(values);
                m.backend = Backend::Vlt(VltBackend::new(
                    v.len(),
                    v.z_dim(),
                    VltInit::Table(t),
                    false,
                    AdamConfig::default(),
                    &mut rng::stream(0, "unused"),
                )?);
            }
            Backend::Encoder(_) => return Err(Error::contract("no table in an encoder model")),
        },
    }
    Ok(m)
}

fn slot_values(model: &Model, slot: Slot) -> Vec<f64> {
    match (slot, &model.backend) {
        (Slot::Decoder(k), _) => model.decoder.mlp().params()[k].data().to_vec(),
        (Slot::Encoder(k), Backend::Encoder(e)) => e.mlp().params()[k].data().to_vec(),
        (Slot::Table, Backend::Vlt(v)) => v.table().data().to_vec(),
        _ => unreachable!("slot chosen from the model's own backend"),
    }
}

/// Four 8×8 images with pixel values spread over `[0, 1]`.
fn pixel_dataset(r: &mut StreamRng) -> Result<Dataset> {
    let images: Vec<Vec<u8>> = (0..4)
        .map(|_| (0..64).map(|_| r.random_range(10..=245)).collect())
        .collect();
    let (img, lab) = encode_idx(8, 8, &images, &[0, 1, 0, 1]);
    dataset_from_idx(&img, &lab)
}

fn model_loss_check(name: &str, cfg: &ExperimentConfig, data: &Dataset, r: &mut StreamRng) -> Result<CheckResult> {
    let (cfg, data) = (cfg.clone(), data.clone());
    let model = Model::new(&cfg, &data)?;
    let eps = random_tensor(r, &[data.len(), cfg.z_dim], normal);
    let ops = pose_operators(&data)?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let mut tape = Tape::new();
    let g = batch_graph(
        &mut tape,
        &model,
        &data,
        &TwinAssignment::Identity,
        &ops,
        &rows,
        eps.clone(),
        cfg.likelihood(data.mode),
        cfg.beta,
    )?;
    let grads = tape.backward(g.loss)?;

    let mut slots: Vec<(Slot, Var)> = g
        .decoder_vars
        .iter()
        .enumerate()
        .map(|(k, v)| (Slot::Decoder(k), *v))
        .collect();
    slots.extend(g.encoder_vars.iter().enumerate().map(|(k, v)| (Slot::Encoder(k), *v)));
    if let Some(t) = g.table_var {
        slots.push((Slot::Table, t));
    }

    let mut worst = 0.0f64;
    for (slot, var) in slots {
        let analytic = grads.expect(var)?;
        let base = slot_values(&model, slot);
        let coords = sample_coords(r, base.len());
        let numeric = finite_difference(
            |x| {
                perturbed(&model, slot, x)
                    .and_then(|m| model_loss(&m, &data, &cfg, &eps))
                    .unwrap_or(f64::NAN)
            },
            &base,
            FD_STEP,
            Some(&coords),
        );
        let picked: Vec<f64> = coords.iter().map(|&j| analytic.data()[j]).collect();
        worst = worst.max(nan_max(relative_error(&picked, &numeric)));
    }
    Ok(CheckResult::bounded(
        format!("gradient/{name}"),
        "rel_err",
        worst,
        GRADIENT_TOLERANCE,
    ))
}

/// Dense forward matrix against the transposed dense adjoint for every
/// imaging operator at grid size `size`.
pub fn adjoint_checks(size: usize) -> Result<Vec<CheckResult>> {
    let mut r = rng::stream(SEED, "adjoints");
    let mut maps: Vec<(String, Box<dyn LinearMap>)> = Vec::new();
    for k in 0..2 {
        maps.push((
            format!("rotate_{k}"),
            Box::new(Rotation::new(size, &Quaternion::random(&mut r))?),
        ));
    }
    maps.push(("project".into(), Box::new(Projection { size })));
    let bound = size as f64 / 8.0;
    maps.push((
        "translate".into(),
        Box::new(Translation::new(
            size,
            [r.random_range(-bound..bound), r.random_range(-bound..bound)],
        )),
    ));
    for k in 0..KERNEL_BANK.len() {
        maps.push((format!("filter_{k}"), Box::new(CtfFilter::new(size, k)?)));
    }
    maps.push((
        "pose".into(),
        Box::new(PoseOperator::new(size, &random_pose(&mut r, size))?),
    ));
    Ok(maps
        .into_iter()
        .map(|(name, map)| {
            CheckResult::bounded(
                format!("adjoint/{name}_L{size}"),
                "max_abs_err",
                adjoint_mismatch(map.as_ref()),
                ADJOINT_TOLERANCE,
            )
        })
        .collect())
}

/// Analytic KL against a 10⁶-sample Monte-Carlo estimate for 20 random
/// diagonal Gaussians, plus non-negativity over many more draws.
pub fn kl_checks() -> Result<Vec<CheckResult>> {
    let mut r = rng::stream(SEED, "kl");
    let mut worst = 0.0f64;
    for k in 0..20 {
        let d = random_diagonal(&mut r)?;
        let exact = kl_standard_normal(&d);
        let mc = monte_carlo_kl(&d, KL_SAMPLES, SEED + k);
        worst = worst.max((mc - exact).abs() / exact);
    }
    let mut negative = 0usize;
    let mut lowest = f64::INFINITY;
    for _ in 0..10_000 {
        let kl = kl_standard_normal(&random_diagonal(&mut r)?);
        lowest = lowest.min(kl);
        if kl < 0.0 {
            negative += 1;
        }
    }
    Ok(vec![
        CheckResult::bounded("kl/monte_carlo", "max_rel_err", worst, KL_RELATIVE_TOLERANCE),
        CheckResult {
            name: "kl/non_negative".into(),
            passed: negative == 0,
            detail: format!("min_kl={lowest:.3e} over 10000 draws"),
        },
    ])
}

fn random_diagonal(r: &mut StreamRng) -> Result<LatentDistribution> {
    let dim = r.random_range(1..=8);
    let mu = (0..dim).map(|_| normal(r)).collect();
    let log_sigma = (0..dim).map(|_| r.random_range(-1.5..1.0)).collect();
    LatentDistribution::new(mu, log_sigma)
}

/// `ELBO(q) + KL(q ‖ p(z | x)) = log p(x)` on 100 random linear-Gaussian
/// models and Gaussian `q`, and the closed-form posterior against
/// quadrature.
pub fn elbo_identity_checks() -> Result<Vec<CheckResult>> {
    let mut r = rng::stream(SEED, "elbo");
    let mut worst = 0.0f64;
    let mut worst_quad = 0.0f64;
    for k in 0..100 {
        let a = r.random_range(-3.0..3.0);
        let s = r.random_range(0.2..3.0);
        let model = LinearGaussian::new(a, s)?;
        let x = (a * a + s * s as f64).sqrt() * normal(&mut r);
        let mu = 2.0 * normal(&mut r);
        let sigma = r.random_range(-2.0f64..1.0).exp();
        let gap = model.elbo(x, mu, sigma) + model.kl_to_posterior(x, mu, sigma) - model.log_evidence(x);
        worst = worst.max(gap.abs());
        if k < 10 {
            let (m, v) = model.posterior(x)?;
            let (qm, qv) = quadrature_posterior(x, a, s);
            worst_quad = worst_quad.max((m - qm).abs()).max((v - qv).abs());
        }
    }
    Ok(vec![
        CheckResult::bounded("elbo/identity", "max_abs_err", worst, ELBO_IDENTITY_TOLERANCE),
        CheckResult::bounded("elbo/posterior_vs_quadrature", "max_abs_err", worst_quad, 1e-8),
    ])
}

/// Outcome of fitting a lookup table to the linear-Gaussian posterior.
#[derive(Clone, Debug)]
pub struct VltPosteriorFit {
    pub rows: usize,
    pub steps: usize,
    pub max_mean_error: f64,
    pub max_sd_error: f64,
    pub seconds: f64,
}

impl VltPosteriorFit {
    pub fn passed(&self) -> bool {
        self.max_mean_error < VLT_MEAN_TOLERANCE && self.max_sd_error < VLT_SD_TOLERANCE
    }

    pub fn into_check(self) -> CheckResult {
        CheckResult {
            name: "elbo/vlt_converges_to_posterior".into(),
            passed: self.passed(),
            detail: format!(
                "rows={} steps={} max_mean_err={:.3e} (< {VLT_MEAN_TOLERANCE:e}) max_sd_err={:.3e} (< {VLT_SD_TOLERANCE:e}) {:.2}s",
                self.rows, self.steps, self.max_mean_error, self.max_sd_error, self.seconds
            ),
        }
    }
}

/// Learning-rate phases for the table fit; each phase restarts Adam from
/// the current table.
const VLT_PHASES: [(f64, usize); 3] = [(0.05, 1500), (5e-3, 1000), (5e-4, 1000)];

/// Trains a one-dimensional lookup table by gradient ascent on the exact
/// (closed-form expectation) ELBO of `z ~ N(0,1)`, `x | z ~ N(a z, s²)`
/// and compares each row with its exact posterior.
pub fn vlt_posterior_fit(a: f64, s: f64, rows: usize, seed: u64) -> Result<VltPosteriorFit> {
    let start = Instant::now();
    let model = LinearGaussian::new(a, s)?;
    let mut r = rng::stream(seed, "data");
    let xs: Vec<f64> = (0..rows).map(|_| (a * a + s * s).sqrt() * normal(&mut r)).collect();
    let all: Vec<usize> = (0..rows).collect();
    let mut init = VltInit::Normal { log_sigma: 0.0 };
    let mut init_rng = rng::item_stream(seed, "init", 2);
    let mut steps = 0;
    let mut table = None;
    for (lr, n) in VLT_PHASES {
        let mut vlt = VltBackend::new(rows, 1, init, false, AdamConfig::with_lr(lr), &mut init_rng)?;
        for _ in 0..n {
            let grad = {
                let mut tape = Tape::new();
                let (t, mu, ls) = vlt.lookup_rows(&mut tape, &all)?;
                let ell = model.expected_log_likelihood_rows(&mut tape, mu, ls, &xs)?;
                let kl = kl_rows(&mut tape, mu, ls)?;
                let elbo = tape.sub(ell, kl)?;
                let total = tape.sum(elbo);
                let loss = tape.scale(total, -1.0);
                tape.backward(loss)?.expect(t)?.clone()
            };
            vlt.step(&grad, &all)?;
            steps += 1;
        }
        init = VltInit::Table(vlt.table().clone());
        table = Some(vlt);
    }
    let vlt = table.expect("at least one phase");
    let mut max_mean_error = 0.0f64;
    let mut max_sd_error = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let (m, v) = model.posterior(x)?;
        let q = vlt.lookup(i)?;
        max_mean_error = max_mean_error.max((q.mu[0] - m).abs());
        max_sd_error = max_sd_error.max((q.sigma()[0] - v.sqrt()).abs());
    }
    Ok(VltPosteriorFit {
        rows,
        steps,
        max_mean_error,
        max_sd_error,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn vlt_posterior_check() -> Result<VltPosteriorFit> {
    vlt_posterior_fit(1.5, 0.8, 200, SEED)
}
