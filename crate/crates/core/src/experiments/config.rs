//! Flat `key = value` experiment configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.
//! Overrides (`key=value` strings) are applied after the file, so they win.
//! [`ExperimentConfig::echo`] writes every key with its resolved value; the
//! echo parses back to an identical config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::forward::{ConformationLaw, Dataset, DatasetSpec, Mode, PoseLaw};
use crate::inference::{EncoderPreset, Likelihood};
use crate::tensor::{AdamConfig, RowStep};

#[derive(Clone, Debug, PartialEq)]
pub enum DatasetRef {
    /// Generated from the synthetic knobs in the config.
    Synthetic,
    /// A dataset container written by `gen-data`.
    File(PathBuf),
    /// IDX image and label files.
    Idx { images: PathBuf, labels: PathBuf },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Encoder,
    Vlt,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendInit {
    Normal,
    Zeros,
    Checkpoint,
}

/// Update rule for lookup-table rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatentOptimizer {
    Adam,
    Sgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TwinMode {
    None,
    Permutation,
    Noise,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetRef,
    pub n: usize,
    pub image_size: usize,
    pub snr: f64,
    pub law: ConformationLaw,
    pub poses: PoseLaw,
    pub max_shift: f64,
    pub backend: BackendKind,
    pub backend_init: BackendInit,
    pub init_checkpoint: Option<PathBuf>,
    pub freeze_latents: bool,
    pub encoder_preset: EncoderPreset,
    pub z_dim: usize,
    /// Hidden layers of the decoder; 0 selects the mode default.
    pub decoder_layers: usize,
    pub decoder_width: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Learning rate of the lookup table rows.
    pub latent_lr: f64,
    pub latent_optimizer: LatentOptimizer,
    /// Initial log σ of normal-initialized table rows.
    pub vlt_log_sigma: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub twin_mode: TwinMode,
    pub beta: f64,
    pub sigma_n: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: DatasetRef::Synthetic,
            n: 2000,
            image_size: 32,
            snr: 0.1,
            law: ConformationLaw::Discrete(2),
            poses: PoseLaw::Random,
            max_shift: 2.0,
            backend: BackendKind::Encoder,
            backend_init: BackendInit::Normal,
            init_checkpoint: None,
            freeze_latents: false,
            encoder_preset: EncoderPreset::Standard,
            z_dim: 8,
            decoder_layers: 0,
            decoder_width: 256,
            epochs: 50,
            lr: 1e-4,
            latent_lr: 1e-2,
            latent_optimizer: LatentOptimizer::Adam,
            vlt_log_sigma: 0.0,
            batch_size: 64,
            seed: 0,
            twin_mode: TwinMode::None,
            beta: 1.0,
            sigma_n: 1.0,
        }
    }
}

fn bad(key: &str, value: &str, expected: &str) -> Error {
    Error::Config(format!("{key}: cannot parse '{value}' (expected {expected})"))
}

fn num<T: FromStr>(key: &str, value: &str, expected: &str) -> Result<T> {
    value.parse().map_err(|_| bad(key, value, expected))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(&text)?;
        cfg.apply_overrides(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults plus overrides.
    pub fn from_overrides(overrides: &[String]) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_text(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", lineno + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    /// Sets one key. `z_dim` follows `encoder_preset` unless given later.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => {
                self.dataset = if value == "synthetic" {
                    DatasetRef::Synthetic
                } else if let Some(p) = value.strip_prefix("file:") {
                    DatasetRef::File(PathBuf::from(p))
                } else if let Some(rest) = value.strip_prefix("idx:") {
                    let (i, l) = rest
                        .split_once(',')
                        .ok_or_else(|| bad(key, value, "idx:<images>,<labels>"))?;
                    DatasetRef::Idx {
                        images: PathBuf::from(i),
                        labels: PathBuf::from(l),
                    }
                } else {
                    return Err(bad(key, value, "synthetic, file:<path> or idx:<images>,<labels>"));
                }
            }
            "n" => self.n = num(key, value, "a count")?,
            "image_size" => self.image_size = num(key, value, "a grid size")?,
            "snr" => self.snr = num(key, value, "a real")?,
            "law" => {
                self.law = if value == "uniform" {
                    ConformationLaw::Uniform
                } else if let Some(k) = value.strip_prefix("discrete:") {
                    ConformationLaw::Discrete(num(key, k, "discrete:<K>")?)
                } else {
                    return Err(bad(key, value, "uniform or discrete:<K>"));
                }
            }
            "poses" => {
                self.poses = match value {
                    "random" => PoseLaw::Random,
                    "identity" => PoseLaw::Identity,
                    _ => return Err(bad(key, value, "random or identity")),
                }
            }
            "max_shift" => self.max_shift = num(key, value, "a real")?,
            "backend" => {
                self.backend = match value {
                    "encoder" => BackendKind::Encoder,
                    "vlt" => BackendKind::Vlt,
                    _ => return Err(bad(key, value, "encoder or vlt")),
                }
            }
            "backend_init" => {
                self.backend_init = match value {
                    "normal" => BackendInit::Normal,
                    "zeros" => BackendInit::Zeros,
                    "checkpoint" => BackendInit::Checkpoint,
                    _ => return Err(bad(key, value, "normal, zeros or checkpoint")),
                }
            }
            "init_checkpoint" => {
                self.init_checkpoint = match value {
                    "" | "none" => None,
                    p => Some(PathBuf::from(p)),
                }
            }
            "freeze_latents" => self.freeze_latents = num(key, value, "true or false")?,
            "encoder_preset" => {
                self.encoder_preset = value.parse()?;
                self.z_dim = self.encoder_preset.default_z_dim();
            }
            "z_dim" => self.z_dim = num(key, value, "a positive integer")?,
            "decoder_layers" => {
                self.decoder_layers = if value == "auto" {
                    0
                } else {
                    num(key, value, "an integer or auto")?
                }
            }
            "decoder_width" => self.decoder_width = num(key, value, "a positive integer")?,
            "epochs" => self.epochs = num(key, value, "a count")?,
            "lr" => self.lr = num(key, value, "a real")?,
            "latent_lr" => self.latent_lr = num(key, value, "a real")?,
            "latent_optimizer" => {
                self.latent_optimizer = match value {
                    "adam" => LatentOptimizer::Adam,
                    "sgd" => LatentOptimizer::Sgd,
                    _ => return Err(bad(key, value, "adam or sgd")),
                }
            }
            "vlt_log_sigma" => self.vlt_log_sigma = num(key, value, "a real")?,
            "batch_size" => self.batch_size = num(key, value, "a positive integer")?,
            "seed" => self.seed = num(key, value, "an unsigned integer")?,
            "twin_mode" => {
                self.twin_mode = match value {
                    "none" => TwinMode::None,
                    "permutation" => TwinMode::Permutation,
                    "noise" => TwinMode::Noise,
                    _ => return Err(bad(key, value, "none, permutation or noise")),
                }
            }
            "beta" => self.beta = num(key, value, "a real")?,
            "sigma_n" => self.sigma_n = num(key, value, "a real")?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.twin_mode != TwinMode::None && self.backend != BackendKind::Encoder {
            return fail("twin_mode requires backend = encoder (twins perturb the encoder input)");
        }
        if self.freeze_latents && self.backend != BackendKind::Vlt {
            return fail("freeze_latents requires backend = vlt");
        }
        if self.backend == BackendKind::Encoder && self.backend_init != BackendInit::Normal {
            return fail("backend_init zeros/checkpoint applies to backend = vlt only");
        }
        if self.backend_init == BackendInit::Checkpoint && self.init_checkpoint.is_none() {
            return fail("backend_init = checkpoint requires init_checkpoint");
        }
        if self.z_dim == 0 || self.batch_size == 0 || self.decoder_width == 0 {
            return fail("z_dim, batch_size and decoder_width must be positive");
        }
        for (name, v) in [
            ("lr", self.lr),
            ("latent_lr", self.latent_lr),
            ("sigma_n", self.sigma_n),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return fail("beta must be non-negative and finite");
        }
        if !self.vlt_log_sigma.is_finite() {
            return fail("vlt_log_sigma must be finite");
        }
        if self.dataset == DatasetRef::Synthetic {
            if self.n == 0 {
                return fail("n must be at least 1");
            }
            if self.image_size < 16 || !self.image_size.is_multiple_of(2) {
                return fail("image_size must be even and at least 16");
            }
            if self.snr.is_nan() || self.snr <= 0.0 {
                return fail("snr must be positive");
            }
            if !(0.0..=self.image_size as f64 / 8.0).contains(&self.max_shift) {
                return fail("max_shift must lie in [0, image_size/8]");
            }
        }
        Ok(())
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            n: self.n,
            size: self.image_size,
            snr: self.snr,
            law: self.law,
            poses: self.poses,
            max_shift: self.max_shift,
            seed: self.seed,
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetRef::Synthetic => crate::forward::generate_dataset(&self.dataset_spec()),
            DatasetRef::File(p) => Dataset::load(p),
            DatasetRef::Idx { images, labels } => crate::forward::load_idx(images, labels),
        }
    }

    /// Decoder hidden widths for a dataset of the given mode.
    pub fn decoder_hidden(&self, mode: Mode) -> Vec<usize> {
        let layers = match (self.decoder_layers, mode) {
            (0, Mode::Tomographic) => 3,
            (0, Mode::PixelImage) => 2,
            (k, _) => k,
        };
        vec![self.decoder_width; layers]
    }

    /// Update rule for the lookup-table rows.
    pub fn latent_step(&self) -> RowStep {
        match self.latent_optimizer {
            LatentOptimizer::Adam => AdamConfig::with_lr(self.latent_lr).into(),
            LatentOptimizer::Sgd => RowStep::Sgd { lr: self.latent_lr },
        }
    }

    pub fn likelihood(&self, mode: Mode) -> Likelihood {
        match mode {
            Mode::Tomographic => Likelihood::Gaussian { sigma_n: self.sigma_n },
            Mode::PixelImage => Likelihood::Bernoulli,
        }
    }

    /// Every key with its resolved value, one per line.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let dataset = match &self.dataset {
            DatasetRef::Synthetic => "synthetic".to_string(),
            DatasetRef::File(p) => format!("file:{}", p.display()),
            DatasetRef::Idx { images, labels } => {
                format!("idx:{},{}", images.display(), labels.display())
            }
        };
        let law = match self.law {
            ConformationLaw::Uniform => "uniform".to_string(),
            ConformationLaw::Discrete(k) => format!("discrete:{k}"),
        };
        let poses = match self.poses {
            PoseLaw::Random => "random",
            PoseLaw::Identity => "identity",
        };
        let backend = match self.backend {
            BackendKind::Encoder => "encoder",
            BackendKind::Vlt => "vlt",
        };
        let init = match self.backend_init {
            BackendInit::Normal => "normal",
            BackendInit::Zeros => "zeros",
            BackendInit::Checkpoint => "checkpoint",
        };
        let latent_optimizer = match self.latent_optimizer {
            LatentOptimizer::Adam => "adam",
            LatentOptimizer::Sgd => "sgd",
        };
        let twin = match self.twin_mode {
            TwinMode::None => "none",
            TwinMode::Permutation => "permutation",
            TwinMode::Noise => "noise",
        };
        let ckpt = self
            .init_checkpoint
            .as_ref()
            .map_or("none".to_string(), |p| p.display().to_string());
        let pairs = [
            ("dataset", dataset),
            ("n", self.n.to_string()),
            ("image_size", self.image_size.to_string()),
            ("snr", self.snr.to_string()),
            ("law", law),
            ("poses", poses.to_string()),
            ("max_shift", self.max_shift.to_string()),
            ("backend", backend.to_string()),
            ("backend_init", init.to_string()),
            ("init_checkpoint", ckpt),
            ("freeze_latents", self.freeze_latents.to_string()),
            ("encoder_preset", self.encoder_preset.to_string()),
            ("z_dim", self.z_dim.to_string()),
            ("decoder_layers", self.decoder_layers.to_string()),
            ("decoder_width", self.decoder_width.to_string()),
            ("epochs", self.epochs.to_string()),
            ("lr", self.lr.to_string()),
            ("latent_lr", self.latent_lr.to_string()),
            ("latent_optimizer", latent_optimizer.to_string()),
            ("vlt_log_sigma", self.vlt_log_sigma.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("seed", self.seed.to_string()),
            ("twin_mode", twin.to_string()),
            ("beta", self.beta.to_string()),
            ("sigma_n", self.sigma_n.to_string()),
        ];
        for (k, v) in pairs {
            writeln!(s, "{k} = {v}").unwrap();
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_overrides(&[
            "backend=vlt".into(),
            "freeze_latents=true".into(),
            "encoder_preset=small".into(),
            "lr=3e-4".into(),
            "latent_optimizer=sgd".into(),
            "snr=0.05".into(),
            "law=uniform".into(),
        ])
        .unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.z_dim, 2);
        assert_eq!(ExperimentConfig::parse(&cfg.echo()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_combinations_rejected() {
        assert!(matches!(ExperimentConfig::parse("colour = red"), Err(Error::Config(_))));
        assert!(ExperimentConfig::parse("freeze_latents = true").is_err());
        assert!(ExperimentConfig::parse("backend = vlt\ntwin_mode = noise").is_err());
        assert!(ExperimentConfig::parse("epochs = many").is_err());
        let ok = ExperimentConfig::parse("# comment\n\nepochs = 3 # trailing\n").unwrap();
        assert_eq!(ok.epochs, 3);
    }

    #[test]
    fn overrides_win() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.txt");
        std::fs::write(&p, "epochs = 3\nseed = 4\n").unwrap();
        let cfg = ExperimentConfig::load(&p, &["seed=9".into()]).unwrap();
        assert_eq!((cfg.epochs, cfg.seed), (3, 9));
    }
}
