//! Run reports on disk.
//!
//! A report is a directory written atomically: everything goes to a sibling
//! temp directory which is renamed into place once complete. Layout:
//!
//! ```text
//! config.txt          resolved config echo (re-runnable)
//! losses.csv          epoch,neg_elbo,recon,kl
//! timing.csv          epoch,seconds
//! latents.csv         index,truth,mu_0..,pca1,pca2
//! latent_table.csv    index,mu_0..,log_sigma_0..
//! references.csv      the first ten rows of latents.csv
//! metrics.csv         metric,value
//! model.ckpt          decoder, backend and `latents` table
//! volumes/            vol_<i>.f32 + .txt at the latent means of the first six images
//! images/             input_<i>.pgm and recon_<i>.pgm for the same images
//! COMPLETE            marker
//! ```
//!
//! Everything except `timing.csv` is bitwise reproducible from `config.txt`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::ExperimentConfig;
use super::train::{Decoder, EpochLosses, Model, TrainOutcome};
use crate::decoder::{write_pgm, write_volume_f32};
use crate::error::{Error, Result};
use crate::forward::Dataset;
use crate::tensor::{checkpoint, Tensor};

pub const COMPLETE_MARKER: &str = "COMPLETE";
pub const DUMP_COUNT: usize = 6;
pub const REFERENCE_COUNT: usize = 10;

/// Files whose bytes must match across reruns.
pub const DETERMINISTIC_FILES: [&str; 7] = [
    "config.txt",
    "losses.csv",
    "latents.csv",
    "latent_table.csv",
    "references.csv",
    "metrics.csv",
    "model.ckpt",
];

pub fn is_complete(dir: &Path) -> bool {
    dir.join(COMPLETE_MARKER).is_file()
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn latents_csv(out: &TrainOutcome, rows: usize) -> String {
    let r = &out.report;
    let z = r.z_dim();
    let mut s = String::from("index,truth");
    for j in 0..z {
        write!(s, ",mu_{j}").unwrap();
    }
    if r.pca.is_some() {
        s.push_str(",pca1,pca2");
    }
    s.push('\n');
    for i in 0..rows.min(r.latents.rows()) {
        write!(s, "{i},{}", r.truths[i]).unwrap();
        for v in &r.latents.row(i)[..z] {
            write!(s, ",{v}").unwrap();
        }
        if let Some(p) = &r.pca {
            write!(s, ",{},{}", p.coords[i][0], p.coords[i][1]).unwrap();
        }
        s.push('\n');
    }
    s
}

fn table_csv(t: &Tensor) -> String {
    let z = t.row_len() / 2;
    let mut s = String::from("index");
    for j in 0..z {
        write!(s, ",mu_{j}").unwrap();
    }
    for j in 0..z {
        write!(s, ",log_sigma_{j}").unwrap();
    }
    s.push('\n');
    for i in 0..t.rows() {
        write!(s, "{i}").unwrap();
        for v in t.row(i) {
            write!(s, ",{v}").unwrap();
        }
        s.push('\n');
    }
    s
}

fn losses_csv(losses: &[EpochLosses]) -> String {
    let mut s = String::from("epoch,neg_elbo,recon,kl\n");
    for l in losses {
        writeln!(s, "{},{},{},{}", l.epoch, l.neg_elbo, l.recon, l.kl).unwrap();
    }
    s
}

fn metrics_csv(out: &TrainOutcome) -> String {
    let r = &out.report;
    let mut s = String::from("metric,value\n");
    if let Some(m) = &r.metrics {
        writeln!(s, "knn_accuracy,{}", m.knn_accuracy).unwrap();
        match m.separation_ratio {
            Some(v) => writeln!(s, "separation_ratio,{v}").unwrap(),
            None => s.push_str("separation_ratio,undefined\n"),
        }
        writeln!(s, "single_class,{}", m.single_class).unwrap();
    }
    if let Some(p) = &r.pca {
        writeln!(s, "pca_explained_1,{}", p.explained[0]).unwrap();
        writeln!(s, "pca_explained_2,{}", p.explained[1]).unwrap();
        writeln!(s, "pca_degenerate,{}", p.degenerate).unwrap();
    }
    if let Some(l) = r.losses.last() {
        writeln!(s, "final_neg_elbo,{}", l.neg_elbo).unwrap();
        writeln!(s, "final_recon,{}", l.recon).unwrap();
        writeln!(s, "final_kl,{}", l.kl).unwrap();
    }
    writeln!(s, "epochs,{}", r.losses.len()).unwrap();
    writeln!(s, "seed,{}", r.config.seed).unwrap();
    s
}

fn dumps(dir: &Path, model: &Model, data: &Dataset, latents: &Tensor) -> Result<()> {
    let z = latents.row_len() / 2;
    let images = dir.join("images");
    fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let volumes = dir.join("volumes");
    if matches!(model.decoder, Decoder::Tomographic(_)) {
        fs::create_dir_all(&volumes).map_err(|e| Error::io(&volumes, e))?;
    }
    for i in 0..DUMP_COUNT.min(data.len()) {
        let mu = &latents.row(i)[..z];
        let p = &data.images[i];
        write_pgm(&images.join(format!("input_{i}.pgm")), &p.pixels)?;
        let recon = match &model.decoder {
            Decoder::Tomographic(d) => {
                write_volume_f32(&volumes.join(format!("vol_{i}.f32")), &d.decode_volume(mu)?)?;
                d.render(mu, &p.pose)?
            }
            Decoder::Pixel(d) => d.decode_pixels(mu)?,
        };
        write_pgm(&images.join(format!("recon_{i}.pgm")), &recon)?;
    }
    Ok(())
}

/// Writes the report for `out` into `dir`. An existing complete report is
/// replaced only with `force`; an existing non-report directory is never
/// touched.
pub fn write_report(dir: &Path, out: &TrainOutcome, data: &Dataset, force: bool) -> Result<()> {
    if dir.exists() {
        let empty = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_none();
        if is_complete(dir) {
            if !force {
                return Err(Error::Config(format!(
                    "{} already holds a complete report (use --force to overwrite)",
                    dir.display()
                )));
            }
        } else if !empty {
            return Err(Error::Config(format!(
                "{} exists and is not a report; refusing to overwrite",
                dir.display()
            )));
        }
    }
    let parent = dir
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    let tmp = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;

    let r = &out.report;
    write(&tmp.join("config.txt"), r.config.echo())?;
    write(&tmp.join("losses.csv"), losses_csv(&r.losses))?;
    let mut timing = String::from("epoch,seconds\n");
    for (e, s) in r.seconds.iter().enumerate() {
        writeln!(timing, "{},{s}", e + 1).unwrap();
    }
    write(&tmp.join("timing.csv"), timing)?;
    write(&tmp.join("latents.csv"), latents_csv(out, usize::MAX))?;
    write(&tmp.join("references.csv"), latents_csv(out, REFERENCE_COUNT))?;
    write(&tmp.join("latent_table.csv"), table_csv(&r.latents))?;
    write(&tmp.join("metrics.csv"), metrics_csv(out))?;
    let mut entries = out.model.checkpoint_entries();
    entries.push(("latents".to_string(), r.latents.clone()));
    let refs: Vec<(&str, &Tensor)> = entries.iter().map(|(n, t)| (n.as_str(), t)).collect();
    checkpoint::save(&tmp.join("model.ckpt"), &refs)?;
    dumps(&tmp, &out.model, data, &r.latents)?;
    write(&tmp.join(COMPLETE_MARKER), "")?;

    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&tmp, dir).map_err(|e| Error::io(dir, e))
}

/// The parts of a report needed to resume analysis.
pub struct LoadedReport {
    pub dir: PathBuf,
    pub config: ExperimentConfig,
    pub checkpoint: Vec<(String, Tensor)>,
    pub latents: Tensor,
}

pub fn load_report(dir: &Path) -> Result<LoadedReport> {
    if !is_complete(dir) {
        return Err(Error::Config(format!("{} is not a complete report", dir.display())));
    }
    let cfg_path = dir.join("config.txt");
    let text = fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let config = ExperimentConfig::parse(&text)?;
    let checkpoint = checkpoint::load(&dir.join("model.ckpt"))?;
    let latents = checkpoint::find(&checkpoint, "latents")?.clone();
    Ok(LoadedReport {
        dir: dir.to_path_buf(),
        config,
        checkpoint,
        latents,
    })
}

impl LoadedReport {
    pub fn model(&self, data: &Dataset) -> Result<Model> {
        Model::from_checkpoint(&self.checkpoint, &self.config, data)
    }
}
