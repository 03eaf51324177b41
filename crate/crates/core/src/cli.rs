//! Command-line front end.
//!
//! Exit status is 0 on success, 2 for configuration problems (bad keys,
//! unreadable config files, unmet preconditions) and 1 for runtime
//! failures. Errors are printed to stderr as a single line
//! `error[config]: …` or `error[runtime]: …`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Child, Command as Process};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{
    augment_probe, evil_twin_train, load_report, train, write_report, Augmentation, Backend, ExperimentConfig, TwinMode,
};
use crate::selftest::run_selftest;

#[derive(Debug, Parser)]
#[command(
    name = "latent-workbench",
    version,
    about = "Amortized encoder vs. variational lookup table experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset file.
    GenData(GenDataArgs),
    /// Train a model and write a run report.
    Train(TrainArgs),
    /// Train with twin encoder inputs (twin_mode defaults to permutation).
    EvilTwin(TrainArgs),
    /// Measure latent displacement under input augmentations.
    Probe(ProbeArgs),
    /// Summarize a finished run report.
    Report(ReportArgs),
    /// Run the numerical oracle suite.
    Selftest,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    /// Flat key = value config file; overrides win over it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output dataset file.
    #[arg(long)]
    pub out: PathBuf,
    /// key=value overrides.
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Config file; repeat to run several experiments, each written to
    /// `<out>/<config stem>`.
    #[arg(long = "config")]
    pub configs: Vec<PathBuf>,
    /// Report directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace an existing completed report.
    #[arg(long)]
    pub force: bool,
    /// Child processes to run at once when several configs are given.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// key=value overrides, applied to every config.
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    /// A report trained with backend = encoder.
    pub report: PathBuf,
    /// Augmentations: shift:<k>, rotate90, rotate90x<n>.
    #[arg(long = "aug", default_values_t = ["shift:0".to_string(), "shift:1".into(), "rotate90".into(), "rotate90x4".into()])]
    pub augmentations: Vec<String>,
    /// Directory for per-image `probe_<aug>.csv` files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub report: PathBuf,
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[config]: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            let (tag, code, msg) = match e {
                Error::Config(m) => ("config", 2, m),
                other => ("runtime", 1, other.to_string()),
            };
            eprintln!("error[{tag}]: {}", one_line(&msg));
            code
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn resolve(config: Option<&Path>, overrides: &[String]) -> Result<ExperimentConfig> {
    match config {
        None => ExperimentConfig::from_overrides(overrides),
        Some(p) => {
            if !p.is_file() {
                return Err(Error::Config(format!("config file {} does not exist", p.display())));
            }
            ExperimentConfig::load(p, overrides)
        }
    }
}

/// Runs one command; `Ok` carries the exit status.
pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::GenData(a) => {
            let cfg = resolve(a.config.as_deref(), &a.overrides)?;
            let data = cfg.load_dataset()?;
            if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            data.save(&a.out)?;
            println!("wrote {} images to {}", data.len(), a.out.display());
            Ok(0)
        }
        Command::Train(a) => run_training(a, false),
        Command::EvilTwin(a) => run_training(a, true),
        Command::Probe(a) => probe(a),
        Command::Report(a) => summarize(&a.report),
        Command::Selftest => {
            let report = run_selftest()?;
            for c in &report.checks {
                println!("{c}");
            }
            println!(
                "selftest: {} checks, {} failed, {:.1}s",
                report.checks.len(),
                report.failures(),
                report.seconds
            );
            Ok(if report.passed() { 0 } else { 1 })
        }
    }
}

fn run_training(a: TrainArgs, twins: bool) -> Result<i32> {
    if a.configs.len() > 1 {
        return run_jobs(&a, twins);
    }
    let mut cfg = resolve(a.configs.first().map(PathBuf::as_path), &a.overrides)?;
    if twins && cfg.twin_mode == TwinMode::None {
        cfg.twin_mode = TwinMode::Permutation;
    }
    if crate::experiments::is_complete(&a.out) && !a.force {
        return Err(Error::Config(format!(
            "{} already holds a completed report; pass --force to replace it",
            a.out.display()
        )));
    }
    let data = cfg.load_dataset()?;
    let outcome = if twins {
        evil_twin_train(&cfg, &data)?
    } else {
        train(&cfg, &data)?
    };
    write_report(&a.out, &outcome, &data, a.force)?;
    let r = &outcome.report;
    let mut line = format!("wrote {}: epochs={}", a.out.display(), r.losses.len());
    if let Some(l) = r.losses.last() {
        line.push_str(&format!(
            " neg_elbo={:.4} recon={:.4} kl={:.4}",
            l.neg_elbo, l.recon, l.kl
        ));
    }
    if let Some(m) = &r.metrics {
        line.push_str(&format!(" knn={:.4}", m.knn_accuracy));
        if let Some(s) = m.separation_ratio {
            line.push_str(&format!(" separation={s:.4}"));
        }
    }
    println!("{line}");
    Ok(0)
}

/// Runs each config in its own child process, at most `jobs` at a time.
/// The status is the worst child status.
fn run_jobs(a: &TrainArgs, twins: bool) -> Result<i32> {
    let exe = std::env::current_exe().map_err(|e| Error::io("current executable", e))?;
    let sub = if twins { "evil-twin" } else { "train" };
    let mut stems = std::collections::HashSet::new();
    for c in &a.configs {
        if !c.is_file() {
            return Err(Error::Config(format!("config file {} does not exist", c.display())));
        }
        let stem = c
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        if !stems.insert(stem.clone()) {
            return Err(Error::Config(format!("two configs share the output name '{stem}'")));
        }
    }
    let jobs = a.jobs.max(1);
    let mut pending = a.configs.iter();
    let mut running: Vec<(PathBuf, Child)> = Vec::new();
    let mut worst = 0;
    loop {
        while running.len() < jobs {
            let Some(c) = pending.next() else { break };
            let out = a.out.join(c.file_stem().expect("checked above"));
            let mut cmd = Process::new(&exe);
            cmd.arg(sub).arg("--config").arg(c).arg("--out").arg(&out);
            if a.force {
                cmd.arg("--force");
            }
            cmd.args(&a.overrides);
            let child = cmd.spawn().map_err(|e| Error::io(&exe, e))?;
            running.push((c.clone(), child));
        }
        if running.is_empty() {
            break;
        }
        let (c, mut child) = running.remove(0);
        let status = child.wait().map_err(|e| Error::io(&c, e))?;
        let code = status.code().unwrap_or(1);
        if code != 0 {
            eprintln!("{} exited with status {code}", c.display());
        }
        worst = worst.max(code);
    }
    Ok(worst)
}

fn probe(a: ProbeArgs) -> Result<i32> {
    let loaded = load_report(&a.report)?;
    let augs = a
        .augmentations
        .iter()
        .map(|s| s.parse::<Augmentation>())
        .collect::<Result<Vec<_>>>()?;
    let data = loaded.config.load_dataset()?;
    let model = loaded.model(&data)?;
    if let Backend::Vlt(_) = model.backend {
        return Err(Error::Config(format!(
            "probe requires a report trained with backend=encoder; {} used backend=vlt, which cannot embed augmented images",
            a.report.display()
        )));
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    for aug in augs {
        let r = augment_probe(&model, &data, aug)?;
        println!("{}", r.summary_line());
        if let Some(dir) = &a.out {
            let name = aug.to_string().replace(':', "_").replace('-', "m");
            let path = dir.join(format!("probe_{name}.csv"));
            fs::write(&path, r.to_csv()).map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(0)
}

fn summarize(dir: &Path) -> Result<i32> {
    let loaded = load_report(dir)?;
    let read = |name: &str| -> Result<String> {
        let p = dir.join(name);
        fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
    };
    let cfg = &loaded.config;
    println!("report {}", dir.display());
    let keys = ["backend", "n", "epochs", "seed", "twin_mode"];
    let picked: Vec<String> = cfg
        .echo()
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| keys.contains(k))
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    println!("{}", picked.join(" "));
    let losses = read("losses.csv")?;
    match losses.lines().skip(1).last() {
        Some(last) => println!("final epoch,neg_elbo,recon,kl: {last}"),
        None => println!("no epochs trained"),
    }
    let timing = read("timing.csv")?;
    let secs: Vec<f64> = timing
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1)?.parse().ok())
        .collect();
    if !secs.is_empty() {
        println!(
            "mean epoch seconds: {:.3}",
            secs.iter().sum::<f64>() / secs.len() as f64
        );
    }
    for line in read("metrics.csv")?.lines().skip(1) {
        println!("{}", line.replacen(',', "=", 1));
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_subcommand_is_a_config_error() {
        assert_eq!(main_with_args(["latent-workbench", "frobnicate"]), 2);
    }

    #[test]
    fn help_exits_zero() {
        assert_eq!(main_with_args(["latent-workbench", "--help"]), 0);
    }

    #[test]
    fn unknown_key_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("d.bin");
        let args = [
            "latent-workbench",
            "gen-data",
            "--out",
            out.to_str().unwrap(),
            "bogus=1",
        ];
        assert_eq!(main_with_args(args), 2);
        assert!(!out.exists());
    }
}
