use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latent-workbench"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: [&str; 4] = ["n=16", "image_size=16", "decoder_width=16", "batch_size=8"];

fn train_args<'a>(sub: &'a str, out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec![sub, "--out", out];
    v.extend(SMALL);
    v.extend(extra);
    v
}

#[test]
fn gen_data_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.bin", "b.bin"] {
        let o = bin(&["gen-data", "--out", name, "n=4", "seed=7"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = fs::read(dir.path().join("a.bin")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b.bin")).unwrap());
}

#[test]
fn zero_epoch_training_writes_a_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&train_args("train", "r", &["epochs=0"]), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = dir.path().join("r");
    assert!(r.join("COMPLETE").is_file());
    assert_eq!(
        fs::read_to_string(r.join("losses.csv")).unwrap(),
        "epoch,neg_elbo,recon,kl\n"
    );
    let o = bin(&["report", "r"], dir.path());
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("no epochs trained"));
}

#[test]
fn probe_on_a_lookup_table_report_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&train_args("train", "vlt", &["epochs=1", "backend=vlt"]), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let o = bin(&["probe", "vlt"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1);
    assert!(
        err.starts_with("error[config]:") && err.contains("backend=encoder"),
        "{err}"
    );
}

#[test]
fn probe_on_an_encoder_report_writes_csvs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bin(&train_args("train", "enc", &["epochs=1"]), dir.path())
        .status
        .success());
    let o = bin(
        &[
            "probe", "enc", "--out", "probes", "--aug", "shift:0", "--aug", "rotate90",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("probes/probe_shift_0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 17);
    assert!(dir.path().join("probes/probe_rotate90.csv").is_file());
}

#[test]
fn configuration_problems_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["train", "--out", "x", "no_such_key=1"],
        vec!["train", "--out", "x", "epochs=many"],
        vec!["train", "--out", "x", "--config", "missing.cfg"],
        vec!["evil-twin", "--out", "x", "backend=vlt"],
        vec!["probe", "nowhere"],
        vec!["frobnicate"],
    ] {
        let o = bin(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
        assert_eq!(stderr(&o).lines().count(), 1, "{args:?}");
    }
    assert!(!dir.path().join("x").exists());
}

#[test]
fn existing_reports_need_force() {
    let dir = tempfile::tempdir().unwrap();
    assert!(bin(&train_args("train", "r", &["epochs=0"]), dir.path())
        .status
        .success());
    assert_eq!(
        bin(&train_args("train", "r", &["epochs=0"]), dir.path()).status.code(),
        Some(2)
    );
    let mut forced = train_args("train", "r", &["epochs=0"]);
    forced.push("--force");
    assert!(bin(&forced, dir.path()).status.success());
}

#[test]
fn config_file_with_overrides_and_parallel_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let body = "# small run\nn = 16\nimage_size = 16\ndecoder_width = 16\nepochs = 1\n";
    fs::write(dir.path().join("enc.cfg"), format!("{body}backend = encoder\n")).unwrap();
    fs::write(dir.path().join("vlt.cfg"), format!("{body}backend = vlt\n")).unwrap();
    let o = bin(
        &[
            "train", "--config", "enc.cfg", "--config", "vlt.cfg", "--jobs", "2", "--out", "runs", "seed=3",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["enc", "vlt"] {
        let echo = fs::read_to_string(dir.path().join("runs").join(name).join("config.txt")).unwrap();
        assert!(echo.contains("seed = 3"));
        assert!(echo.contains(&format!("backend = {}", if name == "enc" { "encoder" } else { "vlt" })));
    }
}

#[test]
fn evil_twin_defaults_to_permutation() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin(&train_args("evil-twin", "twin", &["epochs=1"]), dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = fs::read_to_string(dir.path().join("twin/config.txt")).unwrap();
    assert!(echo.contains("twin_mode = permutation"));
}
