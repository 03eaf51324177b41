use std::fs;
use std::path::Path;

use latent_workbench::experiments::{
    assign_twins, augment_probe, load_report, train, train_with_twins, write_report, Augmentation, Backend, Decoder,
    ExperimentConfig, TrainOutcome, TwinAssignment, TwinMode,
};
use latent_workbench::forward::Dataset;
use latent_workbench::Error;

fn config(extra: &[&str]) -> ExperimentConfig {
    let mut o: Vec<String> = [
        "n=24",
        "image_size=16",
        "epochs=2",
        "decoder_width=16",
        "batch_size=8",
        "seed=5",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    o.extend(extra.iter().map(|s| s.to_string()));
    ExperimentConfig::from_overrides(&o).unwrap()
}

fn run(cfg: &ExperimentConfig) -> (TrainOutcome, Dataset) {
    let data = cfg.load_dataset().unwrap();
    (train(cfg, &data).unwrap(), data)
}

/// Every file in a report except the wall-clock timings, recursively.
fn report_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timing.csv" {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn rerun_from_echoed_config_is_bitwise_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for (tag, extra) in [
        ("encoder", ["backend=encoder", "twin_mode=noise"]),
        ("vlt", ["backend=vlt", "latent_lr=0.05"]),
    ] {
        let cfg = config(&extra);
        let (out, data) = run(&cfg);
        let first = tmp.path().join(format!("{tag}-a"));
        write_report(&first, &out, &data, false).unwrap();

        let echoed = load_report(&first).unwrap().config;
        assert_eq!(echoed, cfg);
        let (again, data2) = run(&echoed);
        let second = tmp.path().join(format!("{tag}-b"));
        write_report(&second, &again, &data2, false).unwrap();

        let (a, b) = (report_bytes(&first), report_bytes(&second));
        assert!(a.iter().any(|(n, _)| n.ends_with(".f32")));
        assert_eq!(a.len(), b.len());
        for ((na, ba), (nb, bb)) in a.iter().zip(&b) {
            assert_eq!(na, nb);
            assert!(ba == bb, "{na} differs between reruns");
        }
    }
}

#[test]
fn identity_twins_reproduce_plain_training() {
    let cfg = config(&[]);
    let (plain, data) = run(&cfg);
    let identity = TwinAssignment::Permutation((0..data.len()).collect());
    let twinned = train_with_twins(&cfg, &data, &identity).unwrap();
    assert_eq!(plain.report.losses, twinned.report.losses);
    assert_eq!(plain.report.latents, twinned.report.latents);
    assert_eq!(plain.model.decoder, twinned.model.decoder);
}

#[test]
fn permutation_twins_are_derangements() {
    let cfg = config(&[]);
    let data = cfg.load_dataset().unwrap();
    match assign_twins(TwinMode::Permutation, &data, cfg.seed).unwrap() {
        TwinAssignment::Permutation(p) => {
            assert!(p.iter().enumerate().all(|(i, &j)| i != j));
            let mut s = p.clone();
            s.sort_unstable();
            assert_eq!(s, (0..data.len()).collect::<Vec<_>>());
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn frozen_zero_table_gives_a_single_consensus_volume() {
    let cfg = config(&["backend=vlt", "backend_init=zeros", "freeze_latents=true", "epochs=3"]);
    let data = cfg.load_dataset().unwrap();
    let before = latent_workbench::experiments::Model::new(&cfg, &data).unwrap();
    let out = train(&cfg, &data).unwrap();
    let (Backend::Vlt(b0), Backend::Vlt(b1)) = (&before.backend, &out.model.backend) else {
        panic!("lookup-table backend expected");
    };
    assert_eq!(b0.table(), b1.table(), "frozen table must not move");
    let losses = &out.report.losses;
    assert!(losses.last().unwrap().recon < losses[0].recon);

    let Decoder::Tomographic(dec) = &out.model.decoder else {
        panic!("tomographic decoder expected")
    };
    let z = cfg.z_dim;
    let reference = dec.decode_volume(&b1.table().row(0)[..z]).unwrap();
    for i in 1..data.len() {
        let v = dec.decode_volume(&b1.table().row(i)[..z]).unwrap();
        let diff = v
            .data()
            .iter()
            .zip(reference.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-10);
    }
}

#[test]
fn zero_epochs_yield_an_empty_curve() {
    let cfg = config(&["epochs=0"]);
    let (out, data) = run(&cfg);
    assert!(out.report.losses.is_empty());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r");
    write_report(&path, &out, &data, false).unwrap();
    assert_eq!(fs::read_to_string(path.join("losses.csv")).unwrap().lines().count(), 1);
}

#[test]
fn completed_reports_are_not_overwritten_without_force() {
    let cfg = config(&["epochs=1"]);
    let (out, data) = run(&cfg);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r");
    write_report(&path, &out, &data, false).unwrap();
    assert!(matches!(write_report(&path, &out, &data, false), Err(Error::Config(_))));
    write_report(&path, &out, &data, true).unwrap();
}

#[test]
fn identity_probes_do_not_move_latents() {
    let cfg = config(&["epochs=1"]);
    let (out, data) = run(&cfg);
    for aug in [Augmentation::Shift(0), Augmentation::Rotate90(4)] {
        let r = augment_probe(&out.model, &data, aug).unwrap();
        assert!(r.displacement.iter().all(|&d| d == 0.0), "{aug}");
    }
    let r = augment_probe(&out.model, &data, Augmentation::Shift(1)).unwrap();
    assert_eq!(r.displacement.len(), data.len());
    assert!(r.knn_augmented.is_some());

    let vlt = config(&["epochs=1", "backend=vlt"]);
    let (out, data) = run(&vlt);
    assert!(matches!(
        augment_probe(&out.model, &data, Augmentation::Shift(1)),
        Err(Error::Contract(_))
    ));
}
