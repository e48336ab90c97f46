use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use opponency::data::{write_batch, TEST_FILE, TRAIN_FILES};
use opponency::model::load_checkpoint;
use opponency::ndnum::Rng;
use opponency::probe::parse_records;

const IMAGE_LEN: usize = 32 * 32 * 3;

fn opponency(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opponency"))
        .args(args)
        .env_remove("OPPONENCY_DATA")
        .output()
        .unwrap()
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Byte-valued images tinted by label, four per training file.
fn fake_cifar(dir: &Path) {
    let mut rng = Rng::new(5);
    let mut batch = |n: usize| {
        let labels: Vec<u8> = (0..n).map(|i| (i % 10) as u8).collect();
        let pixels: Vec<f32> = labels
            .iter()
            .flat_map(|&l| (0..IMAGE_LEN).map(move |i| (l as usize, i)).collect::<Vec<_>>())
            .map(|(l, i)| {
                let tint = if i % 3 == l % 3 { 120 } else { 0 };
                (tint + rng.below(100) as u32) as f32 / 255.0
            })
            .collect();
        (pixels, labels)
    };
    for name in TRAIN_FILES {
        let (p, l) = batch(4);
        write_batch(&dir.join(name), &p, &l).unwrap();
    }
    let (p, l) = batch(10);
    write_batch(&dir.join(TEST_FILE), &p, &l).unwrap();
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn train_probe_and_rf_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cifar");
    fs::create_dir(&data).unwrap();
    fake_cifar(&data);
    let model = dir.path().join("m.opnn");
    let train_args = [
        "train", "--bottleneck", "4", "--depth", "2", "--seed", "1", "--epochs", "1", "--batch-size", "10",
        "--data", s(&data), "--out", s(&model),
    ];
    ok(&opponency(&train_args));
    let m = load_checkpoint(&model).unwrap();
    assert_eq!((m.config.bottleneck, m.config.ventral_depth, m.config.seed), (4, 2, 1));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m.opnn.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["bottleneck"], 4);
    assert_eq!(manifest["config"]["seed"], 1);
    assert!(manifest["test_accuracy"].is_number());

    // same argv, same bytes
    let again = dir.path().join("again.opnn");
    let mut args = train_args.to_vec();
    *args.last_mut().unwrap() = s(&again);
    ok(&opponency(&args));
    assert_eq!(fs::read(&model).unwrap(), fs::read(&again).unwrap());

    let cells = dir.path().join("cells.txt");
    let probe_args = [
        "probe", "--model", s(&model), "--out", s(&cells), "--hues", "12", "--orientation-step", "45", "--cycles", "2",
        "--phases", "2",
    ];
    ok(&opponency(&probe_args));
    let text = fs::read_to_string(&cells).unwrap();
    let records = parse_records(&text).unwrap();
    assert_eq!(records.len(), 32 + 4 + 32 + 32);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), records.len());
    assert!(records.iter().all(|r| r.model_id == "m"));

    let png = dir.path().join("rf.png");
    ok(&opponency(&["rf", "--model", s(&model), "--layer", "ventral1", "--channel", "3", "--out", s(&png)]));
    assert_eq!(&fs::read(&png).unwrap()[..4], b"\x89PNG");
    let bad = opponency(&["rf", "--model", s(&model), "--layer", "retina2", "--channel", "4", "--out", s(&png)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn grid_and_report_write_the_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("cifar");
    fs::create_dir(&data).unwrap();
    fake_cifar(&data);
    let out = dir.path().join("results");
    let out_a = opponency(&[
        "grid", "--bottlenecks", "2,4", "--depths", "0,1", "--trials", "1", "--epochs", "1", "--batch-size", "10",
        "--hues", "8", "--orientation-step", "90", "--cycles", "1", "--phases", "2", "--data", s(&data), "--out",
        s(&out),
    ]);
    ok(&out_a);
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    // layers per depth: 1 + depth; 3 modalities x 3 classes each; two bottlenecks
    assert_eq!(csv.lines().count() - 1, 2 * (1 + 2) * 9);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["models"].as_array().unwrap().len(), 4);

    let figs = dir.path().join("figs");
    ok(&opponency(&[
        "report", "--summary", s(&out.join("summary.csv")), "--compare", s(&out.join("summary.csv")), "--out", s(&figs),
    ]));
    let compare = fs::read_to_string(figs.join("compare.csv")).unwrap();
    assert_eq!(compare.lines().count(), csv.lines().count());
    assert!(compare.lines().skip(1).all(|l| l.ends_with(",0.000000")));
    let shifts = fs::read_to_string(figs.join("depth_shift.csv")).unwrap();
    assert_eq!(shifts.lines().count(), 1 + 2);
    assert!(figs.join("fractions_d1_spectral.svg").exists());
}

#[test]
fn failures_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(opponency(&["train", "--bogus"]).status.code(), Some(2));
    assert_eq!(opponency(&["frobnicate"]).status.code(), Some(2));
    let out = s(&dir.path().join("m.opnn")).to_string();

    let missing = opponency(&["train", "--out", &out]);
    assert_eq!(missing.status.code(), Some(3));
    assert_eq!(String::from_utf8_lossy(&missing.stderr).lines().count(), 1);

    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert_eq!(opponency(&["train", "--data", s(&empty), "--out", &out]).status.code(), Some(3));

    let junk = dir.path().join("junk.opnn");
    fs::write(&junk, b"not a checkpoint").unwrap();
    let probe = opponency(&["probe", "--model", s(&junk), "--out", s(&dir.path().join("c.txt"))]);
    assert_eq!(probe.status.code(), Some(3));

    assert_eq!(opponency(&["train", "--bottleneck", "0", "--out", &out]).status.code(), Some(2));

    let data = dir.path().join("cifar");
    fs::create_dir(&data).unwrap();
    fake_cifar(&data);
    let diverged = opponency(&[
        "train", "--depth", "0", "--epochs", "1", "--batch-size", "10", "--optimizer", "sgd", "--lr", "1e30", "--data",
        s(&data), "--out", &out,
    ]);
    assert_eq!(diverged.status.code(), Some(4));
}

#[test]
fn every_subcommand_documents_defaults() {
    for (cmd, flags) in [
        ("train", &["--bottleneck", "--depth", "--seed", "--epochs", "--lr", "--colour-space", "--manifest"][..]),
        ("probe", &["--hues", "--delta", "--epsilon", "--manifest"][..]),
        ("grid", &["--bottlenecks", "--depths", "--trials", "--jobs", "--seed", "--manifest"][..]),
        ("report", &["--compare", "--manifest"][..]),
        ("rf", &["--layer", "--channel", "--manifest"][..]),
    ] {
        let help = String::from_utf8(opponency(&[cmd, "--help"]).stdout).unwrap();
        for flag in flags {
            // a flag's entry runs until the next line that starts with a dash
            let start = help
                .lines()
                .position(|l| l.trim_start().starts_with(&format!("{flag} ")))
                .unwrap_or_else(|| panic!("{cmd} {flag} missing from help"));
            let entry: Vec<&str> = help
                .lines()
                .skip(start)
                .enumerate()
                .take_while(|(i, l)| *i == 0 || !l.trim_start().starts_with('-'))
                .map(|(_, l)| l)
                .collect();
            assert!(entry.concat().contains("[default:"), "{cmd}: {entry:?}");
        }
    }
}
