use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lrv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lrv")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lrv(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const TINY: &str = r#"
name = "tiny"
seed = 5

[model]
kind = "bs_call"

[proposal]
kind = "mc"
samples = [64]

[reference]
mode = "exact"

[train]
batch = 64
steps = 60
optimizer = "adam"
schedule = [[30, 1e-1], [60, 1e-2]]
checkpoint_every = 20

[eval]
points = 2000
"#;

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn masked_rows(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("results.csv")).unwrap().lines().map(lrv::io::mask_times).collect()
}

#[test]
fn dry_run_reports_layout_without_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out_dir = dir.path().join("out");
    let text = ok(&["train", "--config", &cfg, "--dry-run", "--out", out_dir.to_str().unwrap()]);
    assert!(text.contains("params   64"));
    assert!(!out_dir.exists());
}

#[test]
fn training_is_reproducible_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out_a = ok(&["train", "--config", &cfg, "--out", a.to_str().unwrap(), "--workers", "1"]);
    ok(&["train", "--config", &cfg, "--out", b.to_str().unwrap(), "--workers", "3"]);
    assert_eq!(fs::read(a.join("theta.bin")).unwrap(), fs::read(b.join("theta.bin")).unwrap());
    assert_eq!(masked_rows(&a), masked_rows(&b));
    assert_eq!(out_a.lines().count(), 2);
    let rows = masked_rows(&a);
    assert_eq!(rows[0], lrv::io::mask_times(lrv::io::CSV_HEADER));
    let l2 = |row: &str| row.split(';').nth(4).unwrap().parse::<f64>().unwrap();
    assert!(l2(&rows[2]) < l2(&rows[1]));
    let ckpts: Vec<_> = fs::read_dir(a.join("checkpoints")).unwrap().collect();
    assert_eq!(ckpts.len(), 3);
}

#[test]
fn seed_flag_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["train", "--config", &cfg, "--out", a.to_str().unwrap()]);
    ok(&["train", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "6"]);
    assert_ne!(fs::read(a.join("theta.bin")).unwrap(), fs::read(b.join("theta.bin")).unwrap());
}

#[test]
fn resume_reproduces_the_full_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let full = dir.path().join("full");
    ok(&["train", "--config", &cfg, "--out", full.to_str().unwrap()]);
    let resumed = dir.path().join("resumed");
    let ckpt = full.join("checkpoints/step-00000020.bin");
    ok(&["train", "--config", &cfg, "--out", resumed.to_str().unwrap(), "--resume", ckpt.to_str().unwrap()]);
    assert_eq!(fs::read(full.join("theta.bin")).unwrap(), fs::read(resumed.join("theta.bin")).unwrap());
}

#[test]
fn baselines_write_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    for run in ["x", "y"] {
        let out = dir.path().join(run);
        for method in ["mc", "mc_anti", "qmc", "qmc_anti"] {
            let line = ok(&["baseline", "--config", &cfg, "--method", method, "--out", out.to_str().unwrap()]);
            assert!(line.starts_with(&format!("{method};64;64;")));
        }
    }
    assert_eq!(masked_rows(&dir.path().join("x")), masked_rows(&dir.path().join("y")));
    assert!(!lrv(&["baseline", "--config", &cfg, "--method", "sobol"]).status.success());
}

#[test]
fn eval_matches_the_training_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TINY);
    let out = dir.path().join("run");
    let train = ok(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let theta = out.join("theta.bin");
    let eval = ok(&["eval", "--config", &cfg, "--theta", theta.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let errors = |line: &str| line.split(';').skip(3).take(3).map(str::to_owned).collect::<Vec<_>>();
    assert_eq!(errors(train.lines().last().unwrap()), errors(eval.trim()));
    let other_dir = dir.path().join("other");
    fs::create_dir(&other_dir).unwrap();
    let other = write_config(&other_dir, &TINY.replace("[64]", "[32]"));
    assert!(!lrv(&["eval", "--config", &other, "--theta", theta.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status
        .success());
}

#[test]
fn export_of_initial_variables_has_normal_moments() {
    let dir = tempfile::tempdir().unwrap();
    let text = TINY
        .replace("[64]", "[1024]")
        .replace("steps = 60", "steps = 1")
        .replace("[[30, 1e-1], [60, 1e-2]]", "[[1, 0.0]]")
        .replace("checkpoint_every = 20", "")
        .replace("points = 2000", "points = 10");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("run");
    ok(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let theta = out.join("theta.bin");
    ok(&["export", "--theta", theta.to_str().unwrap(), "--bins", "8", "--range", "-4,4"]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("moments.json")).unwrap()).unwrap();
    let n = 1024f64;
    let get = |k: &str| m[k].as_f64().unwrap();
    assert!(get("mean").abs() < 4.0 / n.sqrt());
    assert!((get("variance") - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
    assert!(get("skewness").abs() < 4.0 * (6.0 / n).sqrt());
    assert!((get("kurtosis") - 3.0).abs() < 4.0 * (24.0 / n).sqrt());
    let hist = fs::read_to_string(out.join("histogram.csv")).unwrap();
    let edges: Vec<&str> = hist.lines().skip(1).map(|l| l.split(';').next().unwrap()).collect();
    assert_eq!(edges, ["-4", "-3", "-2", "-1", "0", "1", "2", "3"]);
}

#[test]
fn export_rejects_empty_parameter_files() {
    let dir = tempfile::tempdir().unwrap();
    let header = lrv::io::ThetaHeader {
        version: 1,
        model: "bs_call".into(),
        layout: lrv::mcnet::ProposalSpec { samples: vec![0], ..lrv::mcnet::ProposalSpec::mc(1, 1) },
        seed: 0,
        config_hash: String::new(),
        step: 0,
        len: 0,
    };
    let path = dir.path().join("empty.bin");
    lrv::io::write_theta(&path, &header, &[]).unwrap();
    assert!(!lrv(&["export", "--theta", path.to_str().unwrap()]).status.success());
}

#[test]
fn presets_are_listed_and_guarded() {
    let list = ok(&["preset"]);
    assert!(list.contains("bs_call_small") && list.contains("barrier_full (full scale)"));
    assert!(ok(&["preset", "lorentz_small"]).contains("kind = \"lorentz\""));
    assert!(!lrv(&["preset", "bs_call_full"]).status.success());
    assert!(ok(&["preset", "bs_call_full", "--full-scale"]).contains("140000"));
    assert!(!lrv(&["train", "--preset", "no_such_preset", "--dry-run"]).status.success());
    assert!(!lrv(&["train", "--dry-run"]).status.success());
}
