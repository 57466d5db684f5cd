use std::path::Path;
use std::process::{Command, Output};

use solitonlab_core::multisoliton::{exact_invariants, MultisolitonParams};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_solitonlab"));
    c.env_remove("SOLITONLAB_THREADS");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], cfg: &Path) -> Output {
    bin().args(args).arg("--config").arg(cfg).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const STABILITY: &str = r#"{
  "schema_version": 1,
  "beta": [1.0, 2.0],
  "c": [0.0, -8.0],
  "grid": {"length": 60, "points": 1024},
  "perturbation": {"seed": 7, "amplitude": 1e-3, "band": 2, "width": 2, "center": 5},
  "time": {"horizon": 1, "samples": 6, "dt": 1e-4, "cfl": 1, "boundary": "warn"}
}"#;

#[test]
fn profile_reports_the_exact_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.json",
        r#"{"schema_version": 1, "beta": [1.0, 2.0], "c": [0.0, 0.0],
            "grid": {"length": 40, "points": 512}, "output": {"dir": "unused", "prefix": "p"}}"#,
    );
    let o = run(&["profile", "--out", dir.path().to_str().unwrap()], &cfg);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("p_profile.csv")).unwrap();
    assert!(csv.starts_with("x,q\n"));
    assert_eq!(csv.lines().count(), 513);
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("p_invariants.json")).unwrap(),
    )
    .unwrap();
    let exact = exact_invariants(&MultisolitonParams::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap());
    let num = &report["numerical"];
    for (key, want) in [
        ("integral", exact.integral),
        ("momentum", exact.momentum),
        ("energy", exact.energy),
    ] {
        let got = num[key].as_f64().unwrap();
        assert!(
            (got - want).abs() < 1e-10 * want.abs(),
            "{key}: {got} vs {want}"
        );
    }
    let script = std::fs::read_to_string(dir.path().join("p_profile_plot.py")).unwrap();
    assert!(script.contains("p_profile.csv"));
}

#[test]
fn bad_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for (i, text) in [
        "not json",
        r#"{"schema_version": 9, "beta": [1.0], "grid": {"length": 40, "points": 256}}"#,
        r#"{"schema_version": 1, "beta": [1.0], "grid": {"length": 40, "points": 256}, "typo": 1}"#,
        r#"{"schema_version": 1, "beta": [-1.0], "grid": {"length": 40, "points": 256}}"#,
    ]
    .iter()
    .enumerate()
    {
        let cfg = write_config(dir.path(), &format!("bad{i}.json"), text);
        let o = run(&["profile"], &cfg);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains("config error"), "{}", stderr(&o));
    }
    let o = run(&["profile"], &dir.path().join("missing.json"));
    assert_eq!(o.status.code(), Some(2));
    let cfg = write_config(
        dir.path(),
        "ok.json",
        r#"{"schema_version": 1, "beta": [1.0], "grid": {"length": 40, "points": 256}}"#,
    );
    let o = bin()
        .env("SOLITONLAB_THREADS", "zero")
        .args(["profile", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // A soliton this wide does not decay inside the box.
    let cfg = write_config(
        dir.path(),
        "wide.json",
        r#"{"schema_version": 1, "beta": [0.1], "grid": {"length": 20, "points": 256}}"#,
    );
    let o = run(&["profile", "--out", dir.path().to_str().unwrap()], &cfg);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

fn read_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn stability_outputs_are_byte_stable() {
    let root = tempfile::tempdir().unwrap();
    let cfg = write_config(root.path(), "config.json", STABILITY);
    let mut runs = vec![];
    for (name, extra) in [("a", None), ("b", None), ("c", Some("8"))] {
        let out = root.path().join(name);
        let mut args = vec!["stability", "--out", out.to_str().unwrap()];
        if let Some(seed) = extra {
            args.extend(["--seed", seed]);
        }
        let o = run(&args, &cfg);
        assert!(o.status.success(), "{}", stderr(&o));
        runs.push(read_outputs(&out));
    }
    assert_eq!(runs[0], runs[1]);
    assert_ne!(runs[0], runs[2], "--seed must change the perturbation");

    let names: Vec<&str> = runs[0].iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        [
            "run_distance.csv",
            "run_stability.json",
            "run_stability_plot.py",
            "run_tail.csv"
        ]
    );
    let file = |name: &str| &runs[0].iter().find(|f| f.0 == name).unwrap().1;
    let csv = String::from_utf8(file("run_distance.csv").clone()).unwrap();
    assert!(csv.starts_with("t,distance_s-1,distance_s0,distance_s1\n"));
    let report: serde_json::Value = serde_json::from_slice(file("run_stability.json")).unwrap();
    let ratio = report["h_minus_one_ratio"].as_f64().unwrap();
    assert!((1.0..=10.0).contains(&ratio), "{ratio}");
    assert_eq!(report["perturbation"]["seed"], 7);
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["selftest", "--out", dir.path().to_str().unwrap()])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("selftest_verdicts.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["verdicts"].as_array().unwrap().len(), 11);
}

#[test]
fn selftest_reports_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "selftest",
            "--only",
            "99",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}
