//! End-to-end checks of the `sim` binary: exit codes, file output,
//! reproducibility across worker counts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sim"))
}

fn tiny_experiment(dir: &Path) -> std::path::PathBuf {
    let spec = r#"{
      "name": "tiny",
      "scenario": {
        "N": 32, "Ls": 8, "NT": 2, "NR": 6,
        "per_antenna": [{"qam": 4}, {"qam": 4}],
        "profile": {"linear_decay": {"taps": 8}},
        "seed": 5
      },
      "detectors": ["simplified_mmse"],
      "metric": "ber",
      "method": "both",
      "sweep": {"ebn0_db": [-4, 0]},
      "n_realizations": 6,
      "mc": {"min_errors": 10, "max_blocks": 32}
    }"#;
    let path = dir.join("tiny.json");
    fs::write(&path, spec).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn list_specs_names_every_bundled_experiment() {
    let out = sim().arg("list-specs").output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    for name in ["fig3a", "fig3b", "fig4a", "fig5a", "fig6"] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn validate_accepts_bundled_and_file_specs() {
    let out = sim().args(["validate", "fig5a"]).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("fig5a: ok"));

    let dir = tempfile::tempdir().unwrap();
    let path = tiny_experiment(dir.path());
    let out = sim().arg("validate").arg(&path).output().unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("tiny: ok"));
}

#[test]
fn validation_failures_exit_with_code_1() {
    // Not bundled, not a file.
    let out = sim().args(["validate", "no-such-experiment"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));

    // Parses but is inconsistent: decision feedback + semi-analytical.
    let dir = tempfile::tempdir().unwrap();
    let bad = r#"{
      "name": "bad",
      "scenario": {"N": 32, "Ls": 8, "NT": 2, "NR": 6,
                   "per_antenna": [{"qam": 4}, {"qam": 4}],
                   "profile": {"linear_decay": {"taps": 8}}},
      "detectors": [{"df": {"first": "mf", "rest": "mf", "iterations": 2}}],
      "metric": "ber",
      "method": "semi_analytical",
      "sweep": {"ebn0_db": [0]}
    }"#;
    let path = dir.path().join("bad.json");
    fs::write(&path, bad).unwrap();
    let out = sim().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nonlinear"), "{}", stderr(&out));

    // Scenario reference that points nowhere: caught by validate too.
    let dangling = r#"{
      "name": "dangling",
      "scenario": "missing_scenario.json",
      "detectors": ["mf"],
      "metric": "ber",
      "method": "semi_analytical",
      "sweep": {"ebn0_db": [0]}
    }"#;
    let path = dir.path().join("dangling.json");
    fs::write(&path, dangling).unwrap();
    let out = sim().arg("validate").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_curves_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny_experiment(dir.path());
    let out_dir = dir.path().join("results");
    let out = sim()
        .arg("run")
        .arg(&spec)
        .arg("--out")
        .arg(&out_dir)
        .args(["--seed", "7"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));

    let manifest_text = fs::read_to_string(out_dir.join("tiny_manifest.json")).unwrap();
    let manifest: serde_json::Value = serde_json::from_str(&manifest_text).unwrap();
    assert_eq!(manifest["seed"], 7);
    let curves = manifest["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 2); // semi-analytical + counted
    for curve in curves {
        let file = curve["file"].as_str().unwrap();
        let text = fs::read_to_string(out_dir.join(file)).unwrap();
        assert!(text.contains("# seed: 7"));
    }
}

#[test]
fn worker_count_does_not_change_the_output() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny_experiment(dir.path());
    let run_with = |workers: &str, sub: &str| {
        let out_dir = dir.path().join(sub);
        let out = sim()
            .arg("run")
            .arg(&spec)
            .arg("--out")
            .arg(&out_dir)
            .args(["--workers", workers])
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr(&out));
        let mut files: Vec<_> = fs::read_dir(&out_dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        files.sort();
        files
            .into_iter()
            .map(|p| (p.file_name().unwrap().to_owned(), fs::read(&p).unwrap()))
            .collect::<Vec<_>>()
    };
    assert_eq!(run_with("1", "w1"), run_with("3", "w3"));
}

#[test]
fn env_variables_stand_in_for_flags() {
    let dir = tempfile::tempdir().unwrap();
    let spec = tiny_experiment(dir.path());
    let out_dir = dir.path().join("from_env");
    let out = sim()
        .arg("run")
        .arg(&spec)
        .env("SIM_OUT_DIR", &out_dir)
        .env("SIM_WORKERS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out_dir.join("tiny_manifest.json").exists());
}
