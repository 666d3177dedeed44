use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ecosim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecosim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.json");
    fs::write(
        &path,
        r#"{
  "habitats": 12,
  "time_steps": 30,
  "runs": 2,
  "length_spec": {"kind": "Uniform", "lo": 1, "hi": 4},
  "modularity_spec": {"kind": "PowerLaw", "lo": 1, "hi": 3}
}"#,
    )
    .unwrap();
    path
}

#[test]
fn shipped_configs_validate() {
    for name in ["default.json", "desk.json"] {
        let path = shipped(name);
        let out = ecosim(&["validate-config", "--config", path.to_str().unwrap()]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{name}: {}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
}

#[test]
fn validate_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"base_degree": 3, "length_spec": {"kind": "Gaussian", "lo": 2, "hi": 18, "sigma": 0}}"#,
    )
    .unwrap();
    let out = ecosim(&["validate-config", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2, "{text}");
    assert!(lines.iter().any(|l| l.contains("length_spec.sigma")));
    assert!(lines.iter().any(|l| l.contains("base_degree")));
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("typo.json");
    fs::write(&path, r#"{"habitat": 10}"#).unwrap();
    let out = ecosim(&["validate-config", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = ecosim(&["validate-config", "--config", "/nonexistent/ecosim.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_figure_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ecosim(&[
        "replicate-figure",
        "--figure",
        "11",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = ecosim(&[
        "replicate-figure",
        "--figure",
        "5",
        "--profile",
        "huge",
        "--out",
        "x",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = ecosim(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = ecosim(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let size = fs::read_to_string(out_dir.join("size_hist.csv")).unwrap();
    assert!(size.starts_with("bin,observed,expected\n"));
    assert_eq!(size.lines().count(), 5);
    assert!(fs::read_to_string(out_dir.join("topology_final.csv"))
        .unwrap()
        .starts_with("source,target,weight\n"));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seeds"].as_array().unwrap().len(), 2);
    for key in [
        "statistic",
        "dof",
        "lower_critical_005",
        "upper_p_value",
        "paper_style_pass",
        "standard_pass",
    ] {
        assert!(summary["attr_report"].get(key).is_some(), "{key}");
    }
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let blocker = dir.path().join("file");
    fs::write(&blocker, "").unwrap();
    let out_dir = blocker.join("out");
    let out = ecosim(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
