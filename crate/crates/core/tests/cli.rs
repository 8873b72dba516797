use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use latentfilter::harness::{sha256_hex, ExperimentConfig};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_latentfilter"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, doc: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, doc).unwrap();
    p
}

const SMALL: &str = r#"{
  "schema_version": 1,
  "experiment": "joint-vs-bridge",
  "seed": 3,
  "scenario": {"builtin": "binary"},
  "grid": {"steps": 400},
  "mc": {"n_paths": 64}
}"#;

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg("--config").arg(config).arg("--out").arg(out).args(extra).output().unwrap()
}

fn manifest(out: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn validate_lists_every_problem_and_exits_2() {
    let o = bin().args(["validate", "--config"]).arg(configs().join("invalid-example.json")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let text = String::from_utf8_lossy(&o.stdout).to_string() + &String::from_utf8_lossy(&o.stderr);
    for needle in ["scenario.weights", "attributes.sign", "epsilon", "unknown attribute `colour`"] {
        assert!(text.contains(needle), "{needle} not reported in\n{text}");
    }
}

#[test]
fn shipped_configs_validate() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() == "invalid-example.json" {
            continue;
        }
        let o = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{}: {}", path.display(), String::from_utf8_lossy(&o.stdout));
    }
}

#[test]
fn run_with_config_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&configs().join("invalid-example.json"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let missing = run(&dir.path().join("nope.json"), &dir.path().join("out"), &[]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&configs().join("overflow-example.json"), &out, &["--no-plots"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let diag: Value = serde_json::from_slice(&std::fs::read(out.join("diagnostic.json")).unwrap()).unwrap();
    assert_eq!(diag["experiment"], "joint-vs-bridge");
    assert!(diag["error"].as_str().unwrap().contains("non-finite"));
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&config, &a, &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run(&config, &b, &["--threads", "3"]).status.code(), Some(0));
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["outputs"], mb["outputs"]);
    assert_eq!(ma["config_digest"], mb["config_digest"]);
    for r in ma["outputs"].as_array().unwrap() {
        let f = r["file"].as_str().unwrap();
        let bytes = std::fs::read(a.join(f)).unwrap();
        assert_eq!(bytes, std::fs::read(b.join(f)).unwrap(), "{f}");
        assert_eq!(r["sha256"].as_str().unwrap(), sha256_hex(&bytes), "{f}");
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&config, &a, &["--no-plots"]).status.code(), Some(0));
    assert_eq!(run(&config, &b, &["--no-plots", "--seed", "4"]).status.code(), Some(0));
    assert_eq!(manifest(&a)["root_seed"], 3);
    assert_eq!(manifest(&b)["root_seed"], 4);
    assert_ne!(
        std::fs::read(a.join("joint_moments.csv")).unwrap(),
        std::fs::read(b.join("joint_moments.csv")).unwrap()
    );
}

#[test]
fn stored_config_revalidates_and_redigests() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    assert_eq!(run(&config, &out, &[]).status.code(), Some(0));
    let stored = ExperimentConfig::load(&out.join("config.json")).unwrap();
    assert_eq!(manifest(&out)["config_digest"].as_str().unwrap(), stored.digest());
    assert_eq!(stored.canonical_bytes(), std::fs::read(out.join("config.json")).unwrap());
}

#[test]
fn plots_are_optional() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &SMALL.replace("joint-vs-bridge", "bridge-check"));
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run(&config, &a, &[]).status.code(), Some(0));
    assert_eq!(run(&config, &b, &["--no-plots"]).status.code(), Some(0));
    assert!(a.join("bridge_mean_error.svg").exists());
    assert!(!b.join("bridge_mean_error.svg").exists());
}

#[test]
fn scenarios_list_names_the_builtins() {
    let o = bin().args(["scenarios", "list"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for name in ["binary", "triad", "quad", "hierarchy", "gaussian-static", "gaussian-bridge"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}
