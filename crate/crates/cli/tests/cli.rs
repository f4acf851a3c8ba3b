use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn sqglab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqglab"))
        .args(args)
        .current_dir(dir)
        .env_remove("OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path) -> Value {
    let text = std::fs::read_to_string(dir.join("manifest.json")).expect("manifest written");
    serde_json::from_str(&text).unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn empty_check_list_succeeds() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("cfg.json"), r#"{"command":"verify","checks":[]}"#).unwrap();
    let o = sqglab(tmp.path(), &["--config", "cfg.json", "--out", "run"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&tmp.path().join("run"));
    assert_eq!(m["artifacts"], Value::Array(vec![]));
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["command"], "verify");
}

#[test]
fn unknown_keys_are_usage_errors() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("cfg.json"), r#"{"command":"verify","solver":{"bta":0.5}}"#).unwrap();
    let o = sqglab(tmp.path(), &["--config", "cfg.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bta"), "{}", stderr(&o));
    let o = sqglab(tmp.path(), &["verify", "--check", "no_such_check"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bernstein"));
    let o = sqglab(tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bernstein_check_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sqglab(tmp.path(), &["verify", "--check", "bernstein", "--beta", "0.5", "--n", "256", "--out", "v"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("bernstein pass"), "{}", stdout(&o));
    let csv = std::fs::read_to_string(tmp.path().join("v/bernstein.csv")).unwrap();
    assert!(csv.starts_with("check_id,param_hash,label,trial,ratio\n"));
    assert!(csv.lines().filter(|l| l.starts_with("bernstein,")).count() >= 16 * 4);
    let m = manifest(&tmp.path().join("v"));
    let params = &m["config"]["checks"][0]["params"];
    assert_eq!(params["grids"], serde_json::json!([128, 256]));
    assert_eq!(m["verdicts"][0], serde_json::json!(["bernstein", "pass"]));
}

#[test]
fn radial_simulation_is_stationary() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sqglab(
        tmp.path(),
        &["simulate", "--beta", "0.5", "--ic", "radial", "--n", "128", "--t-end", "0.1", "--out", "s"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("s");
    for f in ["timeseries.csv", "theta_initial.fld", "theta_final.fld", "u_final.fld"] {
        assert!(dir.join(f).exists(), "{f}");
    }
    let a = sqglab::io::load_field(dir.join("theta_initial.fld")).unwrap();
    let b = sqglab::io::load_field(dir.join("theta_final.fld")).unwrap();
    assert!(b.sub(&a).linf() <= 1e-6 * a.linf());
    let series = std::fs::read_to_string(dir.join("timeseries.csv")).unwrap();
    assert!(series.lines().any(|l| l.contains(",theta_linf,")));
}

#[test]
fn flags_override_the_document() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("cfg.json"),
        r#"{"command":"norms","seed":3,"solver":{"beta":0.25,"n_side":32},"norms":["l2"],"output_dir":"doc"}"#,
    )
    .unwrap();
    let o = sqglab(tmp.path(), &["--config", "cfg.json", "--seed", "5", "norms", "--norm", "linf"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&tmp.path().join("doc"));
    assert_eq!(m["config"]["seed"], 5);
    assert_eq!(m["config"]["solver"]["beta"], 0.25);
    assert_eq!(m["config"]["norms"], serde_json::json!(["linf"]));
}

#[test]
fn output_dir_falls_back_to_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sqglab"))
        .args(["norms", "--n", "32"])
        .current_dir(tmp.path())
        .env("OUTPUT_DIR", tmp.path().join("from_env"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("from_env/norms.csv").exists());
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sqglab(
        tmp.path(),
        &["norms", "--ic", "band", "--n", "64", "--norm", "zygmund:1.5", "--norm", "hs_ul:1.5@1", "--out", "a"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let o = sqglab(tmp.path(), &["--config", "a/manifest.json", "--out", "b"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ma = manifest(&tmp.path().join("a"));
    let mb = manifest(&tmp.path().join("b"));
    let names = ma["artifacts"].as_array().unwrap();
    assert!(!names.is_empty());
    assert_eq!(names, mb["artifacts"].as_array().unwrap());
    for name in names {
        let name = name.as_str().unwrap();
        let a = std::fs::read(tmp.path().join("a").join(name)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn norms_of_a_field_file() {
    let tmp = tempfile::tempdir().unwrap();
    let g = sqglab::Grid2D::periodic(32).unwrap();
    let f = sqglab::SpectralField::from_fn(g, |x, _| 2.0 * x.sin());
    sqglab::io::save_field(&f, tmp.path().join("f.fld")).unwrap();
    let o = sqglab(tmp.path(), &["norms", "--input", "f.fld", "--norm", "linf", "--out", "n"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(tmp.path().join("n/norms.csv")).unwrap();
    let value: f64 = csv.lines().nth(1).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!((value - 2.0).abs() < 1e-12, "{value}");
}

#[test]
fn iterate_writes_decrements() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sqglab(tmp.path(), &["iterate", "--n", "128", "--n-max", "3", "--out", "i"]);
    assert!(o.status.code().is_some_and(|c| c <= 1), "{}", stderr(&o));
    let dir = tmp.path().join("i");
    let sums = std::fs::read_to_string(dir.join("partial_sums.csv")).unwrap();
    assert_eq!(sums.lines().count(), 1 + 2);
    let m = manifest(&dir);
    assert_eq!(m["config"]["solver"]["length"], 16.0);
    assert!(m["config"]["solver"]["dt"].as_f64().unwrap() > 0.0);
}

#[test]
fn kernels_export() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sqglab(tmp.path(), &["kernels", "--n", "256", "--length", "16", "--out", "k"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let dir = tmp.path().join("k");
    let near = sqglab::io::load_field(dir.join("near.fld")).unwrap();
    assert_eq!(near.components(), 2);
    let table = std::fs::read_to_string(dir.join("kernels.csv")).unwrap();
    assert!(table.contains("c_beta,3.329679355017"), "{table}");
    assert!(dir.join("fundamental.csv").exists());
}

#[test]
fn fail_verdicts_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    // C^{3.5} norms of the commutator are not grid-stable at these sizes.
    let o = sqglab(tmp.path(), &["verify", "--check", "holder_commutator", "--r", "3.5", "--n", "128", "--out", "h"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("holder_commutator fail"));
    assert_eq!(manifest(&tmp.path().join("h"))["status"], "fail");
}
