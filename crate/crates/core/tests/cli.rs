use std::path::Path;
use std::process::{Command, Output};

fn svl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_svl"))
        .args(args)
        .arg("--output")
        .arg(out)
        .arg("--no-timestamp")
        .output()
        .expect("svl runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const MINIMAL: &str = r#"
[kernel]
variant = "riesz"
rho = 1.5

[resolvent]
mus = [1, 10]
horizon = 15.0
steps = 512
"#;

#[test]
fn missing_variant_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[kernel]\nrho = 1.5\n").unwrap();
    let o = svl(&["certify-kernel", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kernel.variant: required"), "{}", stderr(&o));
}

#[test]
fn bad_value_names_key_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[kernel]\nvariant = \"riesz\"\nrho = 2.5\n").unwrap();
    let o = svl(&["certify-kernel", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let e = stderr(&o);
    assert!(e.contains("kernel.rho") && e.contains("line 3"), "{e}");
}

#[test]
fn unknown_override_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = svl(&["certify-kernel", "--set", "kernel.colour=3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("kernel.colour"), "{}", stderr(&o));
}

#[test]
fn coarse_grid_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("coarse.cfg");
    std::fs::write(&cfg, MINIMAL.replace("mus = [1, 10]", "mus = [1, 1e6]")).unwrap();
    let o = svl(&["scalar-resolvent", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("scalar-resolvent"), "{}", stderr(&o));
}

#[test]
fn out_of_tolerance_exponent_is_an_assertion_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tight.cfg");
    std::fs::write(&cfg, format!("{MINIMAL}tolerance = 1e-9\n")).unwrap();
    let o = svl(&["scalar-resolvent", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("mu_slope"), "{}", stderr(&o));
}

#[test]
fn certify_kernel_writes_sorted_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = svl(&["certify-kernel", "--config", "riesz-demo"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("assumption_report.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&String> = v.as_object().unwrap().keys().collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!((v["rho_sector"].as_f64().unwrap() - 1.5).abs() < 1e-3);
    let csv = std::fs::read_to_string(dir.path().join("assumption_conditions.csv")).unwrap();
    assert!(!csv.starts_with('#'));
}

#[test]
fn timestamp_line_only_without_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_svl"))
        .args(["certify-kernel", "--config", "riesz-demo", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    let csv = std::fs::read_to_string(dir.path().join("assumption_conditions.csv")).unwrap();
    assert!(csv.starts_with("# generated "));
    let dat = std::fs::read_to_string(dir.path().join("assumption_conditions.dat")).unwrap();
    assert!(dat.starts_with("# generated "));
}
