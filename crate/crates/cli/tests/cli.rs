use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spinbench(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinbench"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("SPINBENCH_OUT")
        .output()
        .unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("{e}: {text}"))
}

#[test]
fn rectangular_spectrum_reports_sinc_sidelobe() {
    let d = tempfile::tempdir().unwrap();
    let o = spinbench(
        d.path(),
        &["pulse", "spectrum", "--shape", "rect", "--step", "0.05", "--resolution", "0.005"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    let db = v["first_sidelobe"]["level_db"].as_f64().unwrap();
    assert!((db + 13.26).abs() < 0.05, "{db}");
    assert!(d.path().join("pulse/spectrum.csv").exists());
}

#[test]
fn rb_run_writes_manifest_and_outputs() {
    let d = tempfile::tempdir().unwrap();
    let args = [
        "rb",
        "run",
        "--qubits",
        "1",
        "--randomizations",
        "2",
        "--shots",
        "50",
        "--max-length-log2",
        "3",
        "--seed",
        "4",
    ];
    let o = spinbench(d.path(), &args);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = stdout_json(&o);
    assert_eq!(m["experiment"], "rb");
    assert_eq!(m["seed"], 4);
    for f in ["result.json", "data.csv", "plot.csv", "manifest.json"] {
        assert!(d.path().join("rb").join(f).exists(), "{f}");
    }
}

#[test]
fn output_directory_from_environment() {
    let d = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_spinbench"))
        .args(["pulse", "synth", "--gate-time", "50"])
        .env("SPINBENCH_OUT", d.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(d.path().join("pulse/envelope.csv").exists());
}

#[test]
fn missing_config_exits_2_with_error_json() {
    let d = tempfile::tempdir().unwrap();
    let o = spinbench(d.path(), &["run", "rb", "--config", "/nonexistent.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["error"], "config");
    assert_eq!(e["exit_code"], 2);
    assert!(e["message"].as_str().unwrap().contains("/nonexistent.toml"));
}

#[test]
fn broken_config_and_bad_overrides_exit_2() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("bad.toml");
    std::fs::write(&cfg, "[[qubit]]\nlabel = 1\nf_res_mhz = 16000.0\n").unwrap();
    let o = spinbench(d.path(), &["rb", "run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr_json(&o)["message"].as_str().unwrap().contains("drive_efficiency"));

    let o = spinbench(d.path(), &["rb", "run", "--shots", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"], "config");
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let d = tempfile::tempdir().unwrap();
    let o = spinbench(d.path(), &["run", "fig9"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig5c"));
}

#[test]
fn unknown_qubit_is_a_runtime_error() {
    let d = tempfile::tempdir().unwrap();
    let o = spinbench(d.path(), &["cal", "xtalk", "--pair", "3", "9"]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_json(&o)["error"], "runtime");
}

#[test]
fn kaiser_spectrum_with_short_flags() {
    let d = tempfile::tempdir().unwrap();
    let args = [
        "pulse",
        "spectrum",
        "--shape",
        "kaiser",
        "--beta",
        "8",
        "--tg",
        "83",
        "--carrier",
        "16473.5",
    ];
    let o = spinbench(d.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = stdout_json(&o);
    assert!(v["max_sidelobe_db"].as_f64().unwrap() < -55.0);
    let csv = std::fs::read_to_string(d.path().join("pulse/spectrum.csv")).unwrap();
    let mid = csv.lines().nth(1 + csv.lines().count() / 2).unwrap();
    let f: f64 = mid.split(',').next().unwrap().parse().unwrap();
    assert!((f - 16473.5).abs() < 1.0, "{mid}");
}
