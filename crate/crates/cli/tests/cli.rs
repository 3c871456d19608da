use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_coop-limits"));
    c.env_remove("COOP_LIMITS_OUT");
    c
}

fn run_ok(args: &[&str], out: &Path) -> Value {
    let o = bin().args(args).arg("--out").arg(out).output().unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn run_err(args: &[&str]) -> (i32, Value) {
    let dir = TempDir::new().unwrap();
    let o: Output = bin().args(args).arg("--out").arg(dir.path()).output().unwrap();
    assert!(!o.status.success(), "{args:?} should fail");
    let err = serde_json::from_slice(String::from_utf8_lossy(&o.stderr).trim().as_bytes()).unwrap();
    (o.status.code().unwrap(), err)
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| panic!("not a number: {v}"))
}

#[test]
fn facing_sector_example_reports_sir_and_ceiling() {
    let dir = TempDir::new().unwrap();
    let r = run_ok(&["paper-example", "4"], dir.path());
    let sir = r["results"]["sir_dB"].as_array().unwrap();
    assert_eq!(sir.len(), 3);
    for s in sir {
        assert!((f(s) - 9.2).abs() < 0.15, "{s}");
    }
    assert!((f(&r["results"]["c_inf"]) - 2.54).abs() < 0.1);
    assert!(r["config"]["deviations"].as_array().unwrap().is_empty());
    // the report on disk matches stdout
    let disk: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("paper-example-4.json")).unwrap()).unwrap();
    assert_eq!(disk["results"], r["results"]);
}

#[test]
fn infinite_system_example_at_vehicular_coherence() {
    let dir = TempDir::new().unwrap();
    let r = run_ok(&["paper-example", "6", "--L", "1000"], dir.path());
    assert!((f(&r["results"]["c_ub"]) - 7.98).abs() < 0.02, "{}", r["results"]);
    assert_eq!(r["config"]["deviations"], serde_json::json!(["L"]));
    let both = run_ok(&["paper-example", "6"], dir.path());
    let bounds = both["results"]["bounds"].as_array().unwrap();
    assert!((f(&bounds[0]["c_ub"]) - 11.86).abs() < 0.02);
    assert!((f(&bounds[1]["c_ub"]) - 7.98).abs() < 0.02);
}

#[test]
fn unknown_experiment_lists_valid_names() {
    let (code, err) = run_err(&["warp-drive"]);
    assert_eq!(code, 2);
    assert_eq!(err["key"], "experiment");
    let valid: Vec<&str> = err["valid"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for name in ["geometry-sir", "sir-cdf", "coherent-curve", "linksim", "paper-example"] {
        assert!(valid.contains(&name));
        assert!(err["message"].as_str().unwrap().contains(name));
    }
}

#[test]
fn divergent_path_loss_rejected_from_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.conf");
    fs::write(&cfg, "experiment = geometry-sir\ngamma = 1.5\n").unwrap();
    let (code, err) = run_err(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert_eq!(err["key"], "gamma");
}

#[test]
fn mistyped_and_conflicting_flags_name_the_key() {
    let (code, err) = run_err(&["coherent-curve", "--trials", "lots"]);
    assert_eq!((code, err["key"].as_str()), (2, Some("trials")));
    let (code, err) = run_err(&["coherent-curve", "--L", "100", "--fd", "0.001"]);
    assert_eq!((code, err["key"].as_str()), (2, Some("fd")));
    let (code, err) = run_err(&["paper-example", "8"]);
    assert_eq!((code, err["key"].as_str()), (2, Some("experiment")));
}

#[test]
fn flag_seed_overrides_file_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.conf");
    fs::write(&cfg, "# facing cluster\nexperiment = sir-cdf\nseed = 3\nsamples = 50\n").unwrap();
    let r = run_ok(&["--config", cfg.to_str().unwrap(), "--seed", "7"], dir.path());
    assert_eq!(r["config"]["seed"], 7);
    assert_eq!(r["seeds"]["master"], 7);
    assert_eq!(r["config"]["samples"], 50);
}

#[test]
fn empty_config_gives_reference_geometry() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("empty.conf");
    fs::write(&cfg, "").unwrap();
    let r = run_ok(&["geometry-sir", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(r["config"]["gamma"], 3.8);
    assert_eq!(r["config"]["q_db"], 20.0);
    assert_eq!(r["config"]["cluster"], "facing3");
    assert!((f(&r["results"]["D"]) - 0.157).abs() < 0.002);
    assert_eq!(r["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn replay_is_bit_identical() {
    let first = TempDir::new().unwrap();
    let second = TempDir::new().unwrap();
    let r = run_ok(
        &["noncoherent-mc", "--side", "6", "--trials", "6", "--subsample", "20", "--seed", "99"],
        first.path(),
    );
    let report = first.path().join("noncoherent-mc.json");
    let again = run_ok(&["--replay", report.to_str().unwrap(), "--threads", "2"], second.path());
    assert_eq!(r["results"], again["results"]);
    let mut a = r["config"].clone();
    let mut b = again["config"].clone();
    for c in [&mut a, &mut b] {
        c["out"] = Value::Null;
        c["threads"] = Value::Null;
    }
    assert_eq!(a, b);
    let csv = |d: &Path| fs::read_to_string(d.join("noncoherent-mc-bound.csv")).unwrap();
    assert_eq!(csv(first.path()), csv(second.path()));
}

#[test]
fn every_csv_has_a_named_header() {
    let dir = TempDir::new().unwrap();
    run_ok(&["linksim", "--trials", "4", "--snr-grid", "0:20:10", "--gnuplot"], dir.path());
    run_ok(&["coherent-curve", "--trials", "4", "--snr-grid", "0:30:10", "--cluster", "single"], dir.path());
    run_ok(&["sir-cdf", "--samples", "20"], dir.path());
    run_ok(&["invert-sir"], dir.path());
    run_ok(&["paper-example", "1"], dir.path());
    let mut seen = 0;
    for entry in fs::read_dir(dir.path()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        seen += 1;
        let text = fs::read_to_string(&p).unwrap();
        let mut lines = text.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert!(header.iter().all(|h| h.parse::<f64>().is_err()), "{p:?}: {header:?}");
        assert!(header.iter().any(|h| h.contains("_dB") || h.contains("_symbols") || h.contains("_s")));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), header.len(), "{p:?}");
    }
    assert_eq!(seen, 5);
    assert!(dir.path().join("linksim.gp").exists());
    let rep: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("coherent-curve.json")).unwrap()).unwrap();
    assert_eq!(rep["files"], serde_json::json!(["coherent-curve-curve.csv"]));
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("nested");
    let o = bin()
        .args(["invert-sir", "--c-inf", "2.54"])
        .env("COOP_LIMITS_OUT", &target)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.join("invert-sir.json").exists());
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((f(&r["results"]["inversions"][0]["sir_dB"]) - 9.2).abs() < 0.3);
}
