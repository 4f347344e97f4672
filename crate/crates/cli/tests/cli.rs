use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use macrophase_cli::output::timeseries_header;
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_macrophase"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(value).unwrap()).unwrap();
    p
}

fn sg_config(alpha2: f64, times: &[f64]) -> Value {
    json!({
        "scenario": "stern_gerlach",
        "grid": {"n_points": 512, "q_min": -40, "q_max": 40},
        "branches": [{"c_re": alpha2.sqrt()}, {"c_im": (1.0 - alpha2).sqrt()}],
        "coupling_length": 10,
        "times": times,
    })
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn stderr_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.starts_with('{')).unwrap_or_else(|| panic!("no JSON on stderr: {text}"));
    serde_json::from_str(line).unwrap()
}

fn assert_manifest(out_dir: &Path, expect_outputs: &[&str]) -> Value {
    let m: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    let outputs: Vec<PathBuf> = m["outputs"].as_array().unwrap().iter().map(|p| PathBuf::from(p.as_str().unwrap())).collect();
    for p in &outputs {
        assert!(p.exists(), "{} listed but missing", p.display());
    }
    for name in expect_outputs {
        assert!(outputs.iter().any(|p| p.file_name().unwrap() == *name), "{name} not listed");
    }
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    assert!(m["duration_seconds"].as_f64().unwrap() >= 0.0);
    m
}

#[test]
fn sg_at_coupling_time() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sg.json", &sg_config(0.7, &[0.0]));
    let out_dir = dir.path().join("out");
    let out = run(&["run", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));

    let (header, rows) = read_csv(&out_dir.join("timeseries.csv"));
    assert_eq!(header, timeseries_header());
    assert_eq!(rows.len(), 1);
    let get = |name: &str| rows[0][column(&header, name)].parse::<f64>().unwrap();
    assert!((get("re_z") - 1.0).abs() < 1e-12);
    assert!(get("im_z").abs() < 1e-12);
    // Default pair is (down, up): conj(beta) alpha = -i sqrt(0.21).
    assert!((get("phi_rel") + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    assert_eq!(get("post_measurement_rhs"), 0.0);
    assert_eq!(get("sg_tight_rhs"), 0.0);

    let m = assert_manifest(&out_dir, &["timeseries.csv", "bounds.json", "manifest.json"]);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["potential"]["kind"], "none");
    assert_eq!(m["config"]["dt"], Value::Null);
    assert_eq!(m["config"]["branches"][1]["eigenvalue"], -0.5);

    let bounds: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("bounds.json")).unwrap()).unwrap();
    assert_eq!(bounds["pair"], json!([2, 1]));
    assert_eq!(bounds["rows"][0]["bounds"].as_array().unwrap().len(), 10);
}

#[test]
fn free_particle_uncertainty_is_satisfied() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "scenario": "general",
        "grid": {"n_points": 1024, "q_min": -60, "q_max": 60},
        "branches": [
            {"c_re": 0.6, "eigenvalue": 1},
            {"c_im": 0.6, "eigenvalue": 0},
            {"c_re": 0.28f64.sqrt(), "eigenvalue": -1}
        ],
        "coupling_length": 5,
        "times": [0, 0.5, 1, 2, 4],
        "pair": [1, 3]
    });
    let path = write_config(dir.path(), "free.json", &cfg);
    let out_dir = dir.path().join("out");
    let out = run(&["run", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&out_dir.join("timeseries.csv"));
    assert_eq!(rows.len(), 5);
    let verdict = column(&header, "uncertainty_verdict");
    let rhs = column(&header, "uncertainty_rhs");
    let abs_z = column(&header, "abs_z");
    for r in &rows {
        assert_eq!(r[verdict], "satisfied");
        assert!(r[rhs].parse::<f64>().unwrap() <= 0.0);
        assert!((r[abs_z].parse::<f64>().unwrap() - 1.0).abs() < 1e-8);
    }
}

#[test]
fn definite_state_exits_with_violation_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "definite.json", &sg_config(1.0, &[0.0, 1.0]));
    let out_dir = dir.path().join("out");
    let out = run(&["run", path.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["status"], "violation");
    let bounds: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("bounds.json")).unwrap()).unwrap();
    assert_eq!(bounds["definite_state"], true);
    assert_eq!(bounds["definite_state_report"]["report"]["verdict"], "undefined");
    assert!(bounds["definite_state_report"]["interpretation"].as_str().unwrap().contains("definite"));
    assert_eq!(assert_manifest(&out_dir, &["bounds.json"])["status"], "violation");
}

#[test]
fn config_errors_exit_one_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = sg_config(0.5, &[0.0]);
    bad["foo"] = json!(1);
    let path = write_config(dir.path(), "bad.json", &bad);
    let out = run(&["run", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_json(&out);
    assert_eq!(err["kind"], "schema");
    assert!(err["message"].as_str().unwrap().contains("foo"));

    let mut heavy = sg_config(0.5, &[0.0]);
    heavy["branches"][0]["c_re"] = json!(0.9);
    let path = write_config(dir.path(), "heavy.json", &heavy);
    let out = run(&["run", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["kind"], "config");

    let out = run(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["kind"], "read");
}

#[test]
fn sweep_coupling_length() {
    let dir = tempfile::tempdir().unwrap();
    let times = [0.0, 0.5, 1.0];
    let path = write_config(dir.path(), "sg.json", &sg_config(0.5, &times));
    let out_dir = dir.path().join("sweep");
    let out = run(&[
        "sweep",
        path.to_str().unwrap(),
        "--axis",
        "coupling_length:5:15:10",
        "--out",
        out_dir.to_str().unwrap(),
        "--jobs",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&out_dir.join("sweep.csv"));
    assert_eq!(header[0], "coupling_length");
    assert_eq!(&header[1..], &timeseries_header()[..]);
    assert_eq!(rows.len(), 10 * times.len());
    for t in times {
        let n = rows.iter().filter(|r| r[1].parse::<f64>().unwrap() == t).count();
        assert_eq!(n, 10);
    }
    let keys: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!((keys[0], keys[keys.len() - 1]), (5.0, 15.0));
    assert_manifest(&out_dir, &["sweep.csv"]);
}

#[test]
fn sweep_alpha2_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "sg.json", &sg_config(0.5, &[0.0]));
    let out_dir = dir.path().join("a2");
    let out = run(&["sweep", path.to_str().unwrap(), "--axis", "alpha2:0.05:0.95:19", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&out_dir.join("sweep.csv"));
    assert_eq!(rows.len(), 19);
    let obs = column(&header, "observable");
    for r in &rows {
        let a2: f64 = r[0].parse().unwrap();
        let sz: f64 = r[obs].parse().unwrap();
        assert!((sz - (a2 - 0.5)).abs() < 1e-10, "{a2} {sz}");
    }

    for axis in ["scenario:0:1:3", "coupling_length:5:50:1", "nope:0:1:3"] {
        let out = run(&["sweep", path.to_str().unwrap(), "--axis", axis, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(1), "{axis}");
        assert_eq!(stderr_json(&out)["kind"], "usage");
    }
}

#[test]
fn falsify_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run(&["falsify", "--trials", "500", "--seed", "17", "--out", d.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let ra = std::fs::read(a.join("falsifier_report.json")).unwrap();
    let rb = std::fs::read(b.join("falsifier_report.json")).unwrap();
    assert_eq!(ra, rb);
    let doc: Value = serde_json::from_slice(&ra).unwrap();
    assert_eq!(doc["uncertainty"]["violations"], 0);
    assert_eq!(doc["seed"], 17);
    assert_manifest(&a, &["falsifier_report.json"]);

    let out = run(&["falsify", "--trials", "0", "--out", dir.path().join("z").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["kind"], "usage");
}

#[test]
fn version_and_usage() {
    let out = run(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
}
