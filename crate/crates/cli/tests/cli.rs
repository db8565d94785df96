use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn xplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xplab")).args(args).output().expect("spawn xplab")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn spectrum_run_writes_tagged_csv_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = xplab(&["fig2", "--n-k", "9", "--a-values", "0,1", "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let grid = fs::read_to_string(out.join("data/spectrum_grid.csv")).unwrap();
    assert!(grid.starts_with("# schema: xplab/spectrum_grid/v1\n"));
    assert!(out.join("plots/fig2_upper_band.svg").exists());

    let m = manifest(&out);
    assert_eq!(m["pipeline"], "fig2");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["config"]["sweep"]["n_k"], 9);
    let defaults: Vec<&str> = m["defaults_applied"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(defaults.contains(&"model.v"));
    assert!(!defaults.contains(&"sweep.n_k"));
    for f in m["files"].as_array().unwrap() {
        assert!(out.join(f["path"].as_str().unwrap()).exists(), "{f}");
    }
}

#[test]
fn identical_specs_give_identical_data() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = |d: &Path| vec!["fig3-gauge".to_string(), "--no-plots".into(), "-o".into(), s(d).into()];
    let oa = xplab(&args(&a).iter().map(String::as_str).collect::<Vec<_>>());
    let ob = xplab(&[args(&b).iter().map(String::as_str).collect::<Vec<_>>(), vec!["--sequential"]].concat());
    assert!(oa.status.success() && ob.status.success());
    for name in ["gauge_shift", "gauge_fit"] {
        let fa = fs::read(a.join(format!("data/{name}.csv"))).unwrap();
        let fb = fs::read(b.join(format!("data/{name}.csv"))).unwrap();
        assert_eq!(fa, fb, "{name}");
    }
}

#[test]
fn gauge_fit_recovers_field_strengths() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = xplab(&["pme", "--no-plots", "--n-q", "64", "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    let fields = m["results"]["magnetic-field"]["fields"].as_array().unwrap();
    let expected = [-1.589, -2.119, -3.178, -6.356];
    assert_eq!(fields.len(), expected.len());
    for (f, e) in fields.iter().zip(expected) {
        let b = f["b_z"].as_f64().unwrap();
        assert!((b - e).abs() < 2e-3, "{b} vs {e}");
    }
}

#[test]
fn c2_sweep_matches_closed_form() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = xplab(&["c2-sweep", "--no-plots", "--masses", "-8,8", "--n-q", "64", "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("data/c2_sweep.csv")).unwrap();
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let h = rdr.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    let rows: Vec<_> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        let c2: f64 = r[col("c2")].parse().unwrap();
        let closed: f64 = r[col("c2_closed")].parse().unwrap();
        assert!((c2 - closed).abs() / closed.abs() < 1e-3, "{c2} vs {closed}");
        assert!((c2.abs() - 0.470023).abs() < 1e-3);
    }
    let m0: f64 = rows[0][col("c2")].parse().unwrap();
    let m1: f64 = rows[1][col("c2")].parse().unwrap();
    assert!(m0 < 0.0 && m1 > 0.0);
}

#[test]
fn flags_override_the_file() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let cfg = write(&tmp, "c.toml", "pipeline = \"fig2\"\n[sweep]\nn_k = 5\na_values = [0.0]\n");
    let o = xplab(&["run", "-c", s(&cfg), "--n-k", "7", "--no-plots", "-o", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m["config"]["sweep"]["n_k"], 7);
    assert_eq!(m["config"]["sweep"]["a_values"][0], 0.0);
}

#[test]
fn unit_strings_are_converted() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "c.toml", "pipeline = \"fig4-chernform\"\n[model]\nm = \"8 MHz\"\n[grid]\nq_cut = \"0.2 GHz\"\n");
    let o = xplab(&["validate", s(&cfg)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
    let t: toml::Table = body.parse().unwrap();
    assert_eq!(t["model"]["m"].as_float(), Some(8.0));
    assert_eq!(t["grid"]["q_cut"].as_float(), Some(200.0));
    assert!(text.contains("# default: model.v"));
}

#[test]
fn merged_monopoles_are_rejected_before_running() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "c.toml", "pipeline = \"fig4-current\"\n[model]\nlambda = 1.2\n");
    let o = xplab(&["validate", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("monopole_positions") && e.contains("model.lambda"), "{e}");
}

#[test]
fn decoherence_times_are_checked() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = xplab(&[
        "device",
        "--set",
        "device.decoherence.t1=[1,1,1,1]",
        "--set",
        "device.decoherence.t2=[3,3,3,3]",
        "-o",
        s(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("device.decoherence"));
    assert!(!out.exists());
}

#[test]
fn every_violation_is_listed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "c.toml", "pipeline = \"fig2\"\n[sweep]\nn_k = 1\na_values = [2.0]\n");
    let o = xplab(&["validate", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("sweep.n_k") && e.contains("sweep.a_values"), "{e}");
}

#[test]
fn unknown_names_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write(&tmp, "c.toml", "pipeline = \"fig5\"\n");
    let o = xplab(&["run", "-c", s(&cfg)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("unknown pipeline"));

    let cfg = write(&tmp, "d.toml", "pipeline = \"fig2\"\n[model]\nmass = 3.0\n");
    assert_eq!(xplab(&["validate", s(&cfg)]).status.code(), Some(2));

    assert_eq!(xplab(&["fig2", "--bogus"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_quarantines_partial_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let o = xplab(&["fig4-current", "--no-plots", "--n-q", "4", "--n-theta", "4", "-o", s(&out)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(!out.join("manifest.json").exists());
    assert!(!out.join("data").exists());
    let q = out.join("quarantine");
    assert!(q.join("data/gauge_shift.csv").exists());
    let m = manifest(&q);
    assert_eq!(m["status"], "failed");
    assert_eq!(m["error"]["kind"], "numerical");
}
