use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn lawdon(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lawdon"));
    cmd.args(args).env_remove("LAWDON_THREADS");
    if let Some(n) = threads {
        cmd.env("LAWDON_THREADS", n.to_string());
    }
    cmd.output().expect("failed to run lawdon")
}

fn write_config(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn project_regimes_and_validation() {
    let dir = TempDir::new().unwrap();
    let c = write_config(&dir, "m.json", &json!({"alpha": 0.5, "lambda": 1.0, "h_ex": {"h1": 0.0, "h2": 0.0, "h3": 0.0}}));
    let v = stdout_json(&lawdon(&["project", "-c", s(&c)], None));
    assert_eq!(v["regime"], "Meissner");
    assert_eq!(v["h_star"], json!({"h1": 0.0, "h2": 0.0, "h3": 0.0}));

    // tan θ < λ(1−α)/α and |H_ex| between the two critical magnitudes.
    let c = write_config(&dir, "l.json", &json!({"alpha": 0.5, "lambda": 1.0, "theta": 0.3, "magnitude": 0.7}));
    let v = stdout_json(&lawdon(&["project", "-c", s(&c)], None));
    assert_eq!(v["regime"], "LockIn");
    assert!(v["h_star"]["h3"].as_f64().unwrap().abs() < 1e-12);

    let c = write_config(&dir, "bad.json", &json!({"alpha": 1.5, "lambda": 1.0, "h_ex": {"h1": 0.0, "h2": 0.0, "h3": 1.0}}));
    let o = lawdon(&["project", "-c", s(&c)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));

    let o = lawdon(&["project", "-c", s(&dir.path().join("missing.json"))], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn hc1_table_endpoints_and_determinism() {
    let dir = TempDir::new().unwrap();
    let c = write_config(&dir, "h.json", &json!({"alpha": 0.5, "lambda": 1.0, "theta": {"start": 0.0, "stop": std::f64::consts::FRAC_PI_2, "count": 17}}));
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    assert!(lawdon(&["hc1", "-c", s(&c), "-o", s(&a)], Some(1)).status.success());
    assert!(lawdon(&["hc1", "-c", s(&c), "-o", s(&b)], Some(4)).status.success());
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let rows: Vec<Vec<f64>> = text.lines().skip(1).map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 17);
    assert_eq!(rows[0][1], 0.25);
    assert_eq!(rows[16][1], 0.5);
    for r in &rows {
        assert!((r[2] - r[1]).abs() <= 1e-6 * r[1]);
    }

    let c = write_config(&dir, "e.json", &json!({"alpha": 0.5, "lambda": 1.0, "theta": []}));
    assert_eq!(lawdon(&["hc1", "-c", s(&c)], None).status.code(), Some(2));
}

#[test]
fn phase_diagram_is_thread_count_independent() {
    let dir = TempDir::new().unwrap();
    let c = write_config(
        &dir,
        "p.json",
        &json!({"alpha": 0.3, "lambda": 2.0, "theta": {"start": 0.0, "stop": 1.5, "count": 7}, "magnitude": [0.1, 0.5, 1.0, 2.0]}),
    );
    let one = lawdon(&["phase-diagram", "-c", s(&c)], Some(1));
    let many = lawdon(&["phase-diagram", "-c", s(&c), "--threads", "3"], None);
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
    assert_eq!(String::from_utf8_lossy(&one.stdout).lines().count(), 1 + 7 * 4);
}

fn trial_setup() -> (Value, Value) {
    let (s_, eps): (f64, f64) = (0.25, 0.05);
    let alpha = s_.ln() / eps.ln();
    let le = eps.ln().abs();
    let side = (2.0 * std::f64::consts::PI / le).sqrt();
    let geometry = json!({"n_planes": 2, "m": 30, "kz": 2, "lx": side, "ly": side, "l": 2.0 * s_});
    let params = json!({"epsilon": eps, "lambda": 1.0, "alpha": alpha, "h_ex": {"h1": 0.0, "h2": 0.0, "h3": le}});
    (geometry, params)
}

#[test]
fn minimizer_improves_on_the_trial_state() {
    let dir = TempDir::new().unwrap();
    let (geometry, params) = trial_setup();
    let c = write_config(&dir, "t.json", &json!({"geometry": geometry, "params": params, "target_h": {"h1": 0.0, "h2": 0.0, "h3": 1.0}}));
    let state = dir.path().join("trial.state");
    let t = stdout_json(&lawdon(&["trial", "-c", s(&c), "--state", s(&state)], None));
    assert_eq!(t["degrees"], json!([1, 1]));
    let trial_energy = t["bound"]["energy"]["total"].as_f64().unwrap();

    let c = write_config(
        &dir,
        "m.json",
        &json!({"params": params, "initial_state": state, "options": {"max_iters": 200}}),
    );
    let out_state = dir.path().join("min.state");
    let o = lawdon(&["ld-min", "-c", s(&c), "--state", s(&out_state)], None);
    let code = o.status.code();
    assert!(code == Some(0) || code == Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let e = v["report"]["energy"]["total"].as_f64().unwrap();
    assert!(e <= trial_energy, "{e} > {trial_energy}");
    assert!(out_state.exists());

    // Same run again: identical report.
    let again = lawdon(&["ld-min", "-c", s(&c)], Some(2));
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn ld_min_rejects_inadmissible_fields() {
    let dir = TempDir::new().unwrap();
    let c = write_config(
        &dir,
        "m.json",
        &json!({
            "geometry": {"n_planes": 2, "m": 6, "kz": 1, "lx": 1.0, "ly": 1.0, "l": 1.0},
            "params": {"epsilon": 0.3, "lambda": 1.0, "alpha": 0.5, "h_ex": {"h1": 0.0, "h2": 0.0, "h3": 0.0}},
            "h_bar": {"h1": 0.0, "h2": 0.0, "h3": 1.0}
        }),
    );
    let o = lawdon(&["ld-min", "-c", s(&c)], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Floquet"));
}

#[test]
fn flux_search_reports_every_sector() {
    let dir = TempDir::new().unwrap();
    let c = write_config(
        &dir,
        "m.json",
        &json!({
            "geometry": {"n_planes": 2, "m": 8, "kz": 1, "lx": 1.5, "ly": 1.5, "l": 1.0},
            "params": {"epsilon": 0.3, "lambda": 1.0, "alpha": 0.5, "h_ex": {"h1": 0.0, "h2": 0.0, "h3": 0.0}},
            "options": {"max_iters": 300, "flux_range": [-1, 1]},
            "search": true
        }),
    );
    let v = stdout_json(&lawdon(&["ld-min", "-c", s(&c)], None));
    assert_eq!(v["sectors"].as_array().unwrap().len(), 3);
    assert_eq!(v["best_flux"], json!([0, 0, 0]));
}

#[test]
fn validate_suite_passes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("v.json");
    let o = lawdon(&["validate", "-o", s(&out)], None);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 8);
}
