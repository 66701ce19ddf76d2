use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn deforce(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deforce"))
        .args(args)
        .current_dir(dir)
        .env("DEFORCE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const PARABOLOID: &str = r#"{"profile": {"kind": "paraboloid", "a": 1, "sigma": 10},
    "kernel": {"name": "power_law", "v0": 1, "z0": 1, "p": 3}}"#;

#[test]
fn eval_paraboloid_closed_form() {
    let t = TempDir::new().unwrap();
    write(t.path(), "run.json", PARABOLOID);
    let o = deforce(&["eval", "--config", "run.json", "--out", "out"], t.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(t.path().join("out/result.json"));
    let f0 = r["f0"]["value"].as_f64().unwrap();
    assert!((f0 / (50.0 * std::f64::consts::PI) - 1.0).abs() < 1e-8);
    let m = json(t.path().join("out/manifest.json"));
    assert_eq!(m["command"], "eval");
    assert_eq!(m["config"]["kernel"]["p"], 3.0);
}

#[test]
fn constant_profile_has_zero_f2() {
    let t = TempDir::new().unwrap();
    write(
        t.path(),
        "run.json",
        r#"{"profile": {"kind": "constant", "a": 2, "planform": {"shape": "ball", "radius": 1}},
            "kernel": {"name": "casimir_dirichlet"}}"#,
    );
    let o = deforce(&["eval", "--config", "run.json", "--out", "out"], t.path());
    assert_eq!(code(&o), 0);
    assert_eq!(json(t.path().join("out/result.json"))["f2"]["value"], 0.0);
}

#[test]
fn invalid_configs_exit_2() {
    let t = TempDir::new().unwrap();
    write(
        t.path(),
        "rim.json",
        r#"{"profile": {"kind": "sphere", "a": 0.1, "R": 1, "rho_m": 1.0}, "kernel": {"name": "casimir_dirichlet"}}"#,
    );
    let o = deforce(&["eval", "--config", "rim.json"], t.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho_m < R"));

    write(t.path(), "unknown.json", r#"{"profile": {"kind": "paraboloid", "a": 1, "sigma": 2, "tilt": 1}}"#);
    assert_eq!(code(&deforce(&["eval", "--config", "unknown.json"], t.path())), 2);

    write(t.path(), "ladder.json", r#"{"gamma": {"preset": "dirichlet_sphere", "ladder": [0.001]}}"#);
    assert_eq!(code(&deforce(&["gamma", "--config", "ladder.json"], t.path())), 2);

    assert_eq!(code(&deforce(&["eval", "--config", "missing.json"], t.path())), 2);
    write(t.path(), "run.json", PARABOLOID);
    assert_eq!(code(&deforce(&["eval", "--config", "run.json", "--quad-tol", "0.5"], t.path())), 2);
    assert_eq!(code(&deforce(&["check", "--suite", "nonsense"], t.path())), 2);
}

#[test]
fn numerical_failure_exits_3() {
    let t = TempDir::new().unwrap();
    write(
        t.path(),
        "run.json",
        r#"{"profile": {"kind": "sphere", "a": 1e-4, "R": 1}, "kernel": {"name": "casimir_dirichlet"},
            "quad": {"rel_tol": 1e-13, "max_subdivisions": 2}}"#,
    );
    let o = deforce(&["eval", "--config", "run.json"], t.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gamma_presets() {
    let t = TempDir::new().unwrap();
    let o = deforce(&["gamma", "--preset", "dirichlet_sphere", "--out", "d"], t.path());
    assert_eq!(code(&o), 0);
    let rep = json(t.path().join("d/fit_report.json"));
    assert!((rep["fit"]["gamma"].as_f64().unwrap() - 1.0 / 3.0).abs() < 0.01 / 3.0);
    assert!(rep["rho_m_drift"].as_f64().is_some());
    let csv = fs::read_to_string(t.path().join("d/ratios.csv")).unwrap();
    assert!(csv.starts_with("a_over_R,ratio,ratio_err\n"));
    assert_eq!(csv.lines().count(), 5);

    let o = deforce(&["gamma", "--preset", "neumann_cylinder", "--out", "n"], t.path());
    assert_eq!(code(&o), 0);
    let g = json(t.path().join("n/fit_report.json"))["fit"]["gamma"].as_f64().unwrap();
    let truth = 7.0 / 36.0 - 40.0 / (3.0 * std::f64::consts::PI.powi(2));
    assert!((g / truth - 1.0).abs() < 0.01);
}

#[test]
fn check_suites_and_injected_failure() {
    let t = TempDir::new().unwrap();
    let o = deforce(&["check", "--out", "all"], t.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert_eq!(json(t.path().join("all/check_report.json"))["suites"].as_array().unwrap().len(), 8);

    let o = deforce(&["check", "--suite", "scaling", "--out", "one"], t.path());
    assert_eq!(code(&o), 0);
    let suites = json(t.path().join("one/check_report.json"))["suites"].clone();
    assert_eq!(suites.as_array().unwrap().len(), 1);
    assert_eq!(suites[0]["suite"], "scaling");

    write(
        t.path(),
        "broken.json",
        r#"{"check": {"em_kernel": {"name": "power_law", "v0": -0.01, "z0": 0.0, "p": 3}}}"#,
    );
    let o = deforce(&["check", "--config", "broken.json", "--out", "broken"], t.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("additivity"));
    // the report and manifest are still written
    assert!(t.path().join("broken/manifest.json").exists());
}

#[test]
fn outputs_are_deterministic() {
    let t = TempDir::new().unwrap();
    write(
        t.path(),
        "sweep.json",
        r#"{"kernel": {"name": "casimir_neumann"}, "sweep": {"family": "cylinder", "a_over_r": [0.008, 0.004, 0.002, 0.001]}}"#,
    );
    for out in ["a", "b"] {
        assert_eq!(code(&deforce(&["sweep", "--config", "sweep.json", "--out", out], t.path())), 0);
        assert_eq!(code(&deforce(&["gamma", "--preset", "em_sphere", "--out", &format!("{out}g")], t.path())), 0);
    }
    let read = |p: &str| fs::read(t.path().join(p)).unwrap();
    assert_eq!(read("a/sweep.csv"), read("b/sweep.csv"));
    assert_eq!(read("ag/fit_report.json"), read("bg/fit_report.json"));
    assert_eq!(read("ag/ratios.csv"), read("bg/ratios.csv"));
    let csv = String::from_utf8(read("a/sweep.csv")).unwrap();
    assert!(csv.starts_with("a_over_R,F0,F2,total,err,ratio_to_lead\n"));
    // 17 significant digits
    assert!(csv.lines().nth(1).unwrap().starts_with(&format!("{:.16e},", 0.008)));
}

#[test]
fn manifest_reruns_to_identical_results() {
    let t = TempDir::new().unwrap();
    write(
        t.path(),
        "run.json",
        r#"{"profile": {"kind": "sphere", "a": 0.01, "R": 1}, "kernel": {"name": "casimir_em"}, "eval": {"order": "de2"}}"#,
    );
    assert_eq!(code(&deforce(&["eval", "--config", "run.json", "--rho-m-frac", "0.8", "--out", "first"], t.path())), 0);
    let m = json(t.path().join("first/manifest.json"));
    assert_eq!(m["config"]["profile"]["rho_m"], 0.8);
    assert_eq!(code(&deforce(&["eval", "--config", "first/manifest.json", "--out", "second"], t.path())), 0);
    for f in ["result.json", "rho_m_check.json"] {
        assert_eq!(fs::read(t.path().join("first").join(f)).unwrap(), fs::read(t.path().join("second").join(f)).unwrap());
    }
    let again = json(t.path().join("second/manifest.json"));
    assert_eq!(m["config"], again["config"]);
}

#[test]
fn jacobian_sei_and_compare_run() {
    let t = TempDir::new().unwrap();
    write(
        t.path(),
        "sphere.json",
        r#"{"profile": {"kind": "sphere", "a": 1, "R": 100}, "kernel": {"name": "casimir_dirichlet"}}"#,
    );
    assert_eq!(code(&deforce(&["jacobian", "--config", "sphere.json", "--out", "j"], t.path())), 0);
    let force = json(t.path().join("j/jacobian.json"))["force"].as_f64().unwrap();
    let closed = -std::f64::consts::PI.powi(3) * (100.0 / 720.0 + 1.0 / 1440.0);
    assert!((force / closed - 1.0).abs() < 1e-6);

    assert_eq!(code(&deforce(&["compare", "--config", "sphere.json", "--out", "c"], t.path())), 0);
    let rows = json(t.path().join("c/comparison.json"))["rows"].clone();
    assert!(rows.as_array().unwrap().iter().any(|r| r["method"] == "derjaguin"));

    write(
        t.path(),
        "sei.json",
        r#"{"kernel": {"name": "dilute_scalar", "lambda_r": 2},
            "sei": {"near": {"kind": "sphere", "a": 0.1, "R": 10},
                    "far": {"kind": "constant", "a": 10, "planform": {"shape": "ball", "radius": 9}}}}"#,
    );
    assert_eq!(code(&deforce(&["sei", "--config", "sei.json", "--out", "s"], t.path())), 0);
    assert_eq!(json(t.path().join("s/sei.json"))["agrees"], true);
}

#[test]
fn grid_profiles_load_relative_to_the_config() {
    let t = TempDir::new().unwrap();
    fs::create_dir(t.path().join("cfg")).unwrap();
    let mut csv = String::from("# spacing: 0.5, 0.5\nx1,x2,psi\n");
    for i in 0..9 {
        for j in 0..9 {
            let (x, y) = (-2.0 + 0.5 * i as f64, -2.0 + 0.5 * j as f64);
            csv.push_str(&format!("{x},{y},{}\n", 1.0 + 0.1 * (x * x + y * y)));
        }
    }
    write(&t.path().join("cfg"), "surface.csv", &csv);
    write(
        &t.path().join("cfg"),
        "run.json",
        r#"{"profile": {"kind": "grid", "path": "surface.csv"}, "kernel": {"name": "power_law", "v0": 1, "z0": 0, "p": 3}}"#,
    );
    let o = deforce(&["eval", "--config", "cfg/run.json", "--out", "g"], t.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}
