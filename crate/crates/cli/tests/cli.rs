use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn clcons(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clcons"))
        .args(args)
        .env_remove("CLCONS_JOBS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const WEIERSTRASS: &str = r#"{"kind":"weierstrass","s":0.4,"mode_count":11,"seed":7}"#;
const SMALL_WEIERSTRASS: &str = r#"{"kind":"weierstrass","s":0.4,"mode_count":8,"seed":7}"#;

#[test]
fn burgers_passes_check_system() {
    let out = clcons(&["check-system", "--system", "burgers"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "pass");
    assert_eq!(report["config"]["system"]["name"], "burgers");
    assert!(report["version"].as_str().unwrap().starts_with("clcons "));
}

#[test]
fn euler_gamma0_out_of_range_is_config_error() {
    let out = clcons(&["check-system", "--system", "euler", "--gamma0", "2.5"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("gamma0"));
}

#[test]
fn corrupted_custom_system_reports_worst_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    // Burgers with the companion flux off by a factor
    std::fs::write(
        &path,
        r#"{"name":"bad","n":1,"d":1,"gamma":1.0,"sample_box":[[-2,2]],
            "flux":[[[{"coef":1,"powers":[1]}],[{"coef":0.5,"powers":[2]}]]],
            "companion":[[{"coef":0.5,"powers":[2]}],[{"coef":0.5,"powers":[3]}]],
            "multipliers":[[{"coef":1,"powers":[1]}]]}"#,
    )
    .unwrap();
    let out = clcons(&["check-system", "--system", "custom", "--system-file", s(&path)]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["compatibility"]["max_residual"].as_f64().unwrap() > 1e-3);
    assert!(report["compatibility"]["worst"]["state"].is_array());
    assert!(stderr(&out).contains("compatibility residual"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.json");
    std::fs::write(&path, r#"{"system": {"name": "burgers"}, "temperature": 3}"#).unwrap();
    let out = clcons(&["check-system", "--config", s(&path)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("temperature"));
}

#[test]
fn generate_is_deterministic_and_refuses_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.clf"), dir.path().join("b.clf"));
    for p in [&a, &b] {
        let out = clcons(&["generate", "--generator", SMALL_WEIERSTRASS, "--points", "512", "-o", s(p)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let sidecar = read_json(&dir.path().join("a.clf.json"));
    assert_eq!(sidecar["config"]["generator"]["seed"], 7);

    let again = clcons(&["generate", "--generator", SMALL_WEIERSTRASS, "--points", "512", "-o", s(&a)]);
    assert_eq!(code(&again), 2);
    assert!(stderr(&again).contains("--force"));
    let forced = clcons(&["generate", "--generator", SMALL_WEIERSTRASS, "--points", "512", "-o", s(&a), "--force"]);
    assert_eq!(code(&forced), 0);
}

#[test]
fn interacting_riemann_wrap_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = clcons(&[
        "generate",
        "--generator",
        r#"{"kind":"burgers_riemann","u_left":1,"u_right":-1,"x0":0.5}"#,
        "--points",
        "64,64",
        "--extent",
        "0.9,1",
        "--periodic",
        "false,true",
        "-o",
        s(&dir.path().join("r.clf")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("wave interaction"));
}

#[test]
fn euler_density_floor_is_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = clcons(&[
        "generate",
        "--system",
        "euler",
        "--generator",
        r#"{"kind":"fv_solve","cfl":0.8,"floors":[0.1,null],
            "initial":{"kind":"riemann","left":[1,-3],"right":[1,3],"x0":0.5}}"#,
        "--points",
        "32,128",
        "--extent",
        "0.2,1",
        "--periodic",
        "false,true",
        "-o",
        s(&dir.path().join("e.clf")),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("domain violation at t = "), "{err}");
    assert!(!dir.path().join("e.clf").exists());
}

#[test]
fn constant_field_sweep_is_degenerate() {
    let out = clcons(&[
        "sweep",
        "--system",
        "burgers",
        "--generator",
        r#"{"kind":"fv_solve","cfl":0.9,"initial":{"kind":"constant","state":[0.3]}}"#,
        "--points",
        "64,128",
        "--extent",
        "0.5,1",
        "--periodic",
        "false,true",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    let results = report["results"].as_object().unwrap();
    assert_eq!(results.len(), 6);
    for (name, r) in results {
        if name == "weak_residual" {
            assert!(r["value"].as_f64().unwrap().abs() <= 1e-12);
            continue;
        }
        let rep = &r["report"];
        assert!(rep["degenerate"].is_string(), "{name} not flagged degenerate");
        assert!(rep["fitted_slope"].is_null());
        for pair in rep["pairs"].as_array().unwrap() {
            assert!(pair[1].as_f64().unwrap() <= 1e-12, "{name}: {pair}");
        }
    }
}

#[test]
fn shock_weak_residual_matches_jump_formula() {
    // the companion flux of Burgers is u^3 / 3, so the stationary shock 1 | -1
    // carries the jump 2/3 and the residual is (2/3) int phi(t, 1/2) dt
    let dir = tempfile::tempdir().unwrap();
    let output = dir.path().join("shock.json");
    let out = clcons(&[
        "sweep",
        "--system",
        "burgers",
        "--generator",
        r#"{"kind":"burgers_riemann","u_left":1,"u_right":-1,"x0":0.5}"#,
        "--points",
        "256,256",
        "--extent",
        "0.45,1",
        "--periodic",
        "false,true",
        "--quantity",
        "weak_residual",
        "-o",
        s(&output),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&output);
    let w = &report["results"]["weak_residual"];
    let integral = w["phi_time_integral"].as_f64().unwrap();

    // independent check of the echoed integral: trapezoid rule on the bump
    let (c, r) = (0.225, 0.15);
    let m = 20000;
    let h = 2.0 * r / m as f64;
    let bump = |t: f64| {
        let z: f64 = (t - c) / r;
        if z.abs() < 1.0 {
            (-1.0 / (1.0 - z * z)).exp()
        } else {
            0.0
        }
    };
    // the spatial factor at the bump center
    let phi_x = (-1.0f64).exp();
    let trap: f64 = (1..m).map(|k| bump(c - r + k as f64 * h)).sum::<f64>() * h * phi_x;
    assert!((trap - integral).abs() <= 1e-9 * trap, "{trap} vs {integral}");

    let oracle = 2.0 / 3.0 * trap;
    let value = w["value"].as_f64().unwrap();
    assert!((value - oracle).abs() <= 0.02 * oracle, "{value} vs {oracle}");
}

#[test]
fn weierstrass_commutator_slope() {
    let dir = tempfile::tempdir().unwrap();
    let field = dir.path().join("w.clf");
    let gen = clcons(&["generate", "--generator", WEIERSTRASS, "--points", "2048", "-o", s(&field)]);
    assert_eq!(code(&gen), 0, "{}", stderr(&gen));
    let output = dir.path().join("comm.json");
    let out = clcons(&[
        "sweep",
        "--system",
        "burgers",
        "--input",
        s(&field),
        "--quantity",
        "commutator_norm",
        "--q",
        "1.5",
        "--eps-lo",
        "0.004",
        "--eps-hi",
        "0.0625",
        "-o",
        s(&output),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&output);
    assert_eq!(report["field"]["label"], "scaling-only");
    let slope = report["results"]["commutator_norm"]["report"]["fitted_slope"].as_f64().unwrap();
    assert!(slope >= 0.7, "slope {slope}");

    let csv = std::fs::read_to_string(dir.path().join("comm.commutator_norm.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("epsilon,value,bound,ratio"));
    assert_eq!(lines.count(), report["epsilons"].as_array().unwrap().len());
}

#[test]
fn threshold_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.json");
    std::fs::write(
        &config,
        format!(
            r#"{{"generator": {SMALL_WEIERSTRASS}, "grid": {{"points_per_axis": [1024], "extent_per_axis": [1.0], "periodic_per_axis": [true]}},
                "quantities": ["mollification_error"],
                "thresholds": {{"quantities": {{"mollification_error": {{"slope_min": 1.5}}}}}}}}"#
        ),
    )
    .unwrap();
    let out = clcons(&["sweep", "--config", s(&config)]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["status"], "fail");
    assert!(stderr(&out).contains("slope"));

    // flags win over the file
    let out = clcons(&["sweep", "--config", s(&config), "--quantity", "gradient_norm"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn analyze_single_epsilon_and_margin_check() {
    let grid = ["--points", "64,128", "--extent", "0.5,1", "--periodic", "false,true"];
    let gen = r#"{"kind":"burgers_smooth","amplitude":0.2,"end_time":0.5}"#;
    let mut args = vec!["analyze", "--system", "burgers", "--generator", gen, "--epsilon", "0.05"];
    args.extend(grid);
    let out = clcons(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["epsilons"].as_array().unwrap().len(), 1);
    assert_eq!(report["field"]["label"], "solution");

    args.extend(["--margin", "0.01"]);
    let out = clcons(&args);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("region too small"));
}

#[test]
fn mismatched_components_is_config_error() {
    let out = clcons(&[
        "sweep",
        "--system",
        "euler",
        "--generator",
        SMALL_WEIERSTRASS,
        "--points",
        "256",
        "--quantity",
        "commutator_norm",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("components"));
}
