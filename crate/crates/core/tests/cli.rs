use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tdmosc(dir: &Path, args: &[&str], config: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tdmosc"));
    cmd.current_dir(dir).env_remove("TDMOSC_OUT").args(args);
    if let Some(text) = config {
        let path = dir.join("config.json");
        fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn column(csv: &str, name: &str) -> Vec<f64> {
    let mut lines = csv.lines();
    let idx = lines.next().unwrap().split(',').position(|h| h == name).unwrap();
    lines.map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

#[test]
fn simulate_writes_series_with_constant_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(dir.path(), &["simulate", "--out", "run"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("run");
    for f in [
        "trajectory.csv",
        "packet.csv",
        "mass.json",
        "riccati_manifest.json",
        "riccati_t2.000000.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
    let packet = fs::read_to_string(out.join("packet.csv")).unwrap();
    // b0 = 1, W₀ = 2: λ = 2|b0|²/W₀ = 1.
    for l in column(&packet, "lambda") {
        assert!((l - 1.0).abs() < 1e-12);
    }
    let traj = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("tau,re_u,im_u,re_du,im_du,mass,abel_drift\n"));
    assert_eq!(traj.lines().count(), 10_002);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("riccati_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest.as_array().unwrap().len(), 4);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        r#"{"mass": {"kind": "exponential", "gamma0": 0.5}, "window": [0, 3], "dt": 0.01, "sample_times": [0, 1]}"#;
    for out in ["a", "b"] {
        let o = tdmosc(dir.path(), &["simulate", "--out", out], Some(cfg));
        assert_eq!(o.status.code(), Some(0));
    }
    for f in ["trajectory.csv", "packet.csv", "riccati_t1.000000.csv"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}

#[test]
fn inadmissible_initial_velocity_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(dir.path(), &["simulate", "--out", "x"], Some(r#"{"du0": [0, -1]}"#));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("InadmissibleWronskian"));
}

#[test]
fn growing_mass_warns_and_proceeds() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(
        dir.path(),
        &["simulate", "--out", "x", "--pipeline", "u"],
        Some(r#"{"mass": {"kind": "gaussian_growing", "gamma0": 0.1}, "window": [0, 2], "sample_times": [0, 2]}"#),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("diverges as τ→∞"));
    assert!(!dir.path().join("x/riccati_manifest.json").exists());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for cfg in [
        r#"{"window": [3, 1]}"#,
        r#"{"mass": {"kind": "exponential", "gamma0": -1}}"#,
        "not json",
    ] {
        let o = tdmosc(dir.path(), &["verify"], Some(cfg));
        assert_eq!(o.status.code(), Some(2), "{cfg}");
    }
    let o = tdmosc(dir.path(), &["verify", "--config", "missing.json"], None);
    assert_eq!(o.status.code(), Some(2));
    let o = tdmosc(dir.path(), &["launch"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_without_pde_passes_and_marks_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(dir.path(), &["verify", "--skip", "pde", "--out", "v"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let table = stdout(&o);
    assert_eq!(
        table
            .lines()
            .filter(|l| l.contains(" pde ") && l.ends_with("skipped"))
            .count(),
        3
    );
    assert_eq!(table.matches("PASS").count(), 21);
    let rows: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v/verify.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 24);
}

#[test]
fn tightened_threshold_fails_verify() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(
        dir.path(),
        &["verify", "--skip", "pde", "--out", "v"],
        Some(r#"{"thresholds": {"lambda": 1e-15, "wronskian": 1e-15}}"#),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn expand_is_time_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = format!(
        r#"{{"sample_times": [0, {}, {}]}}"#,
        std::f64::consts::FRAC_PI_2,
        std::f64::consts::PI
    );
    let o = tdmosc(dir.path(), &["expand", "--out", "e"], Some(&cfg));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("e/expand.json")).unwrap()).unwrap();
    assert!(report["cross_time_deviation"].as_f64().unwrap() < 1e-6);
    assert_eq!(report["spectra"].as_array().unwrap().len(), 3);
    let spectrum = fs::read_to_string(dir.path().join("e/spectrum_t3.141593.csv")).unwrap();
    assert!(spectrum.starts_with("n,re_c,im_c,prob,poisson_ref,abs_err\n"));
}

#[test]
fn expand_of_centered_packet_has_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(
        dir.path(),
        &["expand", "--out", "e"],
        Some(r#"{"b0": [0, 0], "sample_times": [0, 3]}"#),
    );
    assert_eq!(o.status.code(), Some(0));
    for f in ["spectrum_t0.000000.csv", "spectrum_t3.000000.csv"] {
        let text = fs::read_to_string(dir.path().join("e").join(f)).unwrap();
        assert_eq!(text.lines().count(), 2);
        let p = column(&text, "prob")[0];
        assert!((p - 1.0).abs() < 1e-12);
    }
}

#[test]
fn expand_with_short_truncation_reports_tail() {
    let dir = tempfile::tempdir().unwrap();
    // λ = 2|b0|²/W₀ = 9 with W₀ = 2.
    let b0 = 3.0f64;
    let cfg = format!(r#"{{"b0": [{b0}, 0], "n_max": 6}}"#);
    let o = tdmosc(dir.path(), &["expand", "--out", "e"], Some(&cfg));
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("TailTooLarge"));
}

#[test]
fn oracle_single_pipeline_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(
        dir.path(),
        &["oracle", "--pipeline", "riccati", "--out", "o"],
        Some(r#"{"pde_window": [0, 2]}"#),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/certification.json")).unwrap()).unwrap();
    let entries = report.as_array().unwrap();
    assert_eq!(entries.len(), 1);
    let e = &entries[0];
    assert_eq!(e["pipeline"], "riccati");
    for key in ["model", "params", "grid", "dt", "snapshots", "max_infidelity"] {
        assert!(e.get(key).is_some(), "{key}");
    }
    assert!(e["max_infidelity"].as_f64().unwrap() < 1e-5);
}

#[test]
fn oracle_small_box_leaks() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(
        dir.path(),
        &["oracle", "--pipeline", "u", "--out", "o"],
        Some(r#"{"b0": [2, 0], "grid": {"x_min": -3, "x_max": 3}}"#),
    );
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("BoundaryLeak") && err.contains("enlarge the box"));
}

#[test]
fn env_var_sets_output_directory_unless_flag_given() {
    let dir = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_tdmosc"))
            .current_dir(dir.path())
            .env("TDMOSC_OUT", "from_env")
            .args(args)
            .output()
            .unwrap()
    };
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"sample_times": [0, 1]}"#).unwrap();
    let cfg = cfg.to_str().unwrap();
    assert_eq!(run(&["expand", "--config", cfg]).status.code(), Some(0));
    assert!(dir.path().join("from_env/expand.json").exists());
    assert_eq!(
        run(&["expand", "--config", cfg, "--out", "from_flag"]).status.code(),
        Some(0)
    );
    assert!(dir.path().join("from_flag/expand.json").exists());
}

#[test]
fn sweep_writes_one_row_per_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(
        dir.path(),
        &["sweep", "--out", "s", "--tol", "1e-10"],
        Some(
            r#"{"mass": {"kind": "gaussian_decaying", "gamma0": 0.1}, "window": [0, 5], "sample_times": [0, 5], "sweep_parameters": [0.05, 0.1, 0.2]}"#,
        ),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(column(&csv, "parameter"), vec![0.05, 0.1, 0.2]);
    for e in column(&csv, "max_lambda_rel_err") {
        assert!(e < 1e-6);
    }
}

#[test]
fn default_verify_passes_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(dir.path(), &["verify", "--out", "v"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 24);
}

#[test]
fn default_oracle_certifies_both_pipelines() {
    let dir = tempfile::tempdir().unwrap();
    let o = tdmosc(dir.path(), &["oracle", "--out", "o"], None);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/certification.json")).unwrap()).unwrap();
    let entries = report.as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for e in entries {
        assert!(e["max_infidelity"].as_f64().unwrap() < 1e-5);
        assert_eq!(e["snapshots"].as_array().unwrap().len(), 11);
    }
}
