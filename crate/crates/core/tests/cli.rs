use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tilc_aar::config::ScenarioFile;
use tilc_aar::export::read_attempts_csv;

fn default_config() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/default.toml")
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tilc-aar")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, file: &ScenarioFile) -> String {
    let p = dir.join(name);
    std::fs::write(&p, file.to_toml()).unwrap();
    p.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = bin(&["simulate", s(&default_config()), "--attempts", "2", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["campaign.json", "attempts.csv", "trajectories.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("campaign.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["attempts"].as_array().unwrap().len(), 2);
}

#[test]
fn csv_matches_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(
        tilc_aar::cli::run(["tilc-aar", "simulate", s(&default_config()), "--attempts", "3", "--out", s(&out)]),
        0
    );
    let rows = read_attempts_csv(std::fs::File::open(out.join("attempts.csv")).unwrap()).unwrap();
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("campaign.json")).unwrap()).unwrap();
    for (row, a) in rows.iter().zip(json["attempts"].as_array().unwrap()) {
        let e = a["radial_error"].as_f64().unwrap();
        assert!((row.radial_error.unwrap() - e).abs() <= 5e-9 * e.abs());
        assert_eq!(row.success, a["success"].as_bool().unwrap());
        let t = a["terminal_time"].as_f64().unwrap();
        assert!((row.t_terminal.unwrap() - t).abs() <= 5e-9 * t);
    }
}

#[test]
fn invalid_learning_gain_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = ScenarioFile::default_physical();
    file.tilc.k_alpha[0] = 1.0;
    let cfg = write_config(dir.path(), "bad.toml", &file);
    let o = bin(&["simulate", &cfg, "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("tilc") && err.contains("0 <= k_alpha < 1"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn missing_section_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(default_config()).unwrap();
    let start = text.find("[hose]").unwrap();
    let end = start + text[start..].find("\n\n").unwrap();
    let p = dir.path().join("nohose.toml");
    std::fs::write(&p, format!("{}{}", &text[..start], &text[end..])).unwrap();
    let o = bin(&["simulate", s(&p), "--out", s(&dir.path().join("o"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hose"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(bin(&["simulate"]).status.code(), Some(2));
    assert_eq!(bin(&["simulate", s(&default_config()), "--bogus"]).status.code(), Some(2));
    assert_eq!(bin(&["montecarlo", s(&default_config()), "--runs", "0"]).status.code(), Some(2));
    assert_eq!(bin(&["analyze", "/nonexistent.toml"]).status.code(), Some(2));
}

#[test]
fn single_run_montecarlo_equals_campaign() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = default_config();
    assert_eq!(tilc_aar::cli::run(["tilc-aar", "simulate", s(&cfg), "--attempts", "3", "--out", s(&a)]), 0);
    assert_eq!(
        tilc_aar::cli::run(["tilc-aar", "montecarlo", s(&cfg), "--runs", "1", "--attempts", "3", "--out", s(&b)]),
        0
    );
    assert_eq!(std::fs::read(a.join("attempts.csv")).unwrap(), std::fs::read(b.join("attempts.csv")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(b.join("report.json")).unwrap()).unwrap();
    let campaign: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("campaign.json")).unwrap()).unwrap();
    assert_eq!(report["success_rate"], campaign["success_rate"]);
    assert_eq!(report["runs"][0]["first_success"], campaign["first_success"]);
}

#[test]
fn analyze_default_passes() {
    let o = bin(&["analyze", s(&default_config())]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["certificate"]["pass"], true);
    assert!(v["certificate"]["spectral_radius"].as_f64().unwrap() < 1.0);
}

#[test]
fn analyze_positive_m1_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = ScenarioFile::default_physical();
    file.disturbances.m1 = vec![vec![0.2, 0.0, 0.0], vec![0.0, 0.2, 0.0], vec![0.0, 0.0, 0.2]];
    let o = bin(&["analyze", &write_config(dir.path(), "m1.toml", &file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("NotNegativeDefinite"));
}

#[test]
fn analyze_zero_probe_gain_fails() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = ScenarioFile::default_physical();
    file.tilc.k_p[2] = 0.0;
    let o = bin(&["analyze", &write_config(dir.path(), "kp.toml", &file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 < k_p <= 1"));
}

#[test]
fn shipped_scenarios_load() {
    let dir = default_config().parent().unwrap().to_path_buf();
    for f in ["default.toml", "gust.toml", "affine.toml"] {
        tilc_aar::config::load_scenario(&dir.join(f)).unwrap();
    }
}
