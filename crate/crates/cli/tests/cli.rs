use std::process::Command;

use kahler_lab::flow::CSV_COLUMNS;
use kahler_lab_cli::config::{EnergyKind, EnergySpec};
use kahler_lab_cli::scenarios::{scenario, NAMES};
use kahler_lab_cli::{commands, CliError, ExperimentConfig};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kahler-lab"))
}

fn small_flow() -> ExperimentConfig {
    let mut cfg = scenario("product_generic").unwrap();
    cfg.model.base_resolution = 16;
    let f = cfg.flow.as_mut().unwrap();
    f.horizon = 1.0;
    f.probes = vec![0.0, 0.5, 1.0];
    f.checkpoint_interval = Some(0.5);
    cfg
}

#[test]
fn every_scenario_round_trips_and_builds() {
    for name in NAMES {
        let cfg = scenario(name).unwrap();
        let text = cfg.to_json();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, cfg, "{name}");
        assert_eq!(back.to_json(), text);
        assert_eq!(back.sha256(), cfg.sha256());
        cfg.model.build().unwrap();
    }
}

#[test]
fn schema_errors_name_the_field() {
    let mut v: serde_json::Value = serde_json::from_str(&scenario("stationary").unwrap().to_json()).unwrap();
    v["model"]["chi"]["scale"] = serde_json::json!("large");
    match ExperimentConfig::parse(&v.to_string()) {
        Err(CliError::Schema { path, .. }) => assert_eq!(path, "model.chi.scale"),
        other => panic!("{other:?}"),
    }
    let mut v: serde_json::Value = serde_json::from_str(&scenario("stationary").unwrap().to_json()).unwrap();
    v["flow"]["stride"] = serde_json::json!(3);
    match ExperimentConfig::parse(&v.to_string()) {
        Err(CliError::Schema { path, message }) => {
            assert_eq!(path, "flow.stride");
            assert!(message.contains("stride"), "{message}");
        }
        other => panic!("{other:?}"),
    }
    let mut v: serde_json::Value = serde_json::from_str(&scenario("stationary").unwrap().to_json()).unwrap();
    v["flow"]["dt"] = serde_json::json!(-1.0);
    assert!(matches!(ExperimentConfig::parse(&v.to_string()), Err(CliError::Schema { path, .. }) if path == "flow.dt"));
}

#[test]
fn schema_violation_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"scenario": "x", "model": {"base_resolution": "many"}}"#).unwrap();
    let out = bin().args(["flow", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.base_resolution"), "{err}");
    let out = bin().args(["flow", "--scenario", "nowhere"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn stationary_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["suite", "--scenario", "stationary", "--out"]).arg(dir.path()).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{text}");
    let verdict: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verdict.json")).unwrap()).unwrap();
    assert_eq!(verdict["suite_version"], "1");
    assert!(verdict["meta"]["config_sha256"].as_str().unwrap().len() == 64);
    for c in verdict["criteria"].as_array().unwrap() {
        assert_eq!(c["status"], "pass", "{c}");
        assert!(c["runtime_s"].is_number());
    }
}

#[test]
fn flow_outputs_carry_metadata_and_columns() {
    let cfg = small_flow();
    let dir = tempfile::tempdir().unwrap();
    let o = commands::flow(&cfg, dir.path()).unwrap();
    assert_eq!(o.final_t, 1.0);
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("# kahler-lab ") && header.ends_with(&format!("config_sha256={}", cfg.sha256())));
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(lines.count(), 3);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["meta"]["config_sha256"], cfg.sha256());
    assert_eq!(summary["records"].as_array().unwrap().len(), 3);
    assert!(dir.path().join("checkpoints/checkpoint_001.json").exists());
}

#[test]
fn flow_distance_to_the_limit_decreases() {
    let mut cfg = scenario("product_generic").unwrap();
    cfg.model.base_resolution = 32;
    let dir = tempfile::tempdir().unwrap();
    let o = commands::flow(&cfg, dir.path()).unwrap();
    let tr = o.trajectory.unwrap();
    let d: Vec<f64> = tr.records.iter().filter(|r| r.t >= 1.0).map(|r| r.c0_dist_to_limit.unwrap()).collect();
    assert!(d.windows(2).all(|w| w[1] < w[0]), "{d:?}");
    assert!(o.convergence.unwrap().rate >= 0.5);
}

#[test]
fn identical_configs_give_identical_bytes() {
    let cfg = small_flow();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    commands::flow(&cfg, a.path()).unwrap();
    commands::flow(&cfg, b.path()).unwrap();
    for name in ["trajectory.csv", "summary.json", "checkpoints/checkpoint_000.json"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn command_line_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["flow", "--scenario", "stationary", "--probes", "0,0.5", "--tol", "1e-11", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn solvers_and_energies_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = scenario("degenerate_chi").unwrap();
    cfg.model.base_resolution = 32;
    let o = commands::solve_ma(&cfg, &dir.path().join("ma")).unwrap();
    assert_eq!(o.method, "continuity");
    assert!(dir.path().join("ma/potential.csv").exists());

    let mut cfg = scenario("stationary").unwrap();
    cfg.model.base_resolution = 8;
    let o = commands::solve_calabi(&cfg, &dir.path().join("calabi")).unwrap();
    assert!(o.report.converged);

    let mut cfg = scenario("mabuchi_adjunction").unwrap();
    cfg.model.base_resolution = 8;
    cfg.model.fiber_resolution = 8;
    let spec = cfg.energy.clone().unwrap();
    cfg.energy = Some(EnergySpec { kind: EnergyKind::Mabuchi, t_list: vec![0.5], theta_scale: 0.3, ..spec });
    let o = commands::energy(&cfg, &dir.path().join("energy")).unwrap();
    assert!((o.report.path_value.unwrap() - o.second_path_value.unwrap()).abs() <= 1e-8);
    assert!(o.residual_mean.unwrap().abs() <= 1e-10);
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("energy/energy.json")).unwrap()).unwrap();
    assert_eq!(json["kind"], "mabuchi");
}
