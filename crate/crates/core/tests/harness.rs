use std::fs;
use std::path::Path;
use std::process::Command;

use mice_core::envs::{EnvConfig, GridConfig};
use mice_core::harness::config::IntrinsicMode;
use mice_core::harness::output::{write_bias, write_metrics};
use mice_core::harness::{emit_outputs, train, ExperimentConfig, OptimizerKind};

fn small(optimizer: OptimizerKind) -> ExperimentConfig {
    ExperimentConfig {
        env: EnvConfig::Grid(GridConfig {
            width: 5,
            height: 5,
            n_hazards: 4,
            horizon: 60,
            threshold: 2.0,
            ..GridConfig::default()
        }),
        optimizer,
        seeds: vec![0, 1, 2],
        iterations: 25,
        batch_episodes: 4,
        ..ExperimentConfig::default()
    }
}

fn metrics_bytes(out: &mice_core::harness::TrainOutput, dir: &Path) -> Vec<Vec<u8>> {
    out.runs
        .iter()
        .map(|r| {
            let p = dir.join(format!("m{}.csv", r.seed));
            write_metrics(&p, &r.metrics).unwrap();
            fs::read(p).unwrap()
        })
        .collect()
}

#[test]
fn zero_beta_mice_reduces_to_plain_cpo() {
    let mut mice = small(OptimizerKind::MiceCpo);
    mice.critic.beta0 = 0.0;
    mice.critic.adapt_beta = false;
    let cpo = small(OptimizerKind::Cpo);
    let a = train(&mice, false).unwrap();
    let b = train(&cpo, false).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (da, db) = (dir.path().join("a"), dir.path().join("b"));
    fs::create_dir_all(&da).unwrap();
    fs::create_dir_all(&db).unwrap();
    assert_eq!(metrics_bytes(&a, &da), metrics_bytes(&b, &db));
    for (ra, rb) in a.runs.iter().zip(&b.runs) {
        for (x, y) in ra.metrics.iter().zip(&rb.metrics) {
            assert_eq!(x.j_c_exact.to_bits(), y.j_c_exact.to_bits());
            assert_eq!(x.kl.to_bits(), y.kl.to_bits());
        }
    }
}

#[test]
fn zero_beta_constant_mode_also_reduces() {
    let mut mice = small(OptimizerKind::MicePidLag);
    mice.critic.beta0 = 0.0;
    mice.critic.adapt_beta = false;
    mice.intrinsic = IntrinsicMode::Constant { value: 5.0 };
    let a = train(&mice, false).unwrap();
    let b = train(&small(OptimizerKind::PidLag), false).unwrap();
    for (ra, rb) in a.runs.iter().zip(&b.runs) {
        for (x, y) in ra.metrics.iter().zip(&rb.metrics) {
            assert_eq!(x.j_r_exact.to_bits(), y.j_r_exact.to_bits());
            assert_eq!(x.lambda.to_bits(), y.lambda.to_bits());
        }
    }
}

#[test]
fn zero_iterations_rejected() {
    let text = r#"{"iterations": 0}"#;
    let err = ExperimentConfig::from_json_str(text).unwrap_err();
    assert_eq!(err.kind(), "schema");
}

#[test]
fn emit_is_byte_stable() {
    let cfg = small(OptimizerKind::MiceCpo);
    let dir = tempfile::tempdir().unwrap();
    let mut listings = Vec::new();
    for name in ["x", "y"] {
        let out = train(&cfg, false).unwrap();
        let paths = emit_outputs(Some(&out), &[], &[], &dir.path().join(name)).unwrap();
        let files: Vec<(String, Vec<u8>)> = paths
            .iter()
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).unwrap()))
            .collect();
        listings.push(files);
    }
    assert_eq!(listings[0], listings[1]);
    let svgs = listings[0].iter().filter(|(n, _)| n.ends_with(".svg")).count();
    assert_eq!(svgs, 6);
    let metrics = listings[0].iter().filter(|(n, _)| n.starts_with("metrics_")).count();
    assert_eq!(metrics, 3);
}

#[test]
fn empty_tables_have_headers() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bias.csv");
    write_bias(&p, &[]).unwrap();
    assert_eq!(fs::read_to_string(&p).unwrap().trim(), "variant,seed,iteration,state,estimated,true,bias");
    let p = dir.path().join("metrics.csv");
    write_metrics(&p, &[]).unwrap();
    assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 1);
}

#[test]
fn metrics_include_violation_flag() {
    let out = train(&small(OptimizerKind::Cpo), false).unwrap();
    for run in &out.runs {
        assert_eq!(run.metrics.len(), 25);
        for m in &run.metrics {
            assert_eq!(m.violation, m.j_c_exact > out.threshold);
        }
    }
}

fn mice() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mice"))
}

#[test]
fn cli_missing_config_is_machine_readable() {
    let out = mice().args(["train", "--config", "/nonexistent/cfg.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(rec["error"], "io");
    assert!(rec["message"].as_str().unwrap().contains("/nonexistent/cfg.json"));
}

#[test]
fn cli_bad_cmdp_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let cmdp = dir.path().join("bad.json");
    fs::write(&cmdp, r#"{"n_states":1,"n_actions":1,"P":[[[0.5]]],"R":[[0]],"C":[[0]],"rho":[1],"gamma":0.9,"d":1}"#).unwrap();
    let pol = dir.path().join("pi.json");
    fs::write(&pol, "[[1.0]]").unwrap();
    let out = mice()
        .args(["oracle", "--cmdp", cmdp.to_str().unwrap(), "--policy", pol.to_str().unwrap()])
        .output()
        .unwrap();
    assert_ne!(out.status.code(), Some(0));
    let rec: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(rec["error"], "stochasticity");
}

#[test]
fn cli_oracle_and_defaults() {
    let fixture = format!("{}/fixtures/two_state.json", env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let pol = dir.path().join("pi.json");
    fs::write(&pol, "[[0.5, 0.5], [0.5, 0.5]]").unwrap();
    let out = mice().args(["oracle", "--cmdp", &fixture, "--policy", pol.to_str().unwrap()]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["j_c"].as_f64().unwrap() > 0.0);

    let out = mice().arg("--print-defaults").output().unwrap();
    assert!(out.status.success());
    let cfg = ExperimentConfig::from_json_str(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, ExperimentConfig::default());

    let out = mice().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
