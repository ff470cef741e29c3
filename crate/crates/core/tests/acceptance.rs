//! Acceptance criteria. Each test prints one PASS/FAIL line with the measured
//! numbers and runtime (visible with `--nocapture`) before asserting.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use mice_core::cmdp::{load_cmdp, CmdpSpec};
use mice_core::harness::config::VerifyConfig;
use mice_core::harness::{
    convergence_suite, lemma1_suite, run_bias_figure, theorem1_suite, train, verify_bias_recursion,
    verify_theorem2_run, AdvantageBaseline, ConvergenceMode, ExperimentConfig, OptimizerKind,
};
use mice_core::policy::cpo::{dual_value, solve_dual_scalars};
use mice_core::policy::{
    action_dist, recovery_step, surrogate_gradients, surrogate_values, FeatureMap, GradientBundle, SoftmaxPolicy,
    SurrogateBatch, TrustRegionConfig,
};
use mice_core::rng::{rng_from_seed, sample_categorical};
use rand::Rng;

fn report(id: u32, name: &str, pass: bool, detail: String, elapsed: Duration) {
    println!(
        "criterion {id} [{name}]: {} | {detail} | {:.2} s",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

fn fixture(name: &str) -> CmdpSpec {
    load_cmdp(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn criterion_1_constraint_identity_exact() {
    let t = Instant::now();
    let cfg = VerifyConfig::default();
    let reports = lemma1_suite(&cfg).unwrap();
    let fixtures: std::collections::BTreeSet<String> =
        reports.iter().map(|r| r.case.split('/').next().unwrap_or("").to_string()).collect();
    let worst = reports.iter().map(|r| (r.lhs - r.rhs).abs()).fold(0.0, f64::max);
    let el = t.elapsed();
    let pass = cfg.pairs_lemma1 >= 20 && fixtures.len() >= 3 && worst <= 1e-9 && el < Duration::from_secs(10);
    report(1, "identity", pass, format!("{} checks over {} fixtures, max |lhs-rhs| {worst:.3e}", reports.len(), fixtures.len()), el);
    assert!(pass);
}

#[test]
fn criterion_2_surrogate_bound_holds() {
    let t = Instant::now();
    let cfg = VerifyConfig::default();
    let reports = theorem1_suite(&cfg, AdvantageBaseline::ExtrinsicIntrinsic).unwrap();
    let min_slack = reports.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
    let el = t.elapsed();
    let pass = cfg.pairs_theorem1 >= 100 && min_slack >= -1e-8 && el < Duration::from_secs(30);
    report(2, "surrogate bound", pass, format!("{} checks, min slack {min_slack:.3e}", reports.len()), el);
    assert!(pass);
}

#[test]
fn criterion_3_update_bound_holds() {
    let t = Instant::now();
    let cfg = ExperimentConfig {
        iterations: 200,
        ..ExperimentConfig::default()
    };
    let s = verify_theorem2_run(&cfg, cfg.seeds[0]).unwrap();
    let min_slack = s.checks.iter().map(|c| c.report.slack).fold(f64::INFINITY, f64::min);
    let el = t.elapsed();
    let pass = !s.checks.is_empty() && s.all_hold() && el < Duration::from_secs(300);
    report(
        3,
        "update bound",
        pass,
        format!(
            "{} feasible updates checked, min slack {min_slack:.3}, {} recovery and {} rejected excluded",
            s.checks.len(),
            s.skipped_recovery,
            s.skipped_rejected
        ),
        el,
    );
    assert!(pass);
}

#[test]
fn criterion_4_critic_convergence() {
    let t = Instant::now();
    let spec = fixture("five_state.json");
    let cfg = ExperimentConfig::default().convergence;
    let mice = convergence_suite(&spec, &cfg, ConvergenceMode::Mice).unwrap();
    let base = convergence_suite(&spec, &cfg, ConvergenceMode::Baseline).unwrap();
    let neg = convergence_suite(&spec, &cfg, ConvergenceMode::ConstantBeta).unwrap();
    let el = t.elapsed();
    let pass = cfg.updates <= 1_000_000
        && mice.final_error < 1e-2
        && base.final_error < 1e-3
        && neg.min_gap > 0.05
        && neg.modified_oracle_error < 1e-2
        && el < Duration::from_secs(120);
    report(
        4,
        "critic convergence",
        pass,
        format!(
            "MICE err {:.2e}, control err {:.2e}, undiscounted gap {:.3} (own fixed point err {:.2e})",
            mice.final_error, base.final_error, neg.min_gap, neg.modified_oracle_error
        ),
        el,
    );
    assert!(pass);
}

#[test]
fn criterion_5_underestimation_corrected() {
    let t = Instant::now();
    let cfg = ExperimentConfig::default().bias;
    let out = run_bias_figure(&cfg).unwrap();
    let el = t.elapsed();
    let pass = cfg.seeds.len() == 6
        && out.mean_baseline() < 0.0
        && out.mice_wins() >= 5
        && el < Duration::from_secs(600);
    report(
        5,
        "underestimation",
        pass,
        format!(
            "baseline mean bias {:.4}, MICE mean bias {:.4}, MICE closer on {}/6 seeds",
            out.mean_baseline(),
            out.mean_mice(),
            out.mice_wins()
        ),
        el,
    );
    assert!(pass);
}

#[test]
fn criterion_6_bias_recursion_replay() {
    let t = Instant::now();
    let mut worst = 0.0_f64;
    let specs = [fixture("two_state.json"), fixture("five_state.json")];
    for (i, spec) in specs.iter().enumerate() {
        for seed in 0..10u64 {
            let mut rng = rng_from_seed(seed + 100 * i as u64);
            let ci: Vec<f64> = (0..spec.n_states).map(|_| rng.random::<f64>() * 2.0).collect();
            let beta = rng.random::<f64>();
            let alpha = 0.05 + 0.5 * rng.random::<f64>();
            worst = worst.max(verify_bias_recursion(spec, &ci, beta, alpha, 200, 100, seed).unwrap());
        }
    }
    let el = t.elapsed();
    let pass = worst <= 1e-10;
    report(6, "bias recursion", pass, format!("20 streams, m up to 100, max error {worst:.3e}"), el);
    assert!(pass);
}

fn optimizer_policy(seed: u64) -> (SoftmaxPolicy, SurrogateBatch) {
    let mut rng = rng_from_seed(seed);
    let rows: Vec<Vec<f64>> = (0..6).map(|_| (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
    let feats = std::sync::Arc::new(FeatureMap::from_dense(&rows).unwrap());
    let theta = (0..12).map(|_| rng.random::<f64>() - 0.5).collect();
    let policy = SoftmaxPolicy::zeros(feats, 4).with_theta(theta).unwrap();
    let mut b = SurrogateBatch {
        states: vec![],
        actions: vec![],
        adv_r: vec![],
        adv_c_ei: vec![],
        logp_old: vec![],
        j_c_hat: 3.0,
        gamma: 0.95,
    };
    for _ in 0..20_000 {
        let s = rng.random_range(0..6);
        let p = action_dist(&policy, s);
        let a = sample_categorical(&mut rng, &p);
        b.states.push(s);
        b.actions.push(a);
        b.adv_r.push(rng.random::<f64>() - 0.5 + 0.2 * a as f64);
        b.adv_c_ei.push(rng.random::<f64>() - 0.5 + 0.1 * s as f64);
        b.logp_old.push(p[a].ln());
    }
    (policy, b)
}

#[test]
fn criterion_7_optimizer_correctness() {
    let t = Instant::now();
    // dual vs 200×200 grid
    let mut rng = rng_from_seed(7);
    let mut worst_gap = f64::NEG_INFINITY;
    let mut instances = 0;
    while instances < 50 {
        let g: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let b: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        let (q, u, v) = (dot(&g, &g), dot(&g, &b), dot(&b, &b));
        let phi = 0.01 + 0.1 * rng.random::<f64>();
        let c = (rng.random::<f64>() - 0.6) * (2.0 * phi * v).sqrt() * 1.5;
        if c > 0.0 && c * c / (2.0 * v) > phi {
            continue;
        }
        instances += 1;
        let ds = solve_dual_scalars(q, u, v, c, phi).unwrap();
        let best = dual_value(ds.lambda, ds.nu, q, u, v, c, phi);
        let (lmax, nmax) = (2.0 * ds.lambda + 1.0, 2.0 * ds.nu + 1.0);
        for i in 1..=200 {
            for j in 0..200 {
                let val = dual_value(lmax * i as f64 / 200.0, nmax * j as f64 / 199.0, q, u, v, c, phi);
                worst_gap = worst_gap.max(val - best);
            }
        }
    }
    // finite differences of the sampled surrogates
    let mut worst_fd = 0.0_f64;
    for seed in 0..3 {
        let (policy, batch) = optimizer_policy(seed);
        let gb = surrogate_gradients(&policy, &batch, 1.0).unwrap();
        let h = 1e-5;
        let (mut num_r, mut num_c, mut den_r, mut den_c) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..policy.dim() {
            let (mut p, mut m) = (policy.theta.clone(), policy.theta.clone());
            p[i] += h;
            m[i] -= h;
            let (rp, cp) = surrogate_values(&p, &policy, &batch, 1.0);
            let (rm, cm) = surrogate_values(&m, &policy, &batch, 1.0);
            let (fr, fc) = ((rp - rm) / (2.0 * h), (cp - cm) / (2.0 * h));
            num_r += (gb.g[i] - fr).powi(2);
            num_c += (gb.g_c_ei[i] - fc).powi(2);
            den_r += fr * fr;
            den_c += fc * fc;
        }
        worst_fd = worst_fd.max((num_r / den_r).sqrt()).max((num_c / den_c).sqrt());
    }
    // recovery saturation under a dense SPD metric
    let mut worst_rec = 0.0_f64;
    for seed in 0..10u64 {
        let mut rng = rng_from_seed(seed + 1000);
        let a: Vec<Vec<f64>> = (0..5).map(|_| (0..5).map(|_| rng.random::<f64>() - 0.5).collect()).collect();
        let h: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| (0..5).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 0.3 } else { 0.0 }).collect())
            .collect();
        let op = |x: &[f64]| -> Vec<f64> { h.iter().map(|r| r.iter().zip(x).map(|(p, q)| p * q).sum()).collect() };
        let bundle = GradientBundle {
            g: vec![0.0; 5],
            g_c_ei: (0..5).map(|_| rng.random::<f64>() - 0.5).collect(),
            c_surplus: 4.0,
            sample_size: 1,
        };
        let cfg = TrustRegionConfig::default();
        let step = recovery_step(&bundle, op, &cfg).unwrap();
        let hs = op(&step);
        let quad = 0.5 * step.iter().zip(&hs).map(|(p, q)| p * q).sum::<f64>();
        worst_rec = worst_rec.max((quad - cfg.phi).abs() / cfg.phi);
    }
    let el = t.elapsed();
    let pass = worst_gap <= 1e-6 && worst_fd <= 1e-4 && worst_rec <= 1e-6;
    report(
        7,
        "optimizer",
        pass,
        format!("grid excess {worst_gap:.3e} over 50 instances, FD rel err {worst_fd:.3e}, recovery rel err {worst_rec:.3e}"),
        el,
    );
    assert!(pass);
}

#[test]
fn criterion_8_safety_direction() {
    let t = Instant::now();
    let base = ExperimentConfig::default();
    let mice = train(&base, false).unwrap();
    let cpo = train(&ExperimentConfig { optimizer: OptimizerKind::Cpo, ..base.clone() }, false).unwrap();
    let count = |o: &mice_core::harness::TrainOutput| -> Vec<usize> {
        o.runs.iter().map(|r| r.metrics.iter().filter(|m| m.violation).count()).collect()
    };
    let final_return = |o: &mice_core::harness::TrainOutput| -> f64 {
        o.runs.iter().map(|r| r.metrics.last().unwrap().j_r_exact).sum::<f64>() / o.runs.len() as f64
    };
    let (vm, vc) = (count(&mice), count(&cpo));
    let wins = vm.iter().zip(&vc).filter(|(m, c)| m <= c).count();
    let (rm, rc) = (final_return(&mice), final_return(&cpo));
    let failures = mice.runs.iter().chain(&cpo.runs).filter(|r| r.failure.is_some()).count();
    let el = t.elapsed();
    let pass = base.seeds.len() == 6
        && base.iterations == 300
        && failures == 0
        && wins >= 5
        && (rm - rc).abs() <= 0.1 * rc.abs()
        && el < Duration::from_secs(1800);
    report(
        8,
        "safety direction",
        pass,
        format!("violations MICE {vm:?} vs CPO {vc:?} ({wins}/6 seeds no worse), final J_R {rm:.4} vs {rc:.4}"),
        el,
    );
    assert!(pass);
}

fn run_cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_mice")).args(args).output().unwrap();
    assert!(out.status.success(), "{:?}: {}", args, String::from_utf8_lossy(&out.stderr));
}

fn csv_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut v: Vec<(PathBuf, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (PathBuf::from(p.file_name().unwrap()), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn criterion_9_determinism() {
    let t = Instant::now();
    let mut cfg = ExperimentConfig {
        seeds: vec![0, 1],
        iterations: 15,
        ..ExperimentConfig::default()
    };
    cfg.verify.pairs_lemma1 = 5;
    cfg.verify.pairs_theorem1 = 5;
    cfg.verify.theorem2_iterations = 10;
    cfg.convergence.updates = 50_000;
    cfg.bias.seeds = vec![0, 1];
    cfg.bias.iterations = 20;
    cfg.bias.updates_per_iteration = 200;
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, cfg.to_json_pretty()).unwrap();
    let c = cfg_path.to_str().unwrap();
    let fixture = format!("{}/fixtures/five_state.json", env!("CARGO_MANIFEST_DIR"));
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("train", vec!["train", "--config", c]),
        ("probe-bias", vec!["probe-bias", "--config", c]),
        ("verify-lemma1", vec!["verify", "--which", "lemma1", "--config", c]),
        ("verify-thm1", vec!["verify", "--which", "thm1", "--config", c]),
        ("verify-thm2", vec!["verify", "--which", "thm2", "--config", c]),
        ("converge", vec!["converge", "--fixture", &fixture, "--config", c]),
    ];
    let mut checked = 0;
    let mut mismatched = Vec::new();
    for (name, args) in &commands {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("{name}_{rep}"));
            let mut a = args.clone();
            let o = out.to_str().unwrap().to_string();
            a.extend(["--out", &o]);
            run_cli(&a);
            outputs.push(csv_files(&out));
        }
        checked += outputs[0].len();
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            mismatched.push(*name);
        }
    }
    let el = t.elapsed();
    let pass = mismatched.is_empty();
    report(
        9,
        "determinism",
        pass,
        format!("{} subcommands, {checked} CSV files byte-identical across reruns, mismatches {mismatched:?}", commands.len()),
        el,
    );
    assert!(pass);
}
