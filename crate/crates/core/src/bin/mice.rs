use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use mice_core::cmdp::{exact_policy_eval, load_cmdp, TabularPolicy};
use mice_core::harness::config::ExperimentConfig;
use mice_core::harness::output::{bias_svg, write_bias, write_bounds, write_convergence};
use mice_core::harness::{
    convergence_suite, emit_outputs, lemma1_suite, run_bias_figure, theorem1_suite, train, verify_theorem2_run,
    AdvantageBaseline, BoundReport, ConvergenceMode,
};
use mice_core::json::to_string_precise_pretty;
use mice_core::MiceError;

/// Exit code when a verified bound or identity fails.
const EXIT_BOUND_VIOLATED: u8 = 3;

#[derive(Parser)]
#[command(name = "mice", about = "Memory-driven intrinsic cost lab for tabular constrained RL")]
struct Cli {
    /// Print the default experiment configuration as JSON and exit.
    #[arg(long)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the training loop for every configured seed.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Noisy-min critic bias probe, baseline against MICE.
    ProbeBias {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact checks of the constraint identity and bounds.
    Verify {
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabular EI Q-learning convergence against value iteration.
    Converge {
        #[arg(long)]
        fixture: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact policy evaluation of a tabular policy.
    Oracle {
        #[arg(long)]
        cmdp: PathBuf,
        #[arg(long)]
        policy: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    Lemma1,
    Thm1,
    Thm2,
}

fn load_config(path: &Option<PathBuf>) -> Result<ExperimentConfig> {
    Ok(match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    })
}

fn out_dir(cli: &Option<PathBuf>, cfg: &ExperimentConfig) -> PathBuf {
    cli.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir))
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).with_context(|| format!("creating {}", p.display()))
}

/// Returns true when every checked bound holds.
fn run(cmd: Command) -> Result<bool> {
    match cmd {
        Command::Train { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(&out, &cfg);
            let res = train(&cfg, false)?;
            emit_outputs(Some(&res), &[], &[], &dir)?;
            let failed: Vec<_> = res.runs.iter().filter_map(|r| r.failure.clone()).collect();
            let summary: Vec<_> = res
                .runs
                .iter()
                .map(|r| {
                    json!({
                        "seed": r.seed,
                        "violations": r.metrics.iter().filter(|m| m.violation).count(),
                        "final_j_r": r.metrics.last().map(|m| m.j_r_exact),
                        "final_j_c": r.metrics.last().map(|m| m.j_c_exact),
                    })
                })
                .collect();
            println!("{}", json!({ "optimizer": cfg.optimizer.name(), "seeds": summary, "failures": failed }));
            Ok(true)
        }
        Command::ProbeBias { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(&out, &cfg);
            ensure_dir(&dir)?;
            let res = run_bias_figure(&cfg.bias)?;
            write_bias(&dir.join("bias.csv"), &res.rows)?;
            std::fs::write(dir.join("bias.svg"), bias_svg(&res.rows))?;
            println!(
                "{}",
                json!({
                    "per_seed": res.per_seed,
                    "mean_baseline": res.mean_baseline(),
                    "mean_mice": res.mean_mice(),
                    "mice_wins": res.mice_wins(),
                })
            );
            Ok(true)
        }
        Command::Verify { which, config, out } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(&out, &cfg);
            ensure_dir(&dir)?;
            let reports: Vec<BoundReport> = match which {
                Which::Lemma1 => lemma1_suite(&cfg.verify)?,
                Which::Thm1 => theorem1_suite(&cfg.verify, AdvantageBaseline::ExtrinsicIntrinsic)?,
                Which::Thm2 => {
                    let mut c = cfg.clone();
                    c.iterations = cfg.verify.theorem2_iterations;
                    let s = verify_theorem2_run(&c, cfg.seeds[0])?;
                    eprintln!(
                        "{}",
                        json!({ "checked": s.checks.len(), "skipped_recovery": s.skipped_recovery, "skipped_rejected": s.skipped_rejected })
                    );
                    s.checks.into_iter().map(|c| c.report).collect()
                }
            };
            write_bounds(&dir.join("bounds.csv"), &reports)?;
            let failed = reports.iter().filter(|r| !r.holds).count();
            let worst = reports.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min);
            println!("{}", json!({ "checked": reports.len(), "failed": failed, "min_slack": worst }));
            Ok(failed == 0)
        }
        Command::Converge { fixture, config, out } => {
            let cfg = load_config(&config)?;
            let dir = out_dir(&out, &cfg);
            ensure_dir(&dir)?;
            let spec = load_cmdp(&fixture)?;
            let mut points = Vec::new();
            let mut summary = Vec::new();
            for mode in [ConvergenceMode::Mice, ConvergenceMode::Baseline, ConvergenceMode::ConstantBeta] {
                let r = convergence_suite(&spec, &cfg.convergence, mode)?;
                summary.push(json!({
                    "mode": mode.name(),
                    "final_error": r.final_error,
                    "min_gap": r.min_gap,
                    "modified_oracle_error": r.modified_oracle_error,
                    "final_beta": r.final_beta,
                }));
                points.extend(r.trajectory);
            }
            write_convergence(&dir.join("convergence.csv"), &points)?;
            println!("{}", json!(summary));
            Ok(true)
        }
        Command::Oracle { cmdp, policy } => {
            let spec = load_cmdp(&cmdp)?;
            let text = std::fs::read_to_string(&policy).map_err(|e| MiceError::io(&policy, e))?;
            let table: Vec<Vec<f64>> = serde_json::from_str(&text)
                .map_err(|e| MiceError::schema("policy", e.to_string()))?;
            let pi = TabularPolicy::new(table)?;
            println!("{}", to_string_precise_pretty(&exact_policy_eval(&spec, &pi)?));
            Ok(true)
        }
    }
}

fn error_record(e: &anyhow::Error) -> serde_json::Value {
    let kind = e.downcast_ref::<MiceError>().map(|m| m.kind()).unwrap_or("internal");
    json!({ "error": kind, "message": format!("{e:#}") })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.print_defaults {
        println!("{}", ExperimentConfig::default().to_json_pretty());
        return ExitCode::SUCCESS;
    }
    let Some(cmd) = cli.command else {
        eprintln!("{}", json!({ "error": "usage", "message": "no subcommand given; see --help" }));
        return ExitCode::from(2);
    };
    match run(cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_BOUND_VIOLATED),
        Err(e) => {
            eprintln!("{}", error_record(&e));
            ExitCode::FAILURE
        }
    }
}
