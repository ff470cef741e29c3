//! Python bindings. Configs and CMDPs cross the boundary as JSON text, tables
//! as nested lists; results come back as dicts or JSON strings.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mice_core::cmdp::{exact_policy_eval, CmdpSpec, TabularPolicy};
use mice_core::critic::{beta_update as core_beta_update, BetaState};
use mice_core::harness::{
    convergence_suite, lemma1_suite, run_bias_figure, theorem1_suite, train as core_train, verify_theorem2_run,
    AdvantageBaseline, ConvergenceMode, ExperimentConfig,
};
use mice_core::memory::{kernel as core_kernel, intrinsic_cost_raw as core_ci_raw, FlashbulbMemory, IntrinsicCostConfig};
use mice_core::MiceError;

create_exception!(mice_lab, MiceLabError, PyException, "Raised for any error from the core library.");

fn err(e: MiceError) -> PyErr {
    MiceLabError::new_err(format!("{}: {e}", e.kind()))
}

fn config(text: Option<&str>) -> PyResult<ExperimentConfig> {
    match text {
        Some(t) => ExperimentConfig::from_json_str(t).map_err(err),
        None => Ok(ExperimentConfig::default()),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    mice_core::json::to_string_precise(v)
}

/// Default experiment configuration as pretty JSON.
#[pyfunction]
pub fn default_config() -> String {
    ExperimentConfig::default().to_json_pretty()
}

/// Exact values of a tabular policy on a CMDP given as JSON.
#[pyfunction]
fn oracle<'py>(py: Python<'py>, cmdp_json: &str, policy: Vec<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    let spec = CmdpSpec::from_json_str(cmdp_json).map_err(err)?;
    let pi = TabularPolicy::new(policy).map_err(err)?;
    let ex = exact_policy_eval(&spec, &pi).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("j_r", ex.j_r)?;
    d.set_item("j_c", ex.j_c)?;
    d.set_item("v_r", ex.v_r)?;
    d.set_item("v_c", ex.v_c)?;
    d.set_item("q_c", ex.q_c)?;
    d.set_item("d_pi", ex.d_pi)?;
    Ok(d)
}

/// Run training; returns the per-seed metrics rows as a JSON string.
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn train(py: Python<'_>, config_json: Option<&str>) -> PyResult<String> {
    let cfg = config(config_json)?;
    let out = py.detach(|| core_train(&cfg, false)).map_err(err)?;
    let runs: Vec<_> = out
        .runs
        .iter()
        .map(|r| serde_json::json!({ "seed": r.seed, "failure": r.failure, "metrics": r.metrics }))
        .collect();
    Ok(to_json(&runs))
}

/// Bound checks: which is "lemma1", "thm1" or "thm2".
#[pyfunction]
#[pyo3(signature = (which, config_json=None))]
fn verify<'py>(py: Python<'py>, which: &str, config_json: Option<&str>) -> PyResult<Bound<'py, PyDict>> {
    let cfg = config(config_json)?;
    let reports = py
        .detach(|| match which {
            "lemma1" => lemma1_suite(&cfg.verify),
            "thm1" => theorem1_suite(&cfg.verify, AdvantageBaseline::ExtrinsicIntrinsic),
            "thm2" => {
                let mut c = cfg.clone();
                c.iterations = cfg.verify.theorem2_iterations;
                verify_theorem2_run(&c, cfg.seeds[0]).map(|s| s.checks.into_iter().map(|c| c.report).collect())
            }
            other => Err(MiceError::InvalidArgument(format!("unknown check {other:?}"))),
        })
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("checked", reports.len())?;
    d.set_item("failed", reports.iter().filter(|r| !r.holds).count())?;
    d.set_item("min_slack", reports.iter().map(|r| r.slack).fold(f64::INFINITY, f64::min))?;
    Ok(d)
}

/// Noisy-min bias probe; returns (mean baseline bias, mean MICE bias, MICE wins).
#[pyfunction]
#[pyo3(signature = (config_json=None))]
fn probe_bias(py: Python<'_>, config_json: Option<&str>) -> PyResult<(f64, f64, usize)> {
    let cfg = config(config_json)?;
    let out = py.detach(|| run_bias_figure(&cfg.bias)).map_err(err)?;
    Ok((out.mean_baseline(), out.mean_mice(), out.mice_wins()))
}

/// Tabular critic convergence; mode is "mice", "baseline" or "constant_beta".
/// Returns (final error, min gap to Q*).
#[pyfunction]
#[pyo3(signature = (cmdp_json, mode, config_json=None))]
fn converge(py: Python<'_>, cmdp_json: &str, mode: &str, config_json: Option<&str>) -> PyResult<(f64, f64)> {
    let cfg = config(config_json)?;
    let spec = CmdpSpec::from_json_str(cmdp_json).map_err(err)?;
    let mode = match mode {
        "mice" => ConvergenceMode::Mice,
        "baseline" => ConvergenceMode::Baseline,
        "constant_beta" => ConvergenceMode::ConstantBeta,
        other => return Err(err(MiceError::InvalidArgument(format!("unknown mode {other:?}")))),
    };
    let r = py.detach(|| convergence_suite(&spec, &cfg.convergence, mode)).map_err(err)?;
    Ok((r.final_error, r.min_gap))
}

#[pyfunction]
pub fn kernel(x: Vec<f64>, y: Vec<f64>, xi: f64) -> PyResult<f64> {
    core_kernel(&x, &y, xi).map_err(err)
}

/// Unnormalized intrinsic cost of `query` against stored embeddings.
#[pyfunction]
pub fn intrinsic_cost_raw(memory: Vec<Vec<f64>>, query: Vec<f64>, xi: f64, k: usize) -> PyResult<f64> {
    let mut mem = FlashbulbMemory::empty(query.len());
    mem.embeddings = memory;
    let cfg = IntrinsicCostConfig::new(xi, k).map_err(err)?;
    core_ci_raw(&mem, &query, &cfg).map_err(err)
}

/// One balancing-factor step; returns (beta, n).
#[pyfunction]
pub fn beta_update(beta: f64, n: u64, gamma: f64, alpha: f64, bias: f64, intrinsic_cost: f64) -> PyResult<(f64, u64)> {
    let mut st = BetaState::new(beta, gamma, alpha);
    st.n = n;
    let next = core_beta_update(&st, bias, intrinsic_cost).map_err(err)?;
    Ok((next.beta, next.n))
}

#[pymodule]
fn mice_lab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("MiceLabError", m.py().get_type::<MiceLabError>())?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(probe_bias, m)?)?;
    m.add_function(wrap_pyfunction!(converge, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(intrinsic_cost_raw, m)?)?;
    m.add_function(wrap_pyfunction!(beta_update, m)?)?;
    Ok(())
}
