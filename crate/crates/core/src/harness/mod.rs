//! Experiment wiring: training loop, exact verification suites, the
//! convergence and bias probes, and artifact emission.

pub mod bias_figure;
pub mod config;
pub mod converge;
pub mod output;
pub mod train;
pub mod verify;

pub use bias_figure::{run_bias_figure, BiasFigureOutput, BiasRow, BiasVariant};
pub use config::{ExperimentConfig, OptimizerKind};
pub use converge::{convergence_suite, ConvergenceMode, ConvergenceReport};
pub use output::emit_outputs;
pub use train::{train, train_seed, MetricsRow, SeedRun, TraceRow, TrainOutput, UpdateRecord};
pub use verify::{
    lemma1_suite, theorem1_suite, verify_lemma1, verify_theorem1, verify_theorem2, verify_theorem2_run,
    verify_bias_recursion, AdvantageBaseline, BoundReport, Theorem2Check,
};
