//! Cost and reward value estimation.

pub mod beta;
pub mod ei_q;
pub mod estimate;
pub mod gae;
pub mod value_fit;

pub use beta::{beta_update, BetaState};
pub use ei_q::{ei_q_update, modified_target, EiQTable, NextValue, StepSchedule};
pub use estimate::{bias_probe, estimate_q_star, BiasRecord, QStarEstimate, RolloutStart};
pub use gae::{gae_advantages, GaeAdvantages};
pub use value_fit::{fit_tabular_values, lambda_returns};
