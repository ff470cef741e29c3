//! Tabular CMDP data model, sampling and exact oracles.

pub mod exact;
pub mod policy;
pub mod sample;
pub mod spec;

pub use exact::{
    exact_eval_with_cost, exact_policy_eval, optimal_min_cost_q, optimal_min_q_with_cost,
    visitation, ExactValues,
};
pub use policy::TabularPolicy;
pub use sample::{
    discounted_cost_return, sample_trajectory, truncation_bound, Trajectory, Transition,
    DEFAULT_HORIZON,
};
pub use spec::{load_cmdp, CmdpSpec};
