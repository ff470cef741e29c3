//! Softmax-linear policy and both constrained optimizers.

pub mod batch;
pub mod cg;
pub mod cpo;
pub mod divergence;
pub mod line_search;
pub mod pid;
pub mod softmax;

pub use batch::{fisher_vector_product, surrogate_gradients, surrogate_values, FisherContext, GradientBundle, SurrogateBatch};
pub use cg::{conjugate_gradient, CgResult};
pub use cpo::{cpo_dual_solve, recovery_step, Branch, DualSolution, TrustRegionConfig};
pub use divergence::{kl_and_tv, kl_tv_rows};
pub use line_search::{batch_kl, line_search_apply, LineSearchReport};
pub use pid::{clipped_lagrangian_gradient, pid_lambda_update, pid_step, PidState};
pub use softmax::{action_dist, log_softmax, softmax, FeatureMap, SoftmaxPolicy};
