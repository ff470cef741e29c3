use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::critic::beta::{DEFAULT_ALPHA, DEFAULT_BETA0};
use crate::envs::{EnvConfig, FeatureMode, GridConfig};
use crate::error::{MiceError, Result};
use crate::memory::{DEFAULT_K, DEFAULT_XI};
use crate::policy::pid::{DEFAULT_ACTOR_LR, DEFAULT_INITIAL_LAMBDA, DEFAULT_KD, DEFAULT_KI, DEFAULT_KP};
use crate::policy::TrustRegionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "mice-cpo")]
    MiceCpo,
    #[serde(rename = "mice-pidlag")]
    MicePidLag,
    #[serde(rename = "cpo")]
    Cpo,
    #[serde(rename = "pidlag")]
    PidLag,
}

impl OptimizerKind {
    pub fn uses_trust_region(&self) -> bool {
        matches!(self, OptimizerKind::MiceCpo | OptimizerKind::Cpo)
    }

    /// Plain variants pin β to zero.
    pub fn is_mice(&self) -> bool {
        matches!(self, OptimizerKind::MiceCpo | OptimizerKind::MicePidLag)
    }

    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::MiceCpo => "mice-cpo",
            OptimizerKind::MicePidLag => "mice-pidlag",
            OptimizerKind::Cpo => "cpo",
            OptimizerKind::PidLag => "pidlag",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemoryConfig {
    pub xi: f64,
    pub k: usize,
    /// Embedding dimension, capped at the feature dimension.
    pub embedding_dim: usize,
    pub capacity: Option<usize>,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        MemoryConfig {
            xi: DEFAULT_XI,
            k: DEFAULT_K,
            embedding_dim: 32,
            capacity: None,
        }
    }
}

/// Source of the per-step intrinsic cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IntrinsicMode {
    Memory,
    /// Ablation: a constant c^I once memory is non-empty.
    Constant { value: f64 },
}

/// Reference value for the critic bias εₙ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasReference {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticConfig {
    pub alpha: f64,
    pub beta0: f64,
    pub adapt_beta: bool,
    pub bias_reference: BiasReference,
    pub mc_rollouts: usize,
}

impl Default for CriticConfig {
    fn default() -> Self {
        CriticConfig {
            alpha: DEFAULT_ALPHA,
            beta0: DEFAULT_BETA0,
            adapt_beta: true,
            bias_reference: BiasReference::Exact,
            mc_rollouts: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PidConfig {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub initial_lambda: f64,
    pub actor_lr: f64,
    /// Optional PPO-style ratio clipping over `epochs` gradient steps.
    pub clip_ratio: Option<f64>,
    pub epochs: usize,
}

impl Default for PidConfig {
    fn default() -> Self {
        PidConfig {
            kp: DEFAULT_KP,
            ki: DEFAULT_KI,
            kd: DEFAULT_KD,
            initial_lambda: DEFAULT_INITIAL_LAMBDA,
            actor_lr: DEFAULT_ACTOR_LR,
            clip_ratio: None,
            epochs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifyConfig {
    pub pairs_lemma1: usize,
    pub pairs_theorem1: usize,
    pub beta: f64,
    /// Extra CMDP files added to the built-in fixtures.
    pub fixtures: Vec<String>,
    pub seed: u64,
    pub theorem2_iterations: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            pairs_lemma1: 20,
            pairs_theorem1: 100,
            beta: 0.5,
            fixtures: Vec::new(),
            seed: 11,
            theorem2_iterations: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceConfig {
    pub updates: usize,
    pub round_len: usize,
    pub exponent: f64,
    pub beta0: f64,
    pub alpha: f64,
    pub xi: f64,
    pub k: usize,
    pub embedding_dim: usize,
    pub seed: u64,
    pub record_every: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        ConvergenceConfig {
            updates: 1_000_000,
            round_len: 1000,
            exponent: 0.7,
            beta0: DEFAULT_BETA0,
            alpha: DEFAULT_ALPHA,
            xi: DEFAULT_XI,
            k: DEFAULT_K,
            embedding_dim: 4,
            seed: 5,
            record_every: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasFigureConfig {
    pub env: GridConfig,
    pub gamma: f64,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub updates_per_iteration: usize,
    pub noise_std: f64,
    /// Constant critic step size.
    pub alpha: f64,
    pub beta0: f64,
    pub beta_alpha: f64,
    pub memory: MemoryConfig,
    pub layout_seed: u64,
}

impl Default for BiasFigureConfig {
    fn default() -> Self {
        BiasFigureConfig {
            env: GridConfig {
                width: 5,
                height: 5,
                n_hazards: 4,
                features: FeatureMode::OneHot,
                ..GridConfig::default()
            },
            gamma: 0.99,
            seeds: (0..6).collect(),
            iterations: 300,
            updates_per_iteration: 2000,
            noise_std: 0.05,
            alpha: 0.1,
            beta0: DEFAULT_BETA0,
            beta_alpha: DEFAULT_ALPHA,
            memory: MemoryConfig {
                embedding_dim: 16,
                ..MemoryConfig::default()
            },
            layout_seed: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub optimizer: OptimizerKind,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    pub batch_episodes: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub trust_region: TrustRegionConfig,
    pub memory: MemoryConfig,
    pub intrinsic: IntrinsicMode,
    pub critic: CriticConfig,
    pub pid: PidConfig,
    pub output_dir: String,
    pub verify: VerifyConfig,
    pub convergence: ConvergenceConfig,
    pub bias: BiasFigureConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvConfig::default(),
            optimizer: OptimizerKind::MiceCpo,
            seeds: (0..6).collect(),
            iterations: 300,
            batch_episodes: 10,
            gamma: 0.99,
            gae_lambda: 0.95,
            trust_region: TrustRegionConfig::default(),
            memory: MemoryConfig::default(),
            intrinsic: IntrinsicMode::Memory,
            critic: CriticConfig::default(),
            pid: PidConfig::default(),
            output_dir: "out".into(),
            verify: VerifyConfig::default(),
            convergence: ConvergenceConfig::default(),
            bias: BiasFigureConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(MiceError::schema("seeds", "must be non-empty"));
        }
        if self.iterations == 0 {
            return Err(MiceError::schema("iterations", "must be at least 1"));
        }
        if self.batch_episodes == 0 {
            return Err(MiceError::schema("batch_episodes", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(MiceError::schema("gamma", "must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(MiceError::schema("gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.trust_region.phi > 0.0) {
            return Err(MiceError::schema("trust_region.phi", "must be positive"));
        }
        if !(self.memory.xi > 0.0) || self.memory.k == 0 || self.memory.embedding_dim == 0 {
            return Err(MiceError::schema("memory", "xi > 0, k ≥ 1, embedding_dim ≥ 1 required"));
        }
        if !(self.critic.alpha > 0.0 && self.critic.alpha <= 1.0) || self.critic.beta0 < 0.0 {
            return Err(MiceError::schema("critic", "alpha in (0, 1] and beta0 ≥ 0 required"));
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| {
            MiceError::schema("<config>", format!("{e} (line {}, column {})", e.line(), e.column()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| MiceError::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_json_str(&cfg.to_json_pretty()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn zero_iterations_rejected() {
        let err = ExperimentConfig::from_json_str(r#"{"iterations": 0}"#).unwrap_err();
        assert_eq!(err.kind(), "schema");
    }

    #[test]
    fn optimizer_names() {
        let cfg = ExperimentConfig::from_json_str(r#"{"optimizer": "pidlag"}"#).unwrap();
        assert_eq!(cfg.optimizer, OptimizerKind::PidLag);
        assert!(!cfg.optimizer.is_mice());
    }
}
