//! Enumerable desk-scale analogues of goal-with-hazards and velocity-limit tasks.

pub mod chain;
pub mod grid;

use serde::{Deserialize, Serialize};

pub use chain::{ChainConfig, ChainVelocityWorld};
pub use grid::{GridConfig, GridHazardWorld};

use crate::cmdp::{CmdpSpec, Transition};
use crate::error::Result;
use crate::rng::Rng64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    OneHot,
    Coordinate,
}

pub trait TabularEnv {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn to_cmdp(&self) -> CmdpSpec;
    fn state_features(&self, state: usize) -> Vec<f64>;
    fn reset(&self, rng: &mut Rng64) -> usize;
    fn step(&self, state: usize, action: usize, rng: &mut Rng64) -> Result<Transition>;
    fn horizon(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvConfig {
    Grid(GridConfig),
    Chain(ChainConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::Grid(GridConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Env {
    Grid(GridHazardWorld),
    Chain(ChainVelocityWorld),
}

impl EnvConfig {
    /// Instantiate; `seed` randomizes layout where the env has one.
    pub fn build(&self, seed: u64, gamma: f64) -> Result<Env> {
        Ok(match self {
            EnvConfig::Grid(c) => Env::Grid(GridHazardWorld::generate(c, seed, gamma)?),
            EnvConfig::Chain(c) => Env::Chain(ChainVelocityWorld::new(c.clone(), gamma)?),
        })
    }

    pub fn threshold(&self) -> f64 {
        match self {
            EnvConfig::Grid(c) => c.threshold,
            EnvConfig::Chain(c) => c.threshold,
        }
    }
}

macro_rules! dispatch {
    ($self:ident, $e:ident => $body:expr) => {
        match $self {
            Env::Grid($e) => $body,
            Env::Chain($e) => $body,
        }
    };
}

impl TabularEnv for Env {
    fn n_states(&self) -> usize {
        dispatch!(self, e => e.n_states())
    }
    fn n_actions(&self) -> usize {
        dispatch!(self, e => e.n_actions())
    }
    fn to_cmdp(&self) -> CmdpSpec {
        dispatch!(self, e => e.to_cmdp())
    }
    fn state_features(&self, state: usize) -> Vec<f64> {
        dispatch!(self, e => e.state_features(state))
    }
    fn reset(&self, rng: &mut Rng64) -> usize {
        dispatch!(self, e => e.reset(rng))
    }
    fn step(&self, state: usize, action: usize, rng: &mut Rng64) -> Result<Transition> {
        dispatch!(self, e => e.step(state, action, rng))
    }
    fn horizon(&self) -> usize {
        dispatch!(self, e => e.horizon())
    }
}
