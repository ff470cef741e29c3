use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureMode, TabularEnv};
use crate::cmdp::{CmdpSpec, Transition};
use crate::error::{MiceError, Result};
use crate::rng::Rng64;

pub const N_CHAIN_ACTIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub n_positions: usize,
    pub n_velocities: usize,
    pub velocity_limit: usize,
    pub reward_per_velocity: f64,
    pub overspeed_cost: f64,
    pub slip_prob: f64,
    pub features: FeatureMode,
    pub horizon: usize,
    pub threshold: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_positions: 10,
            n_velocities: 4,
            velocity_limit: 1,
            reward_per_velocity: 1.0,
            overspeed_cost: 1.0,
            slip_prob: 0.1,
            features: FeatureMode::OneHot,
            horizon: 200,
            threshold: 1.0,
        }
    }
}

/// Straight track of `n_positions` cells. The state is (position, velocity);
/// actions decelerate, hold or accelerate by one level (failing with
/// probability `slip_prob`), then the agent advances by its new velocity.
/// Reaching the last cell ends the episode in an absorbing state. Reward is
/// proportional to the current velocity, cost is charged while the velocity
/// exceeds `velocity_limit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainVelocityWorld {
    pub cfg: ChainConfig,
    pub gamma: f64,
}

impl ChainVelocityWorld {
    pub fn new(cfg: ChainConfig, gamma: f64) -> Result<Self> {
        if cfg.n_positions < 2 || cfg.n_velocities < 2 {
            return Err(MiceError::InvalidArgument("chain needs ≥2 positions and ≥2 velocities".into()));
        }
        if cfg.velocity_limit >= cfg.n_velocities {
            return Err(MiceError::InvalidArgument("velocity limit outside velocity range".into()));
        }
        if !(0.0..=1.0).contains(&cfg.slip_prob) || cfg.overspeed_cost < 0.0 {
            return Err(MiceError::InvalidArgument("invalid slip_prob or overspeed_cost".into()));
        }
        Ok(ChainVelocityWorld { cfg, gamma })
    }

    pub fn terminal_state(&self) -> usize {
        (self.cfg.n_positions - 1) * self.cfg.n_velocities
    }

    pub fn decode(&self, s: usize) -> Option<(usize, usize)> {
        if s >= self.terminal_state() {
            None
        } else {
            Some((s / self.cfg.n_velocities, s % self.cfg.n_velocities))
        }
    }

    fn encode(&self, pos: usize, vel: usize) -> usize {
        if pos >= self.cfg.n_positions - 1 {
            self.terminal_state()
        } else {
            pos * self.cfg.n_velocities + vel
        }
    }

    fn advance(&self, s: usize, dv: i64) -> usize {
        let (pos, vel) = self.decode(s).expect("non-terminal");
        let v = (vel as i64 + dv).clamp(0, self.cfg.n_velocities as i64 - 1) as usize;
        self.encode(pos + v, v)
    }

    fn reward_cost(&self, s: usize) -> (f64, f64) {
        match self.decode(s) {
            None => (0.0, 0.0),
            Some((_, vel)) => (
                self.cfg.reward_per_velocity * vel as f64,
                if vel > self.cfg.velocity_limit { self.cfg.overspeed_cost } else { 0.0 },
            ),
        }
    }
}

impl TabularEnv for ChainVelocityWorld {
    fn n_states(&self) -> usize {
        self.terminal_state() + 1
    }

    fn n_actions(&self) -> usize {
        N_CHAIN_ACTIONS
    }

    fn to_cmdp(&self) -> CmdpSpec {
        let n = self.n_states();
        let term = self.terminal_state();
        let mut p = vec![vec![vec![0.0; n]; N_CHAIN_ACTIONS]; n];
        let mut r = vec![vec![0.0; N_CHAIN_ACTIONS]; n];
        let mut c = vec![vec![0.0; N_CHAIN_ACTIONS]; n];
        for s in 0..n {
            let (rw, cs) = self.reward_cost(s);
            for a in 0..N_CHAIN_ACTIONS {
                r[s][a] = rw;
                c[s][a] = cs;
                if s == term {
                    p[s][a][s] = 1.0;
                    continue;
                }
                let dv = a as i64 - 1;
                p[s][a][self.advance(s, dv)] += 1.0 - self.cfg.slip_prob;
                p[s][a][self.advance(s, 0)] += self.cfg.slip_prob;
            }
        }
        let mut rho = vec![0.0; n];
        rho[0] = 1.0;
        let mut terminal = vec![false; n];
        terminal[term] = true;
        CmdpSpec::new(n, N_CHAIN_ACTIONS, p, r, c, rho, self.gamma, self.cfg.threshold)
            .and_then(|s| s.with_terminal(terminal))
            .expect("chain construction yields a valid CMDP")
    }

    fn state_features(&self, state: usize) -> Vec<f64> {
        match self.cfg.features {
            FeatureMode::OneHot => {
                let mut v = vec![0.0; self.n_states()];
                v[state] = 1.0;
                v
            }
            FeatureMode::Coordinate => match self.decode(state) {
                None => vec![1.0, 0.0, 0.0, 1.0],
                Some((pos, vel)) => vec![
                    pos as f64 / self.cfg.n_positions as f64,
                    vel as f64 / self.cfg.n_velocities as f64,
                    (vel > self.cfg.velocity_limit) as u8 as f64,
                    0.0,
                ],
            },
        }
    }

    fn reset(&self, _rng: &mut Rng64) -> usize {
        0
    }

    fn step(&self, state: usize, action: usize, rng: &mut Rng64) -> Result<Transition> {
        if action >= N_CHAIN_ACTIONS {
            return Err(MiceError::InvalidArgument(format!("invalid action {action}")));
        }
        if state >= self.n_states() {
            return Err(MiceError::InvalidArgument(format!("invalid state {state}")));
        }
        let (reward, cost) = self.reward_cost(state);
        let next_state = if state == self.terminal_state() {
            state
        } else {
            let slipped = rng.random::<f64>() < self.cfg.slip_prob;
            let dv = if slipped { 0 } else { action as i64 - 1 };
            self.advance(state, dv)
        };
        Ok(Transition {
            state,
            action,
            reward,
            extrinsic_cost: cost,
            intrinsic_cost: None,
            next_state,
            terminal: next_state == self.terminal_state(),
        })
    }

    fn horizon(&self) -> usize {
        self.cfg.horizon
    }
}
