use std::collections::VecDeque;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureMode, TabularEnv};
use crate::cmdp::{CmdpSpec, Transition};
use crate::error::{MiceError, Result};
use crate::rng::{child_rng, Rng64};

pub const N_MOVES: usize = 4;
/// (dx, dy) for up, right, down, left.
const MOVES: [(i64, i64); N_MOVES] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub n_hazards: usize,
    pub hazard_cost: f64,
    pub goal_reward: f64,
    pub step_reward: f64,
    pub slip_prob: f64,
    pub features: FeatureMode,
    pub horizon: usize,
    pub threshold: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            width: 8,
            height: 8,
            n_hazards: 8,
            hazard_cost: 1.0,
            goal_reward: 1.0,
            step_reward: 0.0,
            slip_prob: 0.1,
            features: FeatureMode::OneHot,
            horizon: 200,
            threshold: 5.0,
        }
    }
}

/// Continuing goal task: the start is the top-left cell, the goal the
/// bottom-right one. Any action on the goal pays `goal_reward` and returns
/// the agent to the start. Standing on a hazard costs `hazard_cost`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridHazardWorld {
    pub width: usize,
    pub height: usize,
    pub start_cell: usize,
    pub goal_cell: usize,
    pub hazard_cells: Vec<usize>,
    pub hazard_cost: f64,
    pub goal_reward: f64,
    pub step_reward: f64,
    pub slip_prob: f64,
    pub features: FeatureMode,
    pub horizon: usize,
    pub gamma: f64,
    pub threshold: f64,
    #[serde(skip)]
    is_hazard: Vec<bool>,
}

impl GridHazardWorld {
    pub fn new(
        width: usize,
        height: usize,
        goal_cell: usize,
        hazard_cells: Vec<usize>,
        cfg: &GridConfig,
        gamma: f64,
    ) -> Result<Self> {
        let n = width * height;
        if n == 0 {
            return Err(MiceError::InvalidArgument("grid must be non-empty".into()));
        }
        if !(0.0..=1.0).contains(&cfg.slip_prob) {
            return Err(MiceError::InvalidArgument("slip_prob must lie in [0, 1]".into()));
        }
        if cfg.hazard_cost < 0.0 {
            return Err(MiceError::InvalidArgument("hazard_cost must be non-negative".into()));
        }
        if goal_cell >= n || hazard_cells.iter().any(|&h| h >= n) {
            return Err(MiceError::InvalidArgument("cell out of bounds".into()));
        }
        if hazard_cells.contains(&goal_cell) {
            return Err(MiceError::InvalidArgument("goal cell cannot be a hazard".into()));
        }
        let mut is_hazard = vec![false; n];
        for &h in &hazard_cells {
            is_hazard[h] = true;
        }
        let mut hazard_cells = hazard_cells;
        hazard_cells.sort_unstable();
        hazard_cells.dedup();
        Ok(GridHazardWorld {
            width,
            height,
            start_cell: 0,
            goal_cell,
            hazard_cells,
            hazard_cost: cfg.hazard_cost,
            goal_reward: cfg.goal_reward,
            step_reward: cfg.step_reward,
            slip_prob: cfg.slip_prob,
            features: cfg.features,
            horizon: cfg.horizon,
            gamma,
            threshold: cfg.threshold,
            is_hazard,
        })
    }

    /// Random hazard layout for `seed`, avoiding start and goal and keeping a
    /// hazard-free route between them.
    pub fn generate(cfg: &GridConfig, seed: u64, gamma: f64) -> Result<Self> {
        let n = cfg.width * cfg.height;
        if n < 2 {
            return Err(MiceError::InvalidArgument("grid needs at least two cells".into()));
        }
        let goal = n - 1;
        let free: Vec<usize> = (1..goal).collect();
        if cfg.n_hazards > free.len() {
            return Err(MiceError::InvalidArgument(format!(
                "{} hazards do not fit in a {}x{} grid",
                cfg.n_hazards, cfg.width, cfg.height
            )));
        }
        for attempt in 0..10_000u64 {
            let mut rng = child_rng(seed, &[0x68617a, attempt]);
            let hazards: Vec<usize> = sample_indices(&mut rng, free.len(), cfg.n_hazards)
                .into_iter()
                .map(|i| free[i])
                .collect();
            let world = GridHazardWorld::new(cfg.width, cfg.height, goal, hazards, cfg, gamma)?;
            if world.has_safe_route() {
                return Ok(world);
            }
        }
        Err(MiceError::InvalidArgument("no hazard layout with a safe route found".into()))
    }

    pub fn is_hazard(&self, cell: usize) -> bool {
        self.is_hazard[cell]
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    /// Deterministic effect of moving in direction `dir` (walls block).
    pub fn neighbor(&self, cell: usize, dir: usize) -> usize {
        let (x, y) = self.coords(cell);
        let (dx, dy) = MOVES[dir];
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            cell
        } else {
            ny as usize * self.width + nx as usize
        }
    }

    fn has_safe_route(&self) -> bool {
        let mut seen = vec![false; self.width * self.height];
        let mut queue = VecDeque::from([self.start_cell]);
        seen[self.start_cell] = true;
        while let Some(c) = queue.pop_front() {
            if c == self.goal_cell {
                return true;
            }
            for dir in 0..N_MOVES {
                let nb = self.neighbor(c, dir);
                if !seen[nb] && !self.is_hazard[nb] {
                    seen[nb] = true;
                    queue.push_back(nb);
                }
            }
        }
        false
    }

    /// Direction distribution for an intended move: 1 − p on the move,
    /// p/2 on each perpendicular move.
    fn direction_probs(&self, action: usize) -> [(usize, f64); 3] {
        let p = self.slip_prob;
        [
            (action, 1.0 - p),
            ((action + 1) % N_MOVES, p / 2.0),
            ((action + 3) % N_MOVES, p / 2.0),
        ]
    }

    fn reward_at(&self, cell: usize) -> f64 {
        if cell == self.goal_cell {
            self.goal_reward
        } else {
            self.step_reward
        }
    }

    fn cost_at(&self, cell: usize) -> f64 {
        if self.is_hazard[cell] {
            self.hazard_cost
        } else {
            0.0
        }
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= N_MOVES {
            return Err(MiceError::InvalidArgument(format!("invalid action {action}")));
        }
        Ok(())
    }
}

impl TabularEnv for GridHazardWorld {
    fn n_states(&self) -> usize {
        self.width * self.height
    }

    fn n_actions(&self) -> usize {
        N_MOVES
    }

    fn to_cmdp(&self) -> CmdpSpec {
        let n = self.n_states();
        let mut p = vec![vec![vec![0.0; n]; N_MOVES]; n];
        let mut r = vec![vec![0.0; N_MOVES]; n];
        let mut c = vec![vec![0.0; N_MOVES]; n];
        for s in 0..n {
            for a in 0..N_MOVES {
                r[s][a] = self.reward_at(s);
                c[s][a] = self.cost_at(s);
                if s == self.goal_cell {
                    p[s][a][self.start_cell] = 1.0;
                    continue;
                }
                for (dir, prob) in self.direction_probs(a) {
                    if prob > 0.0 {
                        p[s][a][self.neighbor(s, dir)] += prob;
                    }
                }
            }
        }
        let mut rho = vec![0.0; n];
        rho[self.start_cell] = 1.0;
        CmdpSpec::new(n, N_MOVES, p, r, c, rho, self.gamma, self.threshold)
            .expect("grid construction yields a valid CMDP")
    }

    fn state_features(&self, state: usize) -> Vec<f64> {
        match self.features {
            FeatureMode::OneHot => {
                let mut v = vec![0.0; self.n_states()];
                v[state] = 1.0;
                v
            }
            FeatureMode::Coordinate => {
                let (x, y) = self.coords(state);
                let mut v = vec![x as f64 / self.width as f64, y as f64 / self.height as f64];
                for dir in 0..N_MOVES {
                    let nb = self.neighbor(state, dir);
                    v.push((nb != state && self.is_hazard[nb]) as u8 as f64);
                }
                v
            }
        }
    }

    fn reset(&self, _rng: &mut Rng64) -> usize {
        self.start_cell
    }

    fn step(&self, state: usize, action: usize, rng: &mut Rng64) -> Result<Transition> {
        self.check_action(action)?;
        if state >= self.n_states() {
            return Err(MiceError::InvalidArgument(format!("invalid state {state}")));
        }
        let next_state = if state == self.goal_cell {
            self.start_cell
        } else {
            let u: f64 = rng.random();
            let p = self.slip_prob;
            let dir = if u < 1.0 - p {
                action
            } else if u < 1.0 - p / 2.0 {
                (action + 1) % N_MOVES
            } else {
                (action + 3) % N_MOVES
            };
            self.neighbor(state, dir)
        };
        Ok(Transition {
            state,
            action,
            reward: self.reward_at(state),
            extrinsic_cost: self.cost_at(state),
            intrinsic_cost: None,
            next_state,
            terminal: false,
        })
    }

    fn horizon(&self) -> usize {
        self.horizon
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(slip: f64) -> GridConfig {
        GridConfig {
            width: 2,
            height: 2,
            n_hazards: 0,
            slip_prob: slip,
            ..GridConfig::default()
        }
    }

    #[test]
    fn no_slip_is_deterministic() {
        let w = GridHazardWorld::new(2, 2, 3, vec![], &cfg(0.0), 0.99).unwrap();
        let spec = w.to_cmdp();
        for s in 0..4 {
            for a in 0..4 {
                let ones = spec.transition[s][a].iter().filter(|&&p| p == 1.0).count();
                assert_eq!(ones, 1);
            }
        }
    }

    #[test]
    fn slip_rows_sum_to_one() {
        let w = GridHazardWorld::new(2, 2, 3, vec![1], &cfg(0.2), 0.99).unwrap();
        let spec = w.to_cmdp();
        // from cell 0 moving right: 0.8 to cell 1, 0.1 up (wall, stay), 0.1 down to cell 2
        assert!((spec.transition[0][1][1] - 0.8).abs() < 1e-15);
        assert!((spec.transition[0][1][0] - 0.1).abs() < 1e-15);
        assert!((spec.transition[0][1][2] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn hazard_cost_only_on_hazards() {
        let w = GridHazardWorld::new(2, 2, 3, vec![1], &cfg(0.0), 0.99).unwrap();
        let mut rng = crate::rng::rng_from_seed(0);
        assert_eq!(w.step(1, 0, &mut rng).unwrap().extrinsic_cost, 1.0);
        assert_eq!(w.step(0, 1, &mut rng).unwrap().extrinsic_cost, 0.0);
        assert!(w.step(0, 7, &mut rng).is_err());
        assert!(GridHazardWorld::new(2, 2, 3, vec![3], &cfg(0.0), 0.99).is_err());
    }

    #[test]
    fn default_layout_respects_invariants() {
        let c = GridConfig::default();
        for seed in 0..20 {
            let w = GridHazardWorld::generate(&c, seed, 0.99).unwrap();
            assert_eq!(w.hazard_cells.len(), 8);
            assert!(!w.is_hazard(w.goal_cell) && !w.is_hazard(w.start_cell));
        }
        assert_ne!(
            GridHazardWorld::generate(&c, 1, 0.99).unwrap().hazard_cells,
            GridHazardWorld::generate(&c, 2, 0.99).unwrap().hazard_cells
        );
    }

    #[test]
    fn coordinate_features_injective() {
        let c = GridConfig {
            features: FeatureMode::Coordinate,
            ..GridConfig::default()
        };
        let w = GridHazardWorld::generate(&c, 3, 0.99).unwrap();
        let feats: Vec<Vec<f64>> = (0..w.n_states()).map(|s| w.state_features(s)).collect();
        for i in 0..feats.len() {
            for j in 0..i {
                assert_ne!(feats[i], feats[j]);
            }
        }
    }
}
