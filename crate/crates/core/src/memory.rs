//! Flashbulb memory: random-projection embeddings of unsafe states and the
//! KNN kernel pseudo-count used as an intrinsic cost.

use std::fs;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{MiceError, Result};
use crate::rng::{child_rng, rng_from_seed};

pub const DEFAULT_XI: f64 = 1e-3;
pub const DEFAULT_K: usize = 10;
pub const NORMALIZER_FLOOR: f64 = 1e-8;

/// Gaussian projection f: R^n → R^m with entries N(0, 1/m), stored row-major
/// as an n × m matrix so that f(x) = xᵀW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
    pub seed: u64,
}

pub fn make_projection(n: usize, m: usize, seed: u64) -> Result<ProjectionMatrix> {
    if m == 0 || n == 0 {
        return Err(MiceError::InvalidArgument("projection dimensions must be positive".into()));
    }
    if m > n {
        return Err(MiceError::InvalidArgument(format!(
            "embedding dimension {m} exceeds input dimension {n}"
        )));
    }
    let normal = Normal::new(0.0, (1.0 / m as f64).sqrt()).expect("positive std");
    let mut rng = rng_from_seed(seed);
    let entries = (0..n * m).map(|_| normal.sample(&mut rng)).collect();
    Ok(ProjectionMatrix {
        rows: n,
        cols: m,
        entries,
        seed,
    })
}

impl ProjectionMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }
}

pub fn embed(proj: &ProjectionMatrix, features: &[f64]) -> Result<Vec<f64>> {
    if features.len() != proj.rows {
        return Err(MiceError::Dimension {
            what: "state features",
            expected: proj.rows,
            got: features.len(),
        });
    }
    let mut out = vec![0.0; proj.cols];
    for (i, &x) in features.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, w) in out.iter_mut().zip(proj.row(i)) {
            *o += x * w;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlashbulbMemory {
    pub embeddings: Vec<Vec<f64>>,
    pub source_iteration: usize,
    pub capacity: Option<usize>,
    pub dim: usize,
}

impl FlashbulbMemory {
    pub fn empty(dim: usize) -> Self {
        FlashbulbMemory {
            embeddings: Vec::new(),
            source_iteration: 0,
            capacity: None,
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.embeddings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.embeddings.is_empty()
    }
}

/// Replace the memory with the embeddings of `unsafe_states`. When the batch
/// exceeds `capacity`, a seeded uniform subsample is kept in insertion order.
pub fn rebuild_memory(
    unsafe_states: &[Vec<f64>],
    proj: &ProjectionMatrix,
    iteration: usize,
    capacity: Option<usize>,
    seed: u64,
) -> Result<FlashbulbMemory> {
    let chosen: Vec<usize> = match capacity {
        Some(cap) if unsafe_states.len() > cap => {
            let mut rng = child_rng(seed, &[iteration as u64, 0x6d656d]);
            let mut idx = sample_indices(&mut rng, unsafe_states.len(), cap).into_vec();
            idx.sort_unstable();
            idx
        }
        _ => (0..unsafe_states.len()).collect(),
    };
    let embeddings = chosen
        .into_iter()
        .map(|i| embed(proj, &unsafe_states[i]))
        .collect::<Result<Vec<_>>>()?;
    Ok(FlashbulbMemory {
        embeddings,
        source_iteration: iteration,
        capacity,
        dim: proj.cols,
    })
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// K(x, y) = ξ / (‖x − y‖² + ξ).
pub fn kernel(x: &[f64], y: &[f64], xi: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(MiceError::Dimension {
            what: "kernel arguments",
            expected: x.len(),
            got: y.len(),
        });
    }
    Ok(xi / (sq_dist(x, y) + xi))
}

/// Running mean / variance (Welford).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStat {
    pub count: u64,
    pub mean: f64,
    pub m2: f64,
}

impl RunningStat {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicCostConfig {
    pub xi: f64,
    pub k: usize,
    pub normalizer: RunningStat,
}

impl Default for IntrinsicCostConfig {
    fn default() -> Self {
        IntrinsicCostConfig {
            xi: DEFAULT_XI,
            k: DEFAULT_K,
            normalizer: RunningStat::default(),
        }
    }
}

impl IntrinsicCostConfig {
    pub fn new(xi: f64, k: usize) -> Result<Self> {
        if !(xi > 0.0) {
            return Err(MiceError::InvalidArgument("xi must be positive".into()));
        }
        if k == 0 {
            return Err(MiceError::InvalidArgument("k must be at least 1".into()));
        }
        Ok(IntrinsicCostConfig {
            xi,
            k,
            normalizer: RunningStat::default(),
        })
    }

    /// Normalizer denominator without touching the statistics.
    pub fn scale(&self) -> f64 {
        self.normalizer.mean.max(NORMALIZER_FLOOR)
    }
}

/// Indices of the k nearest stored embeddings, ordered by (distance, index).
pub fn nearest_neighbors(mem: &FlashbulbMemory, query: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut d: Vec<(usize, f64)> = mem
        .embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| (i, sq_dist(e, query)))
        .collect();
    let by = |a: &(usize, f64), b: &(usize, f64)| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0));
    if d.len() > k {
        d.select_nth_unstable_by(k - 1, by);
        d.truncate(k);
    }
    d.sort_unstable_by(by);
    d
}

/// c^I = sqrt(Σ_{k nearest} K(f(s), f(s^m_i))), zero for an empty memory.
pub fn intrinsic_cost_raw(mem: &FlashbulbMemory, query: &[f64], cfg: &IntrinsicCostConfig) -> Result<f64> {
    if mem.is_empty() {
        return Ok(0.0);
    }
    if query.len() != mem.dim {
        return Err(MiceError::Dimension {
            what: "embedded query",
            expected: mem.dim,
            got: query.len(),
        });
    }
    let sum: f64 = nearest_neighbors(mem, query, cfg.k)
        .iter()
        .map(|&(_, d2)| cfg.xi / (d2 + cfg.xi))
        .sum();
    Ok(sum.sqrt())
}

/// Raw value divided by the running mean of all raw values seen so far,
/// after folding this one in.
pub fn normalize_intrinsic(raw: f64, cfg: &mut IntrinsicCostConfig) -> f64 {
    cfg.normalizer.push(raw);
    if raw == 0.0 {
        return 0.0;
    }
    raw / cfg.scale()
}

/// Normalized intrinsic cost. Queries against an empty memory return 0
/// without touching the normalizer.
pub fn intrinsic_cost(mem: &FlashbulbMemory, query: &[f64], cfg: &mut IntrinsicCostConfig) -> Result<f64> {
    if mem.is_empty() {
        return Ok(0.0);
    }
    let raw = intrinsic_cost_raw(mem, query, cfg)?;
    Ok(normalize_intrinsic(raw, cfg))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub projection_seed: u64,
    pub input_dim: usize,
    pub embedding_dim: usize,
    pub source_iteration: usize,
    pub embeddings: Vec<Vec<f64>>,
}

impl MemorySnapshot {
    pub fn capture(mem: &FlashbulbMemory, proj: &ProjectionMatrix) -> Self {
        MemorySnapshot {
            projection_seed: proj.seed,
            input_dim: proj.rows,
            embedding_dim: proj.cols,
            source_iteration: mem.source_iteration,
            embeddings: mem.embeddings.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, crate::json::to_string_precise(self)).map_err(|e| MiceError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| MiceError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| MiceError::schema("memory snapshot", e.to_string()))
    }

    /// Rebuild the memory and the projection it was built with.
    pub fn restore(&self) -> Result<(FlashbulbMemory, ProjectionMatrix)> {
        let proj = make_projection(self.input_dim, self.embedding_dim, self.projection_seed)?;
        let mem = FlashbulbMemory {
            embeddings: self.embeddings.clone(),
            source_iteration: self.source_iteration,
            capacity: None,
            dim: self.embedding_dim,
        };
        Ok((mem, proj))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        let x = [0.3, -1.0];
        assert_eq!(kernel(&x, &x, 1e-3).unwrap(), 1.0);
        let xi: f64 = 1e-3;
        let y = [0.3 + xi.sqrt(), -1.0];
        assert!((kernel(&x, &y, xi).unwrap() - 0.5).abs() < 1e-12);
        let z = [0.3 + 3.0 * xi.sqrt(), -1.0];
        assert!((kernel(&x, &z, xi).unwrap() - 0.1).abs() < 1e-12);
        assert!(kernel(&x, &[1.0], xi).is_err());
    }

    #[test]
    fn rejects_expanding_projection() {
        assert!(make_projection(4, 5, 0).is_err());
        let p = make_projection(5, 5, 1).unwrap();
        assert_eq!(p, make_projection(5, 5, 1).unwrap());
        assert_ne!(make_projection(64, 16, 1).unwrap(), make_projection(64, 16, 2).unwrap());
    }

    #[test]
    fn four_copies_give_two() {
        let q = vec![0.5, 0.25];
        let mem = FlashbulbMemory {
            embeddings: vec![q.clone(); 4],
            source_iteration: 0,
            capacity: None,
            dim: 2,
        };
        let cfg = IntrinsicCostConfig::new(1e-3, 4).unwrap();
        assert_eq!(intrinsic_cost_raw(&mem, &q, &cfg).unwrap(), 2.0);
    }

    #[test]
    fn empty_memory_is_zero_and_normalized_first_call_is_one() {
        let mut cfg = IntrinsicCostConfig::default();
        let mem = FlashbulbMemory::empty(3);
        assert_eq!(intrinsic_cost(&mem, &[0.0; 3], &mut cfg).unwrap(), 0.0);
        let mut cfg = IntrinsicCostConfig::default();
        assert_eq!(normalize_intrinsic(0.37, &mut cfg), 1.0);
        assert_eq!(normalize_intrinsic(0.0, &mut cfg), 0.0);
    }

    #[test]
    fn constant_stream_normalizes_to_one() {
        let mut cfg = IntrinsicCostConfig::default();
        let mut last = 0.0;
        for _ in 0..100 {
            last = normalize_intrinsic(2.5, &mut cfg);
        }
        assert!((last - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rebuild_replaces_and_caps() {
        let proj = make_projection(3, 2, 9).unwrap();
        let states: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0, 0.0]).collect();
        let full = rebuild_memory(&states[..3], &proj, 4, None, 1).unwrap();
        assert_eq!(full.len(), 3);
        assert_eq!(full.source_iteration, 4);
        assert_eq!(full.embeddings[1], embed(&proj, &states[1]).unwrap());
        let capped = rebuild_memory(&states, &proj, 5, Some(4), 1).unwrap();
        assert_eq!(capped.len(), 4);
        assert_eq!(capped, rebuild_memory(&states, &proj, 5, Some(4), 1).unwrap());
        let empty = rebuild_memory(&[], &proj, 6, None, 1).unwrap();
        assert!(empty.is_empty());
    }
}
