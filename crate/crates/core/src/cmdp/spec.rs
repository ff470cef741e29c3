use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MiceError, Result};

pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Tabular constrained MDP. `terminal` marks absorbing states that end an
/// episode; they must self-loop with zero reward and cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    #[serde(rename = "P")]
    pub transition: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    pub reward: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub extrinsic_cost: Vec<Vec<f64>>,
    #[serde(rename = "rho")]
    pub initial_dist: Vec<f64>,
    #[serde(rename = "gamma")]
    pub discount: f64,
    #[serde(rename = "d")]
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub terminal: Vec<bool>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCmdp {
    n_states: usize,
    n_actions: usize,
    #[serde(rename = "P")]
    transition: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    reward: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    extrinsic_cost: Vec<Vec<f64>>,
    rho: Vec<f64>,
    gamma: f64,
    d: f64,
    #[serde(default)]
    terminal: Vec<bool>,
}

fn check_len(field: String, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(MiceError::schema(
            field,
            format!("expected length {expected}, got {got}"),
        ));
    }
    Ok(())
}

impl CmdpSpec {
    /// Build and validate.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<Vec<Vec<f64>>>,
        reward: Vec<Vec<f64>>,
        extrinsic_cost: Vec<Vec<f64>>,
        initial_dist: Vec<f64>,
        discount: f64,
        threshold: f64,
    ) -> Result<Self> {
        let spec = CmdpSpec {
            n_states,
            n_actions,
            transition,
            reward,
            extrinsic_cost,
            initial_dist,
            discount,
            threshold,
            terminal: Vec::new(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_terminal(mut self, terminal: Vec<bool>) -> Result<Self> {
        self.terminal = terminal;
        self.validate()?;
        Ok(self)
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal.get(s).copied().unwrap_or(false)
    }

    pub fn validate(&self) -> Result<()> {
        let (ns, na) = (self.n_states, self.n_actions);
        if ns == 0 {
            return Err(MiceError::schema("n_states", "must be positive"));
        }
        if na == 0 {
            return Err(MiceError::schema("n_actions", "must be positive"));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(MiceError::schema(
                "gamma",
                format!("must lie in (0, 1), got {}", self.discount),
            ));
        }
        if !self.threshold.is_finite() {
            return Err(MiceError::schema("d", "must be finite"));
        }
        check_len("P".into(), self.transition.len(), ns)?;
        check_len("R".into(), self.reward.len(), ns)?;
        check_len("C".into(), self.extrinsic_cost.len(), ns)?;
        check_len("rho".into(), self.initial_dist.len(), ns)?;
        if !self.terminal.is_empty() {
            check_len("terminal".into(), self.terminal.len(), ns)?;
        }
        for s in 0..ns {
            check_len(format!("P[{s}]"), self.transition[s].len(), na)?;
            check_len(format!("R[{s}]"), self.reward[s].len(), na)?;
            check_len(format!("C[{s}]"), self.extrinsic_cost[s].len(), na)?;
            for a in 0..na {
                let row = &self.transition[s][a];
                check_len(format!("P[{s}][{a}]"), row.len(), ns)?;
                let mut sum = 0.0;
                for (sp, &p) in row.iter().enumerate() {
                    if !p.is_finite() || p < 0.0 {
                        return Err(MiceError::schema(
                            format!("P[{s}][{a}][{sp}]"),
                            format!("probability must be finite and non-negative, got {p}"),
                        ));
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > STOCHASTIC_TOL {
                    return Err(MiceError::Stochasticity {
                        state: s,
                        action: a,
                        sum,
                    });
                }
                let r = self.reward[s][a];
                if !r.is_finite() {
                    return Err(MiceError::schema(format!("R[{s}][{a}]"), "must be finite"));
                }
                let c = self.extrinsic_cost[s][a];
                if !c.is_finite() {
                    return Err(MiceError::schema(format!("C[{s}][{a}]"), "must be finite"));
                }
                if c < 0.0 {
                    return Err(MiceError::NegativeCost {
                        field: "C",
                        state: s,
                        action: a,
                        value: c,
                    });
                }
                if self.is_terminal(s) && (row[s] != 1.0 || r != 0.0 || c != 0.0) {
                    return Err(MiceError::schema(
                        format!("terminal[{s}]"),
                        "terminal states must self-loop with zero reward and cost",
                    ));
                }
            }
        }
        let mut rho_sum = 0.0;
        for (s, &p) in self.initial_dist.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(MiceError::schema(
                    format!("rho[{s}]"),
                    format!("must be finite and non-negative, got {p}"),
                ));
            }
            rho_sum += p;
        }
        if (rho_sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(MiceError::InvalidDistribution {
                what: "rho".into(),
                sum: rho_sum,
            });
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawCmdp = serde_json::from_str(text).map_err(|e| {
            MiceError::schema(
                "<document>",
                format!("{e} (line {}, column {})", e.line(), e.column()),
            )
        })?;
        let spec = CmdpSpec {
            n_states: raw.n_states,
            n_actions: raw.n_actions,
            transition: raw.transition,
            reward: raw.reward,
            extrinsic_cost: raw.extrinsic_cost,
            initial_dist: raw.rho,
            discount: raw.gamma,
            threshold: raw.d,
            terminal: raw.terminal,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json_string(&self) -> String {
        crate::json::to_string_precise(self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json_string()).map_err(|e| MiceError::io(path, e))
    }

    /// Shape check for any [s][a] table (costs, intrinsic tables, policies).
    pub fn check_table_shape(&self, table: &[Vec<f64>], what: &'static str) -> Result<()> {
        if table.len() != self.n_states {
            return Err(MiceError::Dimension {
                what,
                expected: self.n_states,
                got: table.len(),
            });
        }
        for row in table {
            if row.len() != self.n_actions {
                return Err(MiceError::Dimension {
                    what,
                    expected: self.n_actions,
                    got: row.len(),
                });
            }
        }
        Ok(())
    }
}

pub fn load_cmdp(path: impl AsRef<Path>) -> Result<CmdpSpec> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| MiceError::io(path, e))?;
    CmdpSpec::from_json_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_json(p00: &str) -> String {
        format!(
            r#"{{"n_states":2,"n_actions":1,"P":[[{p00}],[[0.5,0.5]]],"R":[[1.0],[0.0]],"C":[[0.0],[1.0]],"rho":[1.0,0.0],"gamma":0.9,"d":1.0}}"#
        )
    }

    #[test]
    fn loads_two_state_chain() {
        let spec = CmdpSpec::from_json_str(&two_state_json("[0.0,1.0]")).unwrap();
        assert_eq!(spec.n_states, 2);
        assert_eq!(spec.transition[0][0][1], 1.0);
    }

    #[test]
    fn row_sum_error_names_location() {
        let err = CmdpSpec::from_json_str(&two_state_json("[0.0,0.9]")).unwrap_err();
        match err {
            MiceError::Stochasticity { state, action, .. } => assert_eq!((state, action), (0, 0)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn negative_cost_is_distinct() {
        let text = two_state_json("[0.0,1.0]").replace(r#""C":[[0.0],[1.0]]"#, r#""C":[[0.0],[-1.0]]"#);
        let err = CmdpSpec::from_json_str(&text).unwrap_err();
        assert!(matches!(err, MiceError::NegativeCost { state: 1, action: 0, .. }));
    }

    #[test]
    fn shape_error_names_field() {
        let text = two_state_json("[0.0,1.0,0.0]");
        match CmdpSpec::from_json_str(&text).unwrap_err() {
            MiceError::Schema { field, .. } => assert_eq!(field, "P[0][0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_field_is_schema_error() {
        let text = r#"{"n_states":1,"n_actions":1}"#;
        assert_eq!(CmdpSpec::from_json_str(text).unwrap_err().kind(), "schema");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let spec = CmdpSpec::from_json_str(&two_state_json("[0.1,0.9]")).unwrap();
        let back = CmdpSpec::from_json_str(&spec.to_json_string()).unwrap();
        assert_eq!(spec, back);
    }
}
