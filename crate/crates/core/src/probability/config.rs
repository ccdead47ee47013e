use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Binary superposition p1 + p2 - p1*p2.
    #[default]
    Exact,
    /// k-weighted addition; collapse once the sum reaches 1.
    Simplified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub collapse_threshold: f64,
    pub activation_threshold: f64,
    pub decay_epsilon: f64,
    pub mode: Mode,
    pub default_k: f64,
    pub max_hops: Option<u32>,
    /// Alternative interpretations kept per fragment, including the grown one.
    pub branch_limit: usize,
    pub nesting_limit: usize,
    /// Prune fully collapsed instance trees after every settle.
    pub auto_prune: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            collapse_threshold: 0.9,
            activation_threshold: 0.3,
            decay_epsilon: 1e-3,
            mode: Mode::Exact,
            default_k: 1.0,
            max_hops: None,
            branch_limit: 4,
            nesting_limit: 8,
            auto_prune: false,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Parameter(msg.to_owned()));
        if !(self.activation_threshold > 0.0
            && self.activation_threshold < self.collapse_threshold
            && self.collapse_threshold <= 1.0)
        {
            return bad("thresholds must satisfy 0 < activation < collapse <= 1");
        }
        if !(self.default_k > 0.0 && self.default_k <= 1.0) {
            return bad("k must lie in (0,1]");
        }
        if !(self.decay_epsilon >= 0.0) {
            return bad("decay epsilon must be non-negative");
        }
        if self.branch_limit == 0 {
            return bad("branch limit must be at least 1");
        }
        Ok(())
    }

    /// Whether an accumulated value is high enough to collapse.
    pub fn collapse_reached(&self, result: f64) -> bool {
        match self.mode {
            Mode::Exact => result >= self.collapse_threshold,
            Mode::Simplified => result >= 1.0 - 1e-12,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        EngineConfig::default().validate().unwrap();
    }

    #[test]
    fn threshold_order_enforced() {
        let cfg = EngineConfig { activation_threshold: 0.95, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = EngineConfig { collapse_threshold: 1.5, ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = EngineConfig { default_k: 0.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn simplified_collapses_at_one() {
        let cfg = EngineConfig { mode: Mode::Simplified, ..Default::default() };
        assert!(!cfg.collapse_reached(0.95));
        assert!(cfg.collapse_reached(1.0));
        assert!(cfg.collapse_reached(1.5));
    }
}
