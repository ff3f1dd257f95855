//! Loopy belief propagation (max-product and sum-product) and an exhaustive
//! enumeration oracle for small graphs.

mod bp;
mod exact;

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FactorGraph, VariableId};
use crate::scalar::Scalar;

pub use crate::graph::Assignment;
pub use bp::{max_product, sum_product, BeliefPropagation, BpMode, BpOutcome};
pub use exact::{brute_force_map, brute_force_marginals, log_partition, BRUTE_FORCE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// All messages computed from the previous sweep's messages.
    Synchronous,
    /// Factors updated one at a time in graph order, each seeing the latest messages.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BpConfig {
    pub max_iterations: usize,
    /// Weight of the previous message in each update, in `[0, 1)`.
    pub damping: f64,
    /// Convergence threshold on the largest log-message change in a sweep.
    pub tolerance: f64,
    pub schedule: Schedule,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            max_iterations: 100,
            damping: 0.3,
            tolerance: 1e-6,
            schedule: Schedule::Sequential,
        }
    }
}

impl BpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Invariant(format!("damping {} outside [0, 1)", self.damping)));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::Invariant("tolerance and max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Relative tolerance under which two log-scores count as a tie. Ties decode
/// to state 0 (`-1` for emotions, `0` for influence).
pub(crate) fn is_tie<S: Scalar>(a: S, b: S) -> bool {
    let tol = S::of(1e-9).max(S::epsilon() * S::of(64.0));
    let scale = S::one().max(a.abs()).max(b.abs());
    (a - b).abs() <= tol * scale
}

/// Per-variable and per-factor probability tables.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalTable<S> {
    ids: Vec<VariableId>,
    index: HashMap<VariableId, usize>,
    /// `[P(state 0), P(state 1)]` per variable.
    pub variables: Vec<[S; 2]>,
    /// Joint table per factor, indexed like the factor's log table.
    pub factors: Vec<Vec<S>>,
}

impl<S: Scalar> MarginalTable<S> {
    pub(crate) fn new(graph: &FactorGraph<S>, variables: Vec<[S; 2]>, factors: Vec<Vec<S>>) -> Self {
        let ids: Vec<VariableId> = graph.variables().iter().map(|v| v.id).collect();
        let index = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        MarginalTable {
            ids,
            index,
            variables,
            factors,
        }
    }

    pub fn ids(&self) -> &[VariableId] {
        &self.ids
    }

    /// Probability of state 1: `P(y = +1)` or `P(mu = 1)`.
    pub fn probability(&self, id: &VariableId) -> Result<S> {
        let v = self.index.get(id).ok_or_else(|| Error::UnknownVariable(id.to_string()))?;
        Ok(self.variables[*v][1])
    }

    /// `P(state 1)` per variable id, for JSON export.
    pub fn to_probability_map(&self) -> BTreeMap<VariableId, f64> {
        self.ids
            .iter()
            .zip(&self.variables)
            .map(|(id, p)| (*id, p[1].as_f64()))
            .collect()
    }
}

/// Per-category probability consumed by label resolution, or the influence weight.
pub fn predict_probability<S: Scalar>(marginals: &MarginalTable<S>, var: &VariableId) -> Result<S> {
    marginals.probability(var)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_ranges() {
        assert!(BpConfig::default().validate().is_ok());
        assert!(BpConfig { damping: 1.0, ..Default::default() }.validate().is_err());
        assert!(BpConfig { damping: -0.1, ..Default::default() }.validate().is_err());
        assert!(BpConfig { tolerance: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn tie_detection_is_relative() {
        assert!(is_tie(1000.0, 1000.0 + 1e-7));
        assert!(!is_tie(1.0, 1.0 + 1e-6));
        assert!(is_tie(0.0f32, 0.0));
    }
}
