//! Discretization of continuous action spaces into evenly spaced bins.

use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::envs::EnvSpec;

/// Per-dimension evenly spaced action values over the environment bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    pub dims: usize,
    pub bins: usize,
    /// `values[d][j]` is the continuous action for bin j in dimension d;
    /// strictly increasing, first = low, last = high.
    pub values: Vec<Vec<f64>>,
}

/// One discrete joint action: a bin index per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActionVector(pub Vec<usize>);

impl ActionVector {
    pub fn dims(&self) -> usize {
        self.0.len()
    }

    pub fn validate(&self, grid: &ActionGrid) -> Result<(), AgentError> {
        if self.0.len() != grid.dims {
            return Err(AgentError::ActionDims { expected: grid.dims, got: self.0.len() });
        }
        for (d, &idx) in self.0.iter().enumerate() {
            if idx >= grid.bins {
                return Err(AgentError::BinIndex { dim: d, index: idx, bins: grid.bins });
            }
        }
        Ok(())
    }
}

/// Builds the grid: v[d][j] = low + j * (high - low) / (N - 1).
pub fn discretize(spec: &EnvSpec, n: usize) -> Result<ActionGrid, AgentError> {
    if n < 2 {
        return Err(AgentError::BadBins(n));
    }
    let values = spec
        .action_bounds
        .iter()
        .map(|&(low, high)| {
            (0..n)
                .map(|j| low + j as f64 * (high - low) / (n - 1) as f64)
                .collect()
        })
        .collect();
    Ok(ActionGrid { dims: spec.action_dim, bins: n, values })
}

/// Looks up the continuous action for each bin index.
pub fn to_continuous(action: &ActionVector, grid: &ActionGrid) -> Result<Vec<f64>, AgentError> {
    action.validate(grid)?;
    Ok(action
        .0
        .iter()
        .enumerate()
        .map(|(d, &j)| grid.values[d][j])
        .collect())
}

/// Nearest bin per dimension (for round-trip checks and scripted agents).
pub fn nearest_bin(grid: &ActionGrid, x: &[f64]) -> ActionVector {
    debug_assert_eq!(x.len(), grid.dims);
    ActionVector(
        x.iter()
            .enumerate()
            .map(|(d, &v)| {
                grid.values[d]
                    .iter()
                    .enumerate()
                    .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                    .map(|(j, _)| j)
                    .unwrap_or(0)
            })
            .collect(),
    )
}

/// Concatenated one-hot encoding of the action vector, width N * D. This is
/// the action representation the transition model consumes.
pub fn one_hot_encoding(action: &ActionVector, bins: usize) -> Vec<f64> {
    let mut out = vec![0.0; action.0.len() * bins];
    for (d, &j) in action.0.iter().enumerate() {
        out[d * bins + j] = 1.0;
    }
    out
}
