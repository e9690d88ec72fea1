//! Factorized joint policy: D independent categoricals over N bins each,
//! read out of one flat N*D logit vector.

use rand::Rng;

use super::grid::ActionVector;
use crate::diffcore::{Categorical, NodeId, Tape};

/// Tape-resident factorized policy. The joint log-probability of an action
/// vector is the sum of the per-dimension log-probabilities.
#[derive(Debug, Clone)]
pub struct FactorizedPolicy {
    pub dims: usize,
    pub bins: usize,
    /// Per-dimension logit slices of the flat head output.
    pub dim_logits: Vec<NodeId>,
    /// Per-dimension log-softmax nodes.
    pub dim_log_probs: Vec<NodeId>,
}

impl FactorizedPolicy {
    /// Slices a flat N*D logit vector into D per-dimension categoricals.
    pub fn from_flat(tape: &mut Tape, flat: NodeId, dims: usize, bins: usize) -> Self {
        debug_assert_eq!(tape.value(flat).len(), dims * bins);
        let mut dim_logits = Vec::with_capacity(dims);
        let mut dim_log_probs = Vec::with_capacity(dims);
        for d in 0..dims {
            let slice = tape.slice(flat, d * bins, bins);
            dim_logits.push(slice);
            dim_log_probs.push(tape.log_softmax(slice));
        }
        Self { dims, bins, dim_logits, dim_log_probs }
    }

    /// Scalar node: sum over dimensions of log pi_d(a_d | s).
    pub fn joint_log_prob(&self, tape: &mut Tape, action: &ActionVector) -> NodeId {
        let mut total: Option<NodeId> = None;
        for (d, &idx) in action.0.iter().enumerate() {
            let lp = tape.gather(self.dim_log_probs[d], idx);
            total = Some(match total {
                Some(t) => tape.add(t, lp),
                None => lp,
            });
        }
        total.expect("action has at least one dimension")
    }

    /// Scalar node: joint entropy = sum of per-dimension entropies.
    pub fn entropy(&self, tape: &mut Tape) -> NodeId {
        let mut total: Option<NodeId> = None;
        for d in 0..self.dims {
            let p = tape.softmax(self.dim_logits[d]);
            let plp = tape.mul(p, self.dim_log_probs[d]);
            let sum = tape.sum(plp);
            let h = tape.scale(sum, -1.0);
            total = Some(match total {
                Some(t) => tape.add(t, h),
                None => h,
            });
        }
        total.expect("at least one dimension")
    }

    /// Samples one action vector from the current logits (plain values, no
    /// gradient involvement).
    pub fn sample(&self, tape: &Tape, rng: &mut impl Rng) -> ActionVector {
        ActionVector(
            self.dim_logits
                .iter()
                .map(|&node| {
                    Categorical::from_logits(tape.value(node))
                        .expect("policy logits are finite")
                        .sample(rng)
                })
                .collect(),
        )
    }

    /// Per-dimension logits as plain values.
    pub fn logits_values(&self, tape: &Tape) -> Vec<Vec<f64>> {
        self.dim_logits.iter().map(|&n| tape.value(n).to_vec()).collect()
    }
}
