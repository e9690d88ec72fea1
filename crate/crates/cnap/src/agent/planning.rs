//! Budgeted breadth-first construction of the latent planning graph.

use rand_chacha::ChaCha8Rng;

use super::grid::ActionVector;
use super::samplers::{
    exhaustive_actions, sample_learned, sample_learned_gaussian, sample_manual_gaussian,
    sample_reuse_policy, SampledAction, SamplerKind,
};
use super::{Agent, AgentError};
use crate::diffcore::{NodeId, Tape};
use crate::executor::{GraphEdge, LatentGraph};

/// Latent planning graph plus bookkeeping: per-node depth and the action
/// labeling each edge. Edges are oriented child -> parent so executor
/// messages flow toward the root.
#[derive(Debug, Clone)]
pub struct PlanningGraph {
    pub latent: LatentGraph,
    pub depths: Vec<usize>,
    pub edge_actions: Vec<ActionVector>,
    /// Children expanded per node this build (K, or N^D when exhaustive).
    pub branching: usize,
}

impl PlanningGraph {
    pub fn node_count(&self) -> usize {
        self.latent.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.latent.edges.len()
    }
}

/// Closed-form node count of a full expansion: sum of branching^l for
/// l = 0..=depth, saturating at u128 scale.
pub fn expected_node_count(branching: usize, depth: usize) -> u128 {
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..=depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(branching as u128);
    }
    total
}

impl Agent {
    /// Expansion width: the sampler's budget K, or every binned action when
    /// the joint space is no bigger than the budget (or the sampler is
    /// explicitly exhaustive).
    pub(crate) fn effective_branching(&self) -> usize {
        let joint: u128 = (self.config.bins as u128)
            .checked_pow(self.config.action_dims() as u32)
            .unwrap_or(u128::MAX);
        if self.config.sampler == SamplerKind::Exhaustive || joint <= self.config.budget as u128 {
            joint.min(usize::MAX as u128) as usize
        } else {
            self.config.budget
        }
    }

    fn sample_expansion(
        &self,
        tape: &mut Tape,
        h: NodeId,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<SampledAction>, AgentError> {
        let joint: u128 = (self.config.bins as u128)
            .checked_pow(self.config.action_dims() as u32)
            .unwrap_or(u128::MAX);
        if self.config.sampler == SamplerKind::Exhaustive || joint <= self.config.budget as u128 {
            return Ok(exhaustive_actions(tape, &self.grid));
        }
        let budget = self.config.budget;
        match self.config.sampler {
            SamplerKind::Exhaustive => unreachable!("handled above"),
            SamplerKind::ManualGaussian => {
                Ok(sample_manual_gaussian(tape, &self.grid, budget, rng))
            }
            SamplerKind::LearnedGaussian => sample_learned_gaussian(
                tape,
                &self.store,
                &self.mu_head,
                &self.sigma_head,
                h,
                &self.grid,
                budget,
                rng,
            ),
            SamplerKind::ReusePolicy => sample_reuse_policy(
                tape,
                &self.store,
                &self.policy_head,
                h,
                self.config.embedding_dim,
                &self.grid,
                budget,
                rng,
            ),
            SamplerKind::LearnedSampling => sample_learned(
                tape,
                &self.store,
                &self.sampler_head,
                h,
                &self.grid,
                budget,
                self.config.gumbel_temperature,
                rng,
            ),
        }
    }

    /// Expands `gnn_steps` levels breadth-first from the root embedding.
    /// Every frontier node gets its own freshly sampled actions (no
    /// deduplication: repeated actions yield distinct child nodes whose
    /// embeddings coincide, which the max aggregation absorbs).
    pub fn build_planning_graph(
        &self,
        tape: &mut Tape,
        h_root: NodeId,
        rng: &mut ChaCha8Rng,
    ) -> Result<PlanningGraph, AgentError> {
        let branching = self.effective_branching();
        let depth = self.config.gnn_steps;
        let expected = expected_node_count(branching, depth);
        if expected > self.config.max_graph_nodes as u128 {
            return Err(AgentError::BudgetExceeded {
                expected,
                max: self.config.max_graph_nodes,
            });
        }

        let mut nodes = vec![h_root];
        let mut depths = vec![0usize];
        let mut edges = Vec::new();
        let mut edge_actions = Vec::new();
        // Deployment-time edge features are a fixed zero vector of the
        // pretraining width; one shared constant serves every edge.
        let zero_feat = tape.zeros(self.config.executor.edge_feat_dim);

        let mut frontier: Vec<usize> = vec![0];
        for level in 1..=depth {
            let mut next_frontier = Vec::with_capacity(frontier.len() * branching);
            for &parent in &frontier {
                let samples = self.sample_expansion(tape, nodes[parent], rng)?;
                for sampled in samples {
                    let child_h = self.transition(tape, nodes[parent], sampled.encoding)?;
                    let child = nodes.len();
                    nodes.push(child_h);
                    depths.push(level);
                    edges.push(GraphEdge { src: child, dst: parent, feat: zero_feat });
                    edge_actions.push(sampled.action);
                    next_frontier.push(child);
                }
            }
            frontier = next_frontier;
        }

        Ok(PlanningGraph {
            latent: LatentGraph { nodes, edges, root: 0 },
            depths,
            edge_actions,
            branching,
        })
    }
}
