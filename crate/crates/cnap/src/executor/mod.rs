//! Encode–process–decode message-passing executor.
//!
//! The processor (message MLP `M` + update MLP `U` with elementwise-max
//! aggregation) is pretrained to imitate one step of value iteration per
//! message-passing step, then frozen and plugged into the agent. Aggregation
//! runs over incoming edges oriented successor → state, so value information
//! flows backward along actions, mirroring the max over successor values in
//! the Bellman backup.

mod pretrain;

pub use pretrain::{pretrain_executor, PretrainHyper, PretrainMetrics, PretrainedExecutor};

use serde::{Deserialize, Serialize};

use crate::diffcore::{
    lookup_mlp, mlp_forward, register_mlp, Checkpoint, DiffError, LayerNormPos, MlpParams,
    MlpSpec, NodeId, ParamStore, Tape,
};
use crate::vioracle::TabularMDP;

/// Module name recorded in exported processor checkpoints.
pub const PROCESSOR_MODULE_NAME: &str = "executor-processor";

#[derive(Debug, thiserror::Error)]
pub enum ExecError {
    #[error("invalid latent graph: {0}")]
    BadGraph(String),
    #[error("executor steps must be >= 1, got {0}")]
    BadSteps(usize),
    #[error("pretraining diverged at epoch {epoch}, pair {pair}: loss {loss}")]
    Diverged { epoch: usize, pair: usize, loss: f64 },
    #[error("empty supervision dataset")]
    EmptyDataset,
    #[error("checkpoint is not an executor processor: module {0}")]
    WrongModule(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// Architecture of the executor; `hidden_dim` is the shared embedding width
/// `k` and must match the agent's.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutorConfig {
    pub hidden_dim: usize,
    pub edge_feat_dim: usize,
}

impl Default for ExecutorConfig {
    fn default() -> Self {
        Self { hidden_dim: 50, edge_feat_dim: 3 }
    }
}

impl ExecutorConfig {
    /// M(h_receiver, h_sender, e) -> message.
    pub fn msg_spec(&self) -> MlpSpec {
        let k = self.hidden_dim;
        MlpSpec::relu(vec![2 * k + self.edge_feat_dim, k, k], LayerNormPos::None)
    }

    /// U(h, m) -> updated h.
    pub fn upd_spec(&self) -> MlpSpec {
        let k = self.hidden_dim;
        MlpSpec::relu(vec![2 * k, k, k], LayerNormPos::None)
    }

    /// Pretraining value encoder: scalar -> k.
    pub fn enc_spec(&self) -> MlpSpec {
        MlpSpec::relu(vec![1, self.hidden_dim], LayerNormPos::None)
    }

    /// Pretraining decoder: k -> scalar.
    pub fn dec_spec(&self) -> MlpSpec {
        MlpSpec::relu(vec![self.hidden_dim, 1], LayerNormPos::None)
    }
}

/// A directed edge carrying a feature vector; messages flow src -> dst.
#[derive(Debug, Clone, Copy)]
pub struct GraphEdge {
    pub src: usize,
    pub dst: usize,
    pub feat: NodeId,
}

/// Rooted graph of embedding nodes living on a [`Tape`].
#[derive(Debug, Clone)]
pub struct LatentGraph {
    pub nodes: Vec<NodeId>,
    pub edges: Vec<GraphEdge>,
    pub root: usize,
}

impl LatentGraph {
    pub fn validate(&self, tape: &Tape) -> Result<(), ExecError> {
        if self.root >= self.nodes.len() {
            return Err(ExecError::BadGraph(format!(
                "root {} out of range ({} nodes)",
                self.root,
                self.nodes.len()
            )));
        }
        let feat_width = self.edges.first().map(|e| tape.value(e.feat).len());
        for e in &self.edges {
            if e.src >= self.nodes.len() || e.dst >= self.nodes.len() {
                return Err(ExecError::BadGraph(format!(
                    "edge ({}, {}) out of range",
                    e.src, e.dst
                )));
            }
            if Some(tape.value(e.feat).len()) != feat_width {
                return Err(ExecError::BadGraph("edge feature widths differ".into()));
            }
        }
        Ok(())
    }
}

/// Handles to the processor parameters inside some store. The same structure
/// serves pretraining (fresh parameters) and deployment (frozen parameters
/// imported from a checkpoint under a prefix).
#[derive(Debug, Clone)]
pub struct Processor {
    pub config: ExecutorConfig,
    pub msg: MlpParams,
    pub upd: MlpParams,
}

impl Processor {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        config: ExecutorConfig,
        rng: &mut impl rand::Rng,
    ) -> Result<Self, DiffError> {
        let msg = register_mlp(store, &format!("{prefix}msg"), &config.msg_spec(), rng)?;
        let upd = register_mlp(store, &format!("{prefix}upd"), &config.upd_spec(), rng)?;
        Ok(Self { config, msg, upd })
    }

    pub fn lookup(
        store: &ParamStore,
        prefix: &str,
        config: ExecutorConfig,
    ) -> Result<Self, DiffError> {
        let msg = lookup_mlp(store, &format!("{prefix}msg"), &config.msg_spec())?;
        let upd = lookup_mlp(store, &format!("{prefix}upd"), &config.upd_spec())?;
        Ok(Self { config, msg, upd })
    }
}

/// One message-passing step: for every node, aggregate incoming messages with
/// an elementwise max (a fixed zero message where there are none) and apply
/// the update MLP. Returns the new node ids; the input graph is untouched.
pub fn mpnn_step(
    tape: &mut Tape,
    store: &ParamStore,
    proc: &Processor,
    graph: &LatentGraph,
) -> Result<Vec<NodeId>, ExecError> {
    graph.validate(tape)?;
    let k = proc.config.hidden_dim;
    let mut incoming: Vec<Vec<NodeId>> = vec![Vec::new(); graph.nodes.len()];
    for e in &graph.edges {
        let inputs = tape.concat(&[graph.nodes[e.dst], graph.nodes[e.src], e.feat]);
        let message = mlp_forward(tape, store, &proc.msg, inputs)?;
        incoming[e.dst].push(message);
    }
    let mut updated = Vec::with_capacity(graph.nodes.len());
    for (i, &h) in graph.nodes.iter().enumerate() {
        let aggregated = if incoming[i].is_empty() {
            tape.zeros(k)
        } else {
            tape.max_pool(&incoming[i])
        };
        let u_in = tape.concat(&[h, aggregated]);
        updated.push(mlp_forward(tape, store, &proc.upd, u_in)?);
    }
    Ok(updated)
}

/// Applies the processor `steps` times and returns the root embedding.
pub fn executor_infer(
    tape: &mut Tape,
    store: &ParamStore,
    proc: &Processor,
    graph: &LatentGraph,
    steps: usize,
) -> Result<NodeId, ExecError> {
    if steps < 1 {
        return Err(ExecError::BadSteps(steps));
    }
    let mut current = graph.clone();
    for _ in 0..steps {
        current.nodes = mpnn_step(tape, store, proc, &current)?;
    }
    Ok(current.nodes[current.root])
}

/// Plain (non-tape) edge list of a supervision graph: one edge per
/// (state, action, successor) with p > 0, oriented successor -> state,
/// feature (r(s,a), p(s'|s,a), gamma).
pub fn supervision_edges(mdp: &TabularMDP) -> Vec<(usize, usize, [f64; 3])> {
    let mut edges = Vec::new();
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            for (s_next, &p) in mdp.transition_row(s, a).iter().enumerate() {
                if p > 0.0 {
                    edges.push((s_next, s, [mdp.reward(s, a), p, mdp.gamma]));
                }
            }
        }
    }
    edges
}

/// Hand-constructed processor: message = r + gamma * p * value(sender),
/// update passes the max through. On deterministic supervision graphs this is
/// the Bellman backup written as message passing, so it must agree with
/// `vi_step` exactly; it serves as the constructive sanity oracle for the
/// learned processor's structure.
pub fn hand_built_vi_processor(
    values: &[f64],
    edges: &[(usize, usize, [f64; 3])],
) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let mut seen = vec![false; values.len()];
    for &(src, dst, feat) in edges {
        let message = feat[0] + feat[2] * (feat[1] * values[src]);
        if !seen[dst] || message > out[dst] {
            out[dst] = message;
            seen[dst] = true;
        }
    }
    out
}

/// Serialized alongside processor weights so loaders can verify
/// compatibility before use.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProcessorSpecHeader {
    pub hidden_dim: usize,
    pub edge_feat_dim: usize,
}

/// Exports the processor (message + update parameters only) in the
/// checkpoint container under [`PROCESSOR_MODULE_NAME`].
pub fn export_processor(store: &ParamStore, prefix: &str, config: ExecutorConfig) -> Checkpoint {
    let header = ProcessorSpecHeader {
        hidden_dim: config.hidden_dim,
        edge_feat_dim: config.edge_feat_dim,
    };
    let spec = serde_json::to_string(&header).expect("header serializes");
    let mut ckpt = Checkpoint::from_store(store, PROCESSOR_MODULE_NAME, &spec, prefix);
    if !prefix.is_empty() {
        for a in &mut ckpt.arrays {
            a.name = a.name.trim_start_matches(prefix).to_string();
        }
    }
    // Only the processor travels; pretraining-side encoder/decoder stay home.
    ckpt.arrays
        .retain(|a| a.name.starts_with("msg.") || a.name.starts_with("upd."));
    ckpt
}

/// Parses and validates a processor checkpoint header.
pub fn read_processor_header(ckpt: &Checkpoint) -> Result<ProcessorSpecHeader, ExecError> {
    if ckpt.module_name != PROCESSOR_MODULE_NAME {
        return Err(ExecError::WrongModule(ckpt.module_name.clone()));
    }
    serde_json::from_str(&ckpt.spec)
        .map_err(|e| ExecError::BadGraph(format!("bad processor spec header: {e}")))
}
