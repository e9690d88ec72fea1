//! The CNAP agent: encoder, latent transition model, action-space
//! discretization, budgeted planning-graph construction, factorized policy
//! head, and value head.
//!
//! One decision is: encode the observation, expand a planning graph of
//! predicted successor embeddings under the configured neighbor sampler, run
//! the frozen executor over it, then read the factorized policy and value off
//! the concatenation of the state embedding and the executor output. In
//! baseline mode the executor output is a zero vector and no graph is built.

mod grid;
mod planning;
mod policy;
mod samplers;

pub use grid::{discretize, nearest_bin, one_hot_encoding, to_continuous, ActionGrid, ActionVector};
pub use planning::PlanningGraph;
pub use policy::FactorizedPolicy;
pub use samplers::{
    exhaustive_actions, sample_learned, sample_learned_gaussian, sample_manual_gaussian,
    sample_reuse_policy, SampledAction, SamplerKind,
};

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diffcore::{
    lookup_mlp, mlp_forward, register_mlp, Checkpoint, DiffError, LayerNormPos, MlpParams,
    MlpSpec, NodeId, ParamId, ParamStore, Tape,
};
use crate::executor::{
    executor_infer, read_processor_header, ExecError, ExecutorConfig, Processor,
};

/// Module name recorded in agent checkpoints.
pub const AGENT_MODULE_NAME: &str = "cnap-agent";

/// Observations are standardized and clipped to this many standard
/// deviations before encoding.
const OBS_CLIP: f64 = 10.0;

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("need at least 2 bins per dimension, got {0}")]
    BadBins(usize),
    #[error("bin index {index} out of range for dimension {dim} ({bins} bins)")]
    BinIndex { dim: usize, index: usize, bins: usize },
    #[error("action has {got} dimensions, expected {expected}")]
    ActionDims { expected: usize, got: usize },
    #[error("observation has {got} dimensions, expected {expected}")]
    ObsDims { expected: usize, got: usize },
    #[error("planning graph would need {expected} nodes, over the {max} cap")]
    BudgetExceeded { expected: u128, max: usize },
    #[error("gumbel temperature must be > 0, got {0}")]
    BadTemperature(f64),
    #[error("executor checkpoint hidden dim {got} != configured embedding dim {expected}")]
    HiddenDimMismatch { expected: usize, got: usize },
    #[error("agent variant requires an executor checkpoint")]
    MissingExecutor,
    #[error("checkpoint is not an agent checkpoint: module {0}")]
    WrongModule(String),
    #[error("invalid agent config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// Everything needed to rebuild the agent's architecture.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentConfig {
    pub obs_dim: usize,
    /// Shared embedding width k (must equal the executor's hidden dim).
    pub embedding_dim: usize,
    /// Hidden width of the encoder and transition MLPs.
    pub hidden_dim: usize,
    /// Bins per action dimension (N).
    pub bins: usize,
    /// Neighbor-sampling budget per node (K).
    pub budget: usize,
    /// Message-passing steps, which is also the planning-graph depth (L).
    pub gnn_steps: usize,
    pub sampler: SamplerKind,
    /// PPO baseline: encoder + heads only, executor output pinned to zero.
    pub baseline: bool,
    pub max_graph_nodes: usize,
    pub gumbel_temperature: f64,
    pub action_bounds: Vec<(f64, f64)>,
    pub executor: ExecutorConfig,
}

impl AgentConfig {
    pub fn action_dims(&self) -> usize {
        self.action_bounds.len()
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        if self.bins < 2 {
            return Err(AgentError::BadBins(self.bins));
        }
        if self.budget < 1 || self.gnn_steps < 1 {
            return Err(AgentError::BadConfig(format!(
                "budget ({}) and gnn_steps ({}) must be >= 1",
                self.budget, self.gnn_steps
            )));
        }
        if !(self.gumbel_temperature > 0.0) {
            return Err(AgentError::BadTemperature(self.gumbel_temperature));
        }
        if self.executor.hidden_dim != self.embedding_dim {
            return Err(AgentError::HiddenDimMismatch {
                expected: self.embedding_dim,
                got: self.executor.hidden_dim,
            });
        }
        if self.obs_dim == 0 || self.action_bounds.is_empty() {
            return Err(AgentError::BadConfig("empty observation or action space".into()));
        }
        Ok(())
    }
}

/// Output of one action selection.
#[derive(Debug, Clone)]
pub struct Decision {
    pub action: ActionVector,
    pub continuous: Vec<f64>,
    pub log_prob: f64,
    pub value: f64,
    pub entropy: f64,
    /// Seed used for planning-graph sampling noise; replaying the forward
    /// pass with this seed reproduces the same graph.
    pub planning_seed: u64,
    /// Observation after normalization, as fed to the encoder.
    pub obs_normalized: Vec<f64>,
}

/// Tape handles from a recorded forward pass.
pub struct ForwardNodes {
    pub embedding: NodeId,
    pub executor_out: NodeId,
    pub policy: FactorizedPolicy,
    pub value: NodeId,
}

struct ObsNormalizer {
    mean: ParamId,
    m2: ParamId,
    count: ParamId,
}

pub struct Agent {
    pub config: AgentConfig,
    pub store: ParamStore,
    pub grid: ActionGrid,
    pub(crate) enc: MlpParams,
    pub(crate) trans: MlpParams,
    pub(crate) policy_head: MlpParams,
    pub(crate) value_head: MlpParams,
    pub(crate) mu_head: MlpParams,
    pub(crate) sigma_head: MlpParams,
    pub(crate) sampler_head: MlpParams,
    pub(crate) processor: Option<Processor>,
    obs_norm: ObsNormalizer,
    planning_builds: AtomicU64,
}

impl Agent {
    fn enc_spec(config: &AgentConfig) -> MlpSpec {
        MlpSpec::relu(
            vec![config.obs_dim, config.hidden_dim, config.hidden_dim, config.embedding_dim],
            LayerNormPos::None,
        )
    }

    fn trans_spec(config: &AgentConfig) -> MlpSpec {
        let action_width = config.bins * config.action_dims();
        MlpSpec::relu(
            vec![
                config.embedding_dim + action_width,
                config.hidden_dim,
                config.hidden_dim,
                config.embedding_dim,
            ],
            LayerNormPos::BeforeLast,
        )
    }

    fn head_specs(config: &AgentConfig) -> [(&'static str, MlpSpec); 5] {
        let k = config.embedding_dim;
        let nd = config.bins * config.action_dims();
        let d = config.action_dims();
        let linear = |i, o| MlpSpec::relu(vec![i, o], LayerNormPos::None);
        [
            ("policy", linear(2 * k, nd)),
            ("value", linear(2 * k, 1)),
            ("mu", linear(k, d)),
            ("sigma", linear(k, d)),
            ("sampler", linear(k, nd)),
        ]
    }

    /// Fresh agent. CNAP variants need a processor checkpoint whose hidden
    /// dim matches `embedding_dim`; baseline agents ignore it.
    pub fn new(
        config: AgentConfig,
        executor_ckpt: Option<&Checkpoint>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, AgentError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let enc = register_mlp(&mut store, "enc", &Self::enc_spec(&config), rng)?;
        let trans = register_mlp(&mut store, "trans", &Self::trans_spec(&config), rng)?;
        let [p, v, m, s, smp] = Self::head_specs(&config);
        let policy_head = register_mlp(&mut store, p.0, &p.1, rng)?;
        let value_head = register_mlp(&mut store, v.0, &v.1, rng)?;
        let mu_head = register_mlp(&mut store, m.0, &m.1, rng)?;
        let sigma_head = register_mlp(&mut store, s.0, &s.1, rng)?;
        let sampler_head = register_mlp(&mut store, smp.0, &smp.1, rng)?;

        // Start the Gaussian sampler heads at the manual-Gaussian operating
        // point (mean N/2, std N/4) instead of a degenerate corner.
        let n = config.bins as f64;
        store.value_mut(mu_head.biases[0]).iter_mut().for_each(|b| *b = n / 2.0);
        store
            .value_mut(sigma_head.biases[0])
            .iter_mut()
            .for_each(|b| *b = (n / 4.0).ln());

        let processor = if config.baseline {
            None
        } else {
            let ckpt = executor_ckpt.ok_or(AgentError::MissingExecutor)?;
            let header = read_processor_header(ckpt)?;
            if header.hidden_dim != config.embedding_dim {
                return Err(AgentError::HiddenDimMismatch {
                    expected: config.embedding_dim,
                    got: header.hidden_dim,
                });
            }
            ckpt.load_into(&mut store, |name| format!("executor.{name}"), true)?;
            Some(Processor::lookup(&store, "executor.", config.executor)?)
        };

        let obs_norm = ObsNormalizer {
            mean: store.register_zeros("obsnorm.mean", &[config.obs_dim])?,
            m2: store.register_zeros("obsnorm.m2", &[config.obs_dim])?,
            count: store.register_zeros("obsnorm.count", &[1])?,
        };
        store.freeze_prefix("obsnorm.");

        let grid_spec = crate::envs::EnvSpec {
            obs_dim: config.obs_dim,
            action_dim: config.action_dims(),
            action_bounds: config.action_bounds.clone(),
            max_episode_steps: 1,
        };
        let grid = discretize(&grid_spec, config.bins)?;
        Ok(Self {
            config,
            store,
            grid,
            enc,
            trans,
            policy_head,
            value_head,
            mu_head,
            sigma_head,
            sampler_head,
            processor,
            obs_norm,
            planning_builds: AtomicU64::new(0),
        })
    }

    /// Serializes the whole agent (including normalizer state and any frozen
    /// executor entries) into one container.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let spec = serde_json::to_string(&self.config).expect("config serializes");
        Checkpoint::from_store(&self.store, AGENT_MODULE_NAME, &spec, "")
    }

    /// Rebuilds an agent from [`Agent::to_checkpoint`] output.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, AgentError> {
        if ckpt.module_name != AGENT_MODULE_NAME {
            return Err(AgentError::WrongModule(ckpt.module_name.clone()));
        }
        let config: AgentConfig = serde_json::from_str(&ckpt.spec)
            .map_err(|e| AgentError::BadConfig(format!("bad checkpoint spec: {e}")))?;
        config.validate()?;
        let mut store = ParamStore::new();
        ckpt.load_into(&mut store, |n| n.to_string(), false)?;
        store.freeze_prefix("executor.");
        store.freeze_prefix("obsnorm.");

        let enc = lookup_mlp(&store, "enc", &Self::enc_spec(&config))?;
        let trans = lookup_mlp(&store, "trans", &Self::trans_spec(&config))?;
        let [p, v, m, s, smp] = Self::head_specs(&config);
        let policy_head = lookup_mlp(&store, p.0, &p.1)?;
        let value_head = lookup_mlp(&store, v.0, &v.1)?;
        let mu_head = lookup_mlp(&store, m.0, &m.1)?;
        let sigma_head = lookup_mlp(&store, s.0, &s.1)?;
        let sampler_head = lookup_mlp(&store, smp.0, &smp.1)?;
        let processor = if config.baseline {
            None
        } else {
            Some(Processor::lookup(&store, "executor.", config.executor)?)
        };
        let obs_norm = ObsNormalizer {
            mean: store.id("obsnorm.mean")?,
            m2: store.id("obsnorm.m2")?,
            count: store.id("obsnorm.count")?,
        };
        let grid_spec = crate::envs::EnvSpec {
            obs_dim: config.obs_dim,
            action_dim: config.action_dims(),
            action_bounds: config.action_bounds.clone(),
            max_episode_steps: 1,
        };
        let grid = discretize(&grid_spec, config.bins)?;
        Ok(Self {
            config,
            store,
            grid,
            enc,
            trans,
            policy_head,
            value_head,
            mu_head,
            sigma_head,
            sampler_head,
            processor,
            obs_norm,
            planning_builds: AtomicU64::new(0),
        })
    }

    /// Hash of the frozen processor parameters (the frozen-executor
    /// contract's witness).
    pub fn executor_hash(&self) -> u64 {
        self.store.hash_prefix("executor.")
    }

    /// How many planning graphs this agent has built.
    pub fn planning_graph_builds(&self) -> u64 {
        self.planning_builds.load(Ordering::Relaxed)
    }

    /// Feeds one raw observation into the running mean/std statistics.
    pub fn update_obs_normalizer(&mut self, obs: &[f64]) {
        debug_assert_eq!(obs.len(), self.config.obs_dim);
        let count = {
            let c = self.store.value_mut(self.obs_norm.count);
            c[0] += 1.0;
            c[0]
        };
        for (i, &x) in obs.iter().enumerate() {
            let mean_i = self.store.value(self.obs_norm.mean)[i];
            let delta = x - mean_i;
            let new_mean = mean_i + delta / count;
            self.store.value_mut(self.obs_norm.mean)[i] = new_mean;
            self.store.value_mut(self.obs_norm.m2)[i] += delta * (x - new_mean);
        }
    }

    /// Standardizes an observation with frozen statistics (no update).
    pub fn normalize_obs(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        if obs.len() != self.config.obs_dim {
            return Err(AgentError::ObsDims { expected: self.config.obs_dim, got: obs.len() });
        }
        let count = self.store.value(self.obs_norm.count)[0];
        if count < 2.0 {
            return Ok(obs.iter().map(|x| x.clamp(-OBS_CLIP, OBS_CLIP)).collect());
        }
        let mean = self.store.value(self.obs_norm.mean);
        let m2 = self.store.value(self.obs_norm.m2);
        Ok(obs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let var = m2[i] / count;
                ((x - mean[i]) / (var + 1e-8).sqrt()).clamp(-OBS_CLIP, OBS_CLIP)
            })
            .collect())
    }

    /// Encoder MLP over a normalized observation.
    pub fn encode(&self, tape: &mut Tape, obs_normalized: &[f64]) -> Result<NodeId, AgentError> {
        if obs_normalized.len() != self.config.obs_dim {
            return Err(AgentError::ObsDims {
                expected: self.config.obs_dim,
                got: obs_normalized.len(),
            });
        }
        let x = tape.constant(obs_normalized.to_vec());
        Ok(mlp_forward(tape, &self.store, &self.enc, x)?)
    }

    /// Transition MLP: (embedding, action encoding) -> successor embedding.
    pub fn transition(
        &self,
        tape: &mut Tape,
        h: NodeId,
        action_encoding: NodeId,
    ) -> Result<NodeId, AgentError> {
        let joined = tape.concat(&[h, action_encoding]);
        Ok(mlp_forward(tape, &self.store, &self.trans, joined)?)
    }

    /// Convenience transition on a concrete action vector.
    pub fn transition_action(
        &self,
        tape: &mut Tape,
        h: NodeId,
        action: &ActionVector,
    ) -> Result<NodeId, AgentError> {
        action.validate(&self.grid)?;
        let enc = tape.constant(one_hot_encoding(action, self.config.bins));
        self.transition(tape, h, enc)
    }

    /// Records the full decision pipeline on the tape. `planning_seed` fixes
    /// all sampling noise inside graph construction, so the same seed replays
    /// the identical graph during PPO updates.
    pub fn forward(
        &self,
        tape: &mut Tape,
        obs_normalized: &[f64],
        planning_seed: u64,
    ) -> Result<ForwardNodes, AgentError> {
        let h = self.encode(tape, obs_normalized)?;
        let x = if self.config.baseline {
            tape.zeros(self.config.embedding_dim)
        } else {
            let proc = self.processor.as_ref().ok_or(AgentError::MissingExecutor)?;
            let mut plan_rng = ChaCha8Rng::seed_from_u64(planning_seed);
            let graph = self.build_planning_graph(tape, h, &mut plan_rng)?;
            self.planning_builds.fetch_add(1, Ordering::Relaxed);
            executor_infer(tape, &self.store, proc, &graph.latent, self.config.gnn_steps)?
        };
        let hx = tape.concat(&[h, x]);
        let flat = mlp_forward(tape, &self.store, &self.policy_head, hx)?;
        let policy =
            FactorizedPolicy::from_flat(tape, flat, self.config.action_dims(), self.config.bins);
        let value = mlp_forward(tape, &self.store, &self.value_head, hx)?;
        Ok(ForwardNodes { embedding: h, executor_out: x, policy, value })
    }

    /// Value estimate of an already-normalized observation (used to
    /// bootstrap truncated episodes).
    pub fn evaluate_value(
        &self,
        obs_normalized: &[f64],
        planning_seed: u64,
    ) -> Result<f64, AgentError> {
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, obs_normalized, planning_seed)?;
        Ok(tape.scalar(fwd.value))
    }

    /// One action selection with fresh sampling noise.
    pub fn act(&self, obs: &[f64], rng: &mut ChaCha8Rng) -> Result<Decision, AgentError> {
        let planning_seed = rng.random::<u64>();
        let obs_normalized = self.normalize_obs(obs)?;
        let mut tape = Tape::new();
        let fwd = self.forward(&mut tape, &obs_normalized, planning_seed)?;
        let action = fwd.policy.sample(&tape, rng);
        let log_prob = fwd.policy.joint_log_prob(&mut tape, &action);
        let entropy = fwd.policy.entropy(&mut tape);
        Ok(Decision {
            continuous: to_continuous(&action, &self.grid)?,
            action,
            log_prob: tape.scalar(log_prob),
            value: tape.scalar(fwd.value),
            entropy: tape.scalar(entropy),
            planning_seed,
            obs_normalized,
        })
    }
}
