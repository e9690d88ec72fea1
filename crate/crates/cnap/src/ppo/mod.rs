//! Proximal Policy Optimization trainer for all agent parameters except the
//! frozen executor, with generalized advantage estimation.

mod gae;
mod rollout;
mod update;

pub use gae::compute_gae;
pub use rollout::{RolloutBuffer, RolloutCollector, Transition};
pub use update::{ppo_update, LossReport, AUX_HINGE_MARGIN};

use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentError};
use crate::diffcore::DiffError;
use crate::envs::{Env, EnvError};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum PpoError {
    #[error("invalid ppo hyperparameter: {0}")]
    BadHyper(String),
    #[error("non-finite loss at epoch {epoch}, minibatch {minibatch}: {detail}")]
    NonFiniteLoss { epoch: usize, minibatch: usize, detail: String },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// How much experience one update consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RolloutMode {
    /// Collect this many complete episodes per update.
    Episodes(usize),
    /// Collect this many environment steps per update.
    Steps(usize),
}

/// PPO hyperparameters. Defaults follow the common single-worker lineage:
/// gamma 0.99, lambda 0.95, clip 0.2, 4 epochs, lr 7e-4, value coefficient
/// 0.5, entropy coefficient 0.01.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoHyper {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub lr: f64,
    /// Number of collect-update cycles.
    pub updates: usize,
    pub rollout: RolloutMode,
    /// Weight of the optional transition-consistency hinge loss (0 disables).
    pub aux_transition_coef: f64,
}

impl Default for PpoHyper {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch_size: 64,
            value_coef: 0.5,
            entropy_coef: 0.01,
            lr: 7e-4,
            updates: 20,
            rollout: RolloutMode::Episodes(5),
            aux_transition_coef: 0.0,
        }
    }
}

impl PpoHyper {
    pub fn validate(&self) -> Result<(), PpoError> {
        if !(0.0..1.0).contains(&self.gamma) || !(0.0..1.0).contains(&self.lambda) {
            return Err(PpoError::BadHyper(format!(
                "gamma ({}) and lambda ({}) must be in [0, 1)",
                self.gamma, self.lambda
            )));
        }
        if !(self.clip > 0.0) {
            return Err(PpoError::BadHyper(format!("clip must be > 0, got {}", self.clip)));
        }
        if self.epochs == 0 || self.minibatch_size == 0 || self.updates == 0 {
            return Err(PpoError::BadHyper("epochs, minibatch, updates must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(PpoError::BadHyper(format!("lr must be > 0, got {}", self.lr)));
        }
        match self.rollout {
            RolloutMode::Episodes(0) => {
                Err(PpoError::BadHyper("rollout episodes must be positive".into()))
            }
            RolloutMode::Steps(0) => {
                Err(PpoError::BadHyper("rollout steps must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

/// One row of the per-update metrics stream.
#[derive(Debug, Clone)]
pub struct UpdateMetrics {
    pub update: usize,
    pub env_steps: u64,
    /// Mean total reward over the last (up to) 100 completed episodes.
    pub mean_episode_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub wall_ms: f64,
}

impl UpdateMetrics {
    pub const CSV_HEADER: &'static str =
        "update,env_steps,mean_episode_reward,policy_loss,value_loss,entropy,clip_fraction,wall_ms";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.update,
            self.env_steps,
            self.mean_episode_reward,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.clip_fraction,
            self.wall_ms
        )
    }
}

/// Trains `agent` in `env` for `hyper.updates` collect-update cycles,
/// returning the metrics time series. The executor parameter hash is checked
/// every update; a change aborts training.
pub fn train(
    env: Box<dyn Env>,
    agent: &mut Agent,
    hyper: &PpoHyper,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<UpdateMetrics>, RolloutCollector), PpoError> {
    hyper.validate()?;
    let executor_hash = agent.executor_hash();
    let mut collector = RolloutCollector::new(env);
    let mut metrics = Vec::with_capacity(hyper.updates);
    for update in 0..hyper.updates {
        let start = std::time::Instant::now();
        let (mut buffer, bootstraps) = collector.collect(agent, &hyper.rollout, rng)?;
        buffer.finalize(hyper.gamma, hyper.lambda, &bootstraps);
        let report = ppo_update(agent, &buffer, hyper, rng)?;
        debug_assert_eq!(agent.executor_hash(), executor_hash, "frozen executor drifted");
        metrics.push(UpdateMetrics {
            update,
            env_steps: collector.total_env_steps,
            mean_episode_reward: collector.mean_recent_reward(),
            policy_loss: report.policy_loss,
            value_loss: report.value_loss,
            entropy: report.entropy,
            clip_fraction: report.clip_fraction,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    if agent.executor_hash() != executor_hash {
        return Err(PpoError::NonFiniteLoss {
            epoch: 0,
            minibatch: 0,
            detail: "frozen executor parameters changed during training".into(),
        });
    }
    Ok((metrics, collector))
}
