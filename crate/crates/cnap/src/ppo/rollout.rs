//! Rollout collection into fixed-horizon buffers.

use std::collections::VecDeque;

use rand::Rng as _;
use rand_chacha::ChaCha8Rng;

use super::{PpoError, RolloutMode};
use crate::agent::{ActionVector, Agent};
use crate::envs::Env;
use crate::ppo::gae::compute_gae;

/// One stored environment step, with everything needed to replay the
/// agent's forward pass during updates.
#[derive(Debug, Clone)]
pub struct Transition {
    pub obs_normalized: Vec<f64>,
    pub action: ActionVector,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
    pub truncated: bool,
    pub planning_seed: u64,
    pub next_obs_normalized: Vec<f64>,
}

/// Fixed-horizon storage for one update's worth of experience. Advantages
/// and returns are appended by [`RolloutBuffer::finalize`] before use.
#[derive(Debug, Default)]
pub struct RolloutBuffer {
    pub steps: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    /// Total rewards of episodes completed during this rollout.
    pub completed_episodes: Vec<f64>,
    /// V(s_T) for a rollout cut mid-episode (steps mode).
    pub tail_bootstrap: f64,
}

impl RolloutBuffer {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Computes GAE per episode segment. Done segments bootstrap zero;
    /// truncated segments and the rollout tail bootstrap the value of the
    /// observation that followed.
    pub fn finalize(&mut self, gamma: f64, lambda: f64, segment_bootstraps: &[f64]) {
        assert!(self.advantages.is_empty(), "finalize runs once");
        let mut seg_start = 0;
        let mut seg_idx = 0;
        for t in 0..self.steps.len() {
            let boundary = self.steps[t].done
                || self.steps[t].truncated
                || t + 1 == self.steps.len();
            if !boundary {
                continue;
            }
            let seg = &self.steps[seg_start..=t];
            let rewards: Vec<f64> = seg.iter().map(|s| s.reward).collect();
            let values: Vec<f64> = seg.iter().map(|s| s.value).collect();
            let dones: Vec<bool> = seg.iter().map(|s| s.done).collect();
            let bootstrap = if self.steps[t].done {
                0.0
            } else {
                segment_bootstraps[seg_idx]
            };
            let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
            self.advantages.extend(adv);
            self.returns.extend(ret);
            seg_start = t + 1;
            seg_idx += 1;
        }
        debug_assert_eq!(self.advantages.len(), self.steps.len());
    }
}

/// Owns the environment and cross-rollout episode state so steps-mode
/// rollouts can cut episodes mid-flight.
pub struct RolloutCollector {
    pub env: Box<dyn Env>,
    current_obs: Option<Vec<f64>>,
    episode_reward: f64,
    /// Rewards of the most recent completed episodes (capped at 100).
    pub recent_episodes: VecDeque<f64>,
    pub total_env_steps: u64,
    pub total_episodes: u64,
}

impl RolloutCollector {
    pub fn new(env: Box<dyn Env>) -> Self {
        Self {
            env,
            current_obs: None,
            episode_reward: 0.0,
            recent_episodes: VecDeque::with_capacity(101),
            total_env_steps: 0,
            total_episodes: 0,
        }
    }

    pub fn mean_recent_reward(&self) -> f64 {
        if self.recent_episodes.is_empty() {
            return 0.0;
        }
        self.recent_episodes.iter().sum::<f64>() / self.recent_episodes.len() as f64
    }

    fn record_episode(&mut self, total: f64) {
        self.total_episodes += 1;
        self.recent_episodes.push_back(total);
        if self.recent_episodes.len() > 100 {
            self.recent_episodes.pop_front();
        }
    }

    /// Gathers one buffer of experience, updating the agent's observation
    /// normalizer on every raw observation as it arrives. Returns the buffer
    /// plus per-segment bootstrap values for [`RolloutBuffer::finalize`].
    pub fn collect(
        &mut self,
        agent: &mut Agent,
        mode: &RolloutMode,
        rng: &mut ChaCha8Rng,
    ) -> Result<(RolloutBuffer, Vec<f64>), PpoError> {
        let mut buffer = RolloutBuffer::default();
        let mut bootstraps = Vec::new();
        let mut episodes_done = 0usize;
        loop {
            let obs = match self.current_obs.take() {
                Some(o) => o,
                None => {
                    let o = self.env.reset(rng);
                    agent.update_obs_normalizer(&o);
                    self.episode_reward = 0.0;
                    o
                }
            };
            let decision = agent.act(&obs, rng)?;
            let step = self.env.step(&decision.continuous)?;
            agent.update_obs_normalizer(&step.obs);
            self.total_env_steps += 1;
            self.episode_reward += step.reward;

            let next_obs_normalized = agent.normalize_obs(&step.obs)?;
            buffer.steps.push(Transition {
                obs_normalized: decision.obs_normalized,
                action: decision.action,
                log_prob: decision.log_prob,
                value: decision.value,
                reward: step.reward,
                done: step.done,
                truncated: step.truncated,
                planning_seed: decision.planning_seed,
                next_obs_normalized: next_obs_normalized.clone(),
            });

            let episode_over = step.done || step.truncated;
            if episode_over {
                self.record_episode(self.episode_reward);
                episodes_done += 1;
                self.current_obs = None;
                if step.done {
                    bootstraps.push(0.0);
                } else {
                    let seed = rng.random::<u64>();
                    bootstraps.push(agent.evaluate_value(&next_obs_normalized, seed)?);
                }
            } else {
                self.current_obs = Some(step.obs);
            }

            let full = match mode {
                RolloutMode::Episodes(n) => episodes_done >= *n,
                RolloutMode::Steps(t) => buffer.len() >= *t,
            };
            if full {
                if !episode_over {
                    let seed = rng.random::<u64>();
                    bootstraps.push(agent.evaluate_value(&next_obs_normalized, seed)?);
                }
                break;
            }
        }
        Ok((buffer, bootstraps))
    }
}
