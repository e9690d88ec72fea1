//! Clipped-surrogate PPO update over a finalized rollout buffer.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::rollout::RolloutBuffer;
use super::{PpoError, PpoHyper};
use crate::agent::Agent;
use crate::diffcore::AdamHyper;

/// Aggregate loss statistics over one update.
#[derive(Debug, Clone, Default)]
pub struct LossReport {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// Runs `epochs` passes of shuffled minibatches over the buffer. Each sample
/// replays the agent's forward pass with its stored planning seed, so the
/// importance ratio is exactly 1 before the first parameter step. Frozen
/// executor parameters receive no updates by construction.
pub fn ppo_update(
    agent: &mut Agent,
    buffer: &RolloutBuffer,
    hyper: &PpoHyper,
    rng: &mut ChaCha8Rng,
) -> Result<LossReport, PpoError> {
    assert!(!buffer.is_empty(), "buffer must be collected before updating");
    assert_eq!(buffer.advantages.len(), buffer.len(), "buffer must be finalized");

    // Advantages normalized once per update (mean 0, std 1).
    let n = buffer.len() as f64;
    let mean = buffer.advantages.iter().sum::<f64>() / n;
    let var = buffer.advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    let advantages: Vec<f64> = buffer.advantages.iter().map(|a| (a - mean) / std).collect();

    let adam = AdamHyper::with_lr(hyper.lr);
    let mut report = LossReport::default();
    let mut clipped = 0usize;
    let mut total_samples = 0usize;

    let mut indices: Vec<usize> = (0..buffer.len()).collect();
    for epoch in 0..hyper.epochs {
        indices.shuffle(rng);
        for (mb_idx, chunk) in indices.chunks(hyper.minibatch_size.max(1)).enumerate() {
            let weight = 1.0 / chunk.len() as f64;
            let mut mb_policy = 0.0;
            let mut mb_value = 0.0;
            let mut mb_entropy = 0.0;
            for &i in chunk {
                let step = &buffer.steps[i];
                let mut tape = crate::diffcore::Tape::new();
                let fwd = agent.forward(&mut tape, &step.obs_normalized, step.planning_seed)?;
                let new_lp = fwd.policy.joint_log_prob(&mut tape, &step.action);
                let old_lp = tape.constant_scalar(step.log_prob);
                let diff = tape.sub(new_lp, old_lp);
                let ratio = tape.exp(diff);
                let surr_raw = tape.scale(ratio, advantages[i]);
                let ratio_clipped = tape.clamp(ratio, 1.0 - hyper.clip, 1.0 + hyper.clip);
                let surr_clipped = tape.scale(ratio_clipped, advantages[i]);
                let objective = tape.min2(surr_raw, surr_clipped);
                let policy_loss = tape.scale(objective, -1.0);

                let ret = tape.constant_scalar(buffer.returns[i]);
                let verr = tape.sub(fwd.value, ret);
                let value_loss = tape.mul(verr, verr);

                let entropy = fwd.policy.entropy(&mut tape);

                let scaled_value = tape.scale(value_loss, hyper.value_coef);
                let scaled_entropy = tape.scale(entropy, -hyper.entropy_coef);
                let mut total = tape.add(policy_loss, scaled_value);
                total = tape.add(total, scaled_entropy);

                if hyper.aux_transition_coef > 0.0 {
                    let next_h = agent.transition_action(&mut tape, fwd.embedding, &step.action)?;
                    let target = agent.encode(&mut tape, &step.next_obs_normalized)?;
                    let d = tape.sub(next_h, target);
                    let sq = tape.mul(d, d);
                    let dist = tape.sum(sq);
                    let hinged = tape.add_const(dist, -AUX_HINGE_MARGIN);
                    let hinge = tape.relu(hinged);
                    let scaled = tape.scale(hinge, hyper.aux_transition_coef);
                    total = tape.add(total, scaled);
                }

                let loss_value = tape.scalar(total);
                if !loss_value.is_finite() {
                    return Err(PpoError::NonFiniteLoss {
                        epoch,
                        minibatch: mb_idx,
                        detail: format!(
                            "sample {i}: policy={} value={} entropy={} ratio={} advantage={}",
                            tape.scalar(policy_loss),
                            tape.scalar(value_loss),
                            tape.scalar(entropy),
                            tape.scalar(ratio),
                            advantages[i]
                        ),
                    });
                }
                tape.backward(&mut agent.store, total, weight);

                mb_policy += tape.scalar(policy_loss);
                mb_value += tape.scalar(value_loss);
                mb_entropy += tape.scalar(entropy);
                if (tape.scalar(ratio) - 1.0).abs() > hyper.clip {
                    clipped += 1;
                }
                total_samples += 1;
            }
            agent.store.adam_step(&adam).map_err(|e| PpoError::NonFiniteLoss {
                epoch,
                minibatch: mb_idx,
                detail: e.to_string(),
            })?;
            agent.store.zero_grads();

            report.policy_loss += mb_policy / chunk.len() as f64;
            report.value_loss += mb_value / chunk.len() as f64;
            report.entropy += mb_entropy / chunk.len() as f64;
            report.minibatches += 1;
        }
    }
    let m = report.minibatches.max(1) as f64;
    report.policy_loss /= m;
    report.value_loss /= m;
    report.entropy /= m;
    report.clip_fraction = clipped as f64 / total_samples.max(1) as f64;
    Ok(report)
}

/// Margin of the optional transition-consistency hinge.
pub const AUX_HINGE_MARGIN: f64 = 0.5;
