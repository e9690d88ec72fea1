//! Generalized advantage estimation.

/// Backward recursion over one stretch of experience:
///
/// ```text
/// delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
/// A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
/// ```
///
/// `bootstrap` stands in for V(s_T) past the end of the slice; `dones[t]`
/// zeroes both the bootstrap and the recursion across terminal boundaries.
/// Returns (advantages, returns) with returns = A + V. Advantage
/// normalization happens once per update, not here.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let t_max = rewards.len();
    assert_eq!(values.len(), t_max);
    assert_eq!(dones.len(), t_max);
    let mut advantages = vec![0.0; t_max];
    let mut next_adv = 0.0;
    for t in (0..t_max).rev() {
        let mask = if dones[t] { 0.0 } else { 1.0 };
        let next_value = if t + 1 < t_max { values[t + 1] } else { bootstrap };
        let delta = rewards[t] + gamma * next_value * mask - values[t];
        next_adv = delta + gamma * lambda * mask * next_adv;
        advantages[t] = next_adv;
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    (advantages, returns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lambda_zero_reduces_to_one_step_deltas() {
        let rewards = [1.0, -0.5, 2.0];
        let values = [0.3, 0.1, -0.2];
        let dones = [false, false, false];
        let (adv, _) = compute_gae(&rewards, &values, &dones, 0.7, 0.9, 0.0);
        for t in 0..3 {
            let next = if t + 1 < 3 { values[t + 1] } else { 0.7 };
            let delta = rewards[t] + 0.9 * next - values[t];
            assert!((adv[t] - delta).abs() < 1e-15);
        }
    }

    #[test]
    fn gamma_zero_gives_reward_minus_value() {
        let rewards = [1.0, 2.0, 3.0];
        let values = [0.5, 0.5, 0.5];
        let dones = [false; 3];
        let (adv, ret) = compute_gae(&rewards, &values, &dones, 9.0, 0.0, 0.95);
        for t in 0..3 {
            assert!((adv[t] - (rewards[t] - values[t])).abs() < 1e-15);
            assert!((ret[t] - rewards[t]).abs() < 1e-15);
        }
    }

    #[test]
    fn random_sequence_matches_independent_recursion() {
        // Straight-line oracle sharing no code with compute_gae.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let t_max = 8;
        let rewards: Vec<f64> = (0..t_max).map(|_| rng.random_range(-1.0..1.0)).collect();
        let values: Vec<f64> = (0..t_max).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dones: Vec<bool> = (0..t_max).map(|_| rng.random::<f64>() < 0.2).collect();
        let bootstrap = rng.random_range(-1.0..1.0);
        let (gamma, lambda) = (0.99, 0.95);

        let mut expect = vec![0.0; t_max];
        for t in 0..t_max {
            // A_t = sum_{l>=0} (gamma*lambda)^l * delta_{t+l}, cut at dones.
            let mut acc = 0.0;
            let mut weight = 1.0;
            for l in t..t_max {
                let mask = if dones[l] { 0.0 } else { 1.0 };
                let next = if l + 1 < t_max { values[l + 1] } else { bootstrap };
                let delta = rewards[l] + gamma * next * mask - values[l];
                acc += weight * delta;
                if dones[l] {
                    break;
                }
                weight *= gamma * lambda;
            }
            expect[t] = acc;
        }

        let (adv, ret) = compute_gae(&rewards, &values, &dones, bootstrap, gamma, lambda);
        for t in 0..t_max {
            assert!((adv[t] - expect[t]).abs() < 1e-12, "t={t}: {} vs {}", adv[t], expect[t]);
            assert!((ret[t] - (expect[t] + values[t])).abs() < 1e-12);
        }
    }

    #[test]
    fn terminal_blocks_bootstrap() {
        let (adv, _) = compute_gae(&[1.0], &[0.4], &[true], 100.0, 0.99, 0.95);
        assert!((adv[0] - (1.0 - 0.4)).abs() < 1e-15);
    }
}
