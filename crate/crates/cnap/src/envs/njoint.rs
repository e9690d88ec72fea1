//! Synthetic N-joint chain: a desk-scale, analytically tractable stand-in for
//! high-dimensional continuous control.
//!
//! D point masses on a line, joined by linear springs with damping; action
//! component i applies a bounded force to mass i. Reward is the forward
//! displacement of the head mass minus 0.001 * ||action||^2. Dynamics are
//! explicit-Euler with constants chosen so the linear system is stable
//! (omega * dt and damping * dt well below 1); see docs/njoint.md for the
//! derivation and the analytic sanity solution.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Env, EnvError, EnvSpec, StepResult};

pub const DT: f64 = 0.05;
pub const SPRING: f64 = 2.0;
pub const DAMPING: f64 = 0.5;
pub const FORCE_GAIN: f64 = 1.0;
pub const REST_LENGTH: f64 = 1.0;
pub const ACTION_COST: f64 = 0.001;
pub const MAX_EPISODE_STEPS: usize = 1000;
/// Hard safety bounds on velocities and link stretches.
pub const STATE_BOUND: f64 = 10.0;

/// Chain of `dim` coupled point masses; observation is the D-1 link
/// stretches followed by the D velocities.
pub struct NJoint {
    spec: EnvSpec,
    dim: usize,
    positions: Vec<f64>,
    velocities: Vec<f64>,
    steps: usize,
}

impl NJoint {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1);
        Self {
            spec: EnvSpec {
                obs_dim: 2 * dim - 1,
                action_dim: dim,
                action_bounds: vec![(-1.0, 1.0); dim],
                max_episode_steps: MAX_EPISODE_STEPS,
            },
            dim,
            positions: (0..dim).map(|i| -(i as f64) * REST_LENGTH).collect(),
            velocities: vec![0.0; dim],
            steps: 0,
        }
    }

    fn observe(&self) -> Vec<f64> {
        let mut obs = Vec::with_capacity(2 * self.dim - 1);
        for i in 0..self.dim - 1 {
            let stretch = self.positions[i] - self.positions[i + 1] - REST_LENGTH;
            obs.push(stretch.clamp(-STATE_BOUND, STATE_BOUND));
        }
        obs.extend(
            self.velocities
                .iter()
                .map(|v| v.clamp(-STATE_BOUND, STATE_BOUND)),
        );
        obs
    }

    pub fn head_position(&self) -> f64 {
        self.positions[0]
    }
}

impl Env for NJoint {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        for i in 0..self.dim {
            // Small positional jitter keeps episodes distinct while staying
            // in the linear regime.
            self.positions[i] = -(i as f64) * REST_LENGTH + rng.random_range(-0.05..0.05);
            self.velocities[i] = 0.0;
        }
        self.steps = 0;
        self.observe()
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if action.len() != self.dim {
            return Err(EnvError::ActionDim { expected: self.dim, got: action.len() });
        }
        let head_before = self.positions[0];
        let mut forces = vec![0.0; self.dim];
        for i in 0..self.dim {
            let a = action[i].clamp(-1.0, 1.0);
            forces[i] += FORCE_GAIN * a;
            forces[i] -= DAMPING * self.velocities[i];
            if i > 0 {
                let stretch = self.positions[i - 1] - self.positions[i] - REST_LENGTH;
                forces[i] += SPRING * stretch;
                forces[i - 1] -= SPRING * stretch;
            }
        }
        for i in 0..self.dim {
            self.velocities[i] =
                (self.velocities[i] + DT * forces[i]).clamp(-STATE_BOUND, STATE_BOUND);
            self.positions[i] += DT * self.velocities[i];
        }
        self.steps += 1;

        let penalty: f64 = action.iter().map(|a| a * a).sum::<f64>() * ACTION_COST;
        let reward = (self.positions[0] - head_before) - penalty;
        let truncated = self.steps >= MAX_EPISODE_STEPS;
        Ok(StepResult {
            obs: self.observe(),
            reward,
            done: false,
            truncated,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn zero_action_from_rest_gives_zero_reward() {
        let mut env = NJoint::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        env.reset(&mut rng);
        // Remove jitter: exact rest configuration.
        for i in 0..4 {
            env.positions[i] = -(i as f64) * REST_LENGTH;
            env.velocities[i] = 0.0;
        }
        let res = env.step(&[0.0; 4]).unwrap();
        assert_eq!(res.reward, 0.0);
        assert_eq!(env.head_position(), 0.0);
    }

    #[test]
    fn action_penalty_closed_form() {
        let mut env = NJoint::new(6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        env.reset(&mut rng);
        let before = env.head_position();
        let res = env.step(&[1.0; 6]).unwrap();
        let displacement = env.head_position() - before;
        let penalty = res.reward - displacement;
        assert!((penalty + 0.006).abs() < 1e-12, "penalty {penalty}");
    }

    #[test]
    fn state_stays_bounded_under_random_actions() {
        let mut env = NJoint::new(6);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        env.reset(&mut rng);
        for _ in 0..10_000 {
            let a: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let res = env.step(&a).unwrap();
            assert!(res.obs.iter().all(|v| v.is_finite() && v.abs() <= STATE_BOUND));
            if res.truncated {
                env.reset(&mut rng);
            }
        }
        assert!(env.positions.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn constant_forward_force_approaches_terminal_velocity() {
        // Uncoupled head-mass analytic check: with all masses pushed equally
        // the springs stay at rest length, so each mass obeys
        // v' = F - c v, whose fixed point is F/c = 2.
        let mut env = NJoint::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        env.reset(&mut rng);
        for i in 0..3 {
            env.positions[i] = -(i as f64) * REST_LENGTH;
            env.velocities[i] = 0.0;
        }
        for _ in 0..600 {
            env.step(&[1.0; 3]).unwrap();
        }
        let terminal = FORCE_GAIN / DAMPING;
        for v in &env.velocities {
            assert!((v - terminal).abs() < 0.05, "v = {v}, terminal = {terminal}");
        }
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut env = NJoint::new(2);
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let mut out = vec![env.reset(&mut rng)];
            let mut arng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..100 {
                let a: Vec<f64> = (0..2).map(|_| arng.random_range(-1.0..1.0)).collect();
                out.push(env.step(&a).unwrap().obs);
            }
            out
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut env = NJoint::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        env.reset(&mut rng);
        assert!(matches!(
            env.step(&[0.0, 0.0]),
            Err(EnvError::ActionDim { expected: 3, got: 2 })
        ));
    }
}
