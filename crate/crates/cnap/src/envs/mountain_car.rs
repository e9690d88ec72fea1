//! MountainCarContinuous dynamics, reimplemented to the published definition.
//!
//! Observation [position, velocity]; one action in [-1, 1]. Each step costs
//! 0.1 * action^2; reaching position >= 0.45 terminates with +100. Episodes
//! truncate at 999 steps.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Env, EnvError, EnvSpec, StepResult};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.45;
pub const POWER: f64 = 0.0015;
pub const GRAVITY: f64 = 0.0025;
pub const MAX_EPISODE_STEPS: usize = 999;

pub struct MountainCar {
    spec: EnvSpec,
    position: f64,
    velocity: f64,
    steps: usize,
    clamp_warnings: u64,
}

impl MountainCar {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                obs_dim: 2,
                action_dim: 1,
                action_bounds: vec![(-1.0, 1.0)],
                max_episode_steps: MAX_EPISODE_STEPS,
            },
            position: -0.5,
            velocity: 0.0,
            steps: 0,
            clamp_warnings: 0,
        }
    }

    /// Number of actions received outside [-1, 1] (clamped, counted).
    pub fn clamp_warnings(&self) -> u64 {
        self.clamp_warnings
    }

    pub fn state(&self) -> (f64, f64) {
        (self.position, self.velocity)
    }

    /// Pure transition function on (position, velocity) with a pre-clamped
    /// action. Exposed for direct dynamics tests.
    pub fn dynamics(position: f64, velocity: f64, action: f64) -> (f64, f64) {
        let mut v = velocity + action * POWER - GRAVITY * (3.0 * position).cos();
        v = v.clamp(-MAX_SPEED, MAX_SPEED);
        let mut p = position + v;
        p = p.clamp(MIN_POSITION, MAX_POSITION);
        if p <= MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        (p, v)
    }
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.position = rng.random_range(-0.6..-0.4);
        self.velocity = 0.0;
        self.steps = 0;
        vec![self.position, self.velocity]
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if action.len() != 1 {
            return Err(EnvError::ActionDim { expected: 1, got: action.len() });
        }
        let mut a = action[0];
        if !(-1.0..=1.0).contains(&a) {
            self.clamp_warnings += 1;
            a = a.clamp(-1.0, 1.0);
        }
        let (p, v) = Self::dynamics(self.position, self.velocity, a);
        self.position = p;
        self.velocity = v;
        self.steps += 1;

        let done = self.position >= GOAL_POSITION;
        let truncated = !done && self.steps >= MAX_EPISODE_STEPS;
        let reward = if done { 100.0 } else { 0.0 } - 0.1 * a * a;
        Ok(StepResult {
            obs: vec![self.position, self.velocity],
            reward,
            done,
            truncated,
        })
    }
}
