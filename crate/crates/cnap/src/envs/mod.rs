//! Deterministic, seedable environments and the shared environment contract.

mod mountain_car;
mod njoint;

pub use mountain_car::MountainCar;
pub use njoint::NJoint;

use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("unknown environment name: {0}")]
    UnknownName(String),
    #[error("action dimension mismatch: expected {expected}, got {got}")]
    ActionDim { expected: usize, got: usize },
}

/// Static description of an environment's interface.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Per-dimension (low, high), with low < high.
    pub action_bounds: Vec<(f64, f64)>,
    pub max_episode_steps: usize,
}

impl EnvSpec {
    pub fn validate(&self) {
        assert!(self.obs_dim > 0 && self.action_dim > 0 && self.max_episode_steps > 0);
        assert_eq!(self.action_bounds.len(), self.action_dim);
        for (lo, hi) in &self.action_bounds {
            assert!(lo < hi, "bad action bounds ({lo}, {hi})");
        }
    }
}

/// Outcome of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// True termination (goal/failure), not the time limit.
    pub done: bool,
    /// Episode cut by the step limit.
    pub truncated: bool,
}

/// A single-threaded environment instance. Instances are independent; run as
/// many in parallel as you like.
pub trait Env {
    fn spec(&self) -> &EnvSpec;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64>;
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;
}

/// Builds an environment from its config-file name:
/// "mountaincar-continuous", "njoint-2", "njoint-6", or "njoint-17".
pub fn env_by_name(name: &str) -> Result<Box<dyn Env>, EnvError> {
    match name {
        "mountaincar-continuous" => Ok(Box::new(MountainCar::new())),
        "njoint-2" => Ok(Box::new(NJoint::new(2))),
        "njoint-6" => Ok(Box::new(NJoint::new(6))),
        "njoint-17" => Ok(Box::new(NJoint::new(17))),
        other => Err(EnvError::UnknownName(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_resolve() {
        for name in ["mountaincar-continuous", "njoint-2", "njoint-6", "njoint-17"] {
            let env = env_by_name(name).unwrap();
            env.spec().validate();
        }
        assert!(env_by_name("cartpole").is_err());
    }
}
