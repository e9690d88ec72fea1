//! Minimal differentiable-computation substrate.
//!
//! Everything learned in this crate is built on three pieces: a [`ParamStore`]
//! holding named parameter arrays with gradient accumulators and Adam state, a
//! [`Tape`] recording vector-valued operations for reverse-mode differentiation,
//! and a handful of stochastic relaxations (reparameterized Gaussians,
//! Gumbel-Softmax) with injectable noise so every run is reproducible.
//!
//! Values are `f64` end to end; checkpoints serialize as little-endian `f32`
//! (see [`checkpoint`]).

mod checkpoint;
mod distributions;
mod gradcheck;
mod mlp;
mod store;
mod tape;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointArray};
pub use distributions::{gumbel_noise, gumbel_softmax, Categorical};
pub use gradcheck::{grad_check, grad_check_with};
pub use mlp::{lookup_mlp, mlp_forward, register_mlp, Activation, LayerNormPos, MlpParams, MlpSpec};
pub use store::{AdamHyper, ParamId, ParamStore};
pub use tape::{NodeId, Tape};

/// Clamp range for log-standard-deviations of learned Gaussian heads.
pub const LOG_SIGMA_MIN: f64 = -5.0;
pub const LOG_SIGMA_MAX: f64 = 2.0;

#[derive(Debug, thiserror::Error)]
pub enum DiffError {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error("parameter {0} already registered")]
    DuplicateParam(String),
    #[error("unknown parameter {0}")]
    UnknownParam(String),
    #[error("non-finite gradient in parameter {0}")]
    NonFiniteGradient(String),
    #[error("non-finite value in parameter {0} after optimizer step")]
    NonFiniteParam(String),
    #[error("non-finite loss")]
    NonFiniteLoss,
    #[error("temperature must be > 0, got {0}")]
    BadTemperature(f64),
    #[error("invalid hyperparameter: {0}")]
    BadHyper(String),
    #[error("invalid mlp spec: {0}")]
    BadSpec(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
