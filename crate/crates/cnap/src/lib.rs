//! Continuous Neural Algorithmic Planner (CNAP).
//!
//! A value-iteration-simulating message-passing executor embedded in a
//! PPO-trained agent, extended to continuous action spaces via binning, a
//! factorized joint policy, and budgeted neighbor sampling during
//! planning-graph construction.
//!
//! Module map:
//! - [`diffcore`] — parameter store, reverse-mode tape, MLPs, Adam, stochastic
//!   relaxations, gradient checking, checkpoints.
//! - [`vioracle`] — exact value iteration over tabular MDPs.
//! - [`graphgen`] — synthetic MDP generators and per-step supervision data.
//! - [`executor`] — the message-passing processor pretrained to imitate value
//!   iteration, frozen inside the agent.
//! - [`envs`] — deterministic MountainCarContinuous and a synthetic N-joint
//!   chain environment.
//! - [`agent`] — encoder, latent transition, discretization, samplers,
//!   planning graph, factorized policy and value heads.
//! - [`ppo`] — clipped-objective PPO with GAE.
//! - [`harness`] — experiment configs, sweeps, evaluation, CSV/SVG output.

// `!(x > 0.0)` guards reject NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Indexed loops over parallel arrays are the clearer form for this math.
#![allow(clippy::needless_range_loop)]

pub mod agent;
pub mod diffcore;
pub mod envs;
pub mod executor;
pub mod graphgen;
pub mod harness;
pub mod ppo;
pub mod vioracle;
