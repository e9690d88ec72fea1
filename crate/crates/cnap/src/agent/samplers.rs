//! Neighbor-sampling strategies for planning-graph expansion.
//!
//! Each strategy picks K action vectors to expand from a node. The two
//! learned strategies return tape-resident straight-through encodings so the
//! sampling heads receive gradient through the PPO loss; the nonparametric
//! ones return constant encodings.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::grid::{one_hot_encoding, ActionGrid, ActionVector};
use super::policy::FactorizedPolicy;
use super::AgentError;
use crate::diffcore::{
    gumbel_noise, gumbel_softmax, mlp_forward, MlpParams, NodeId, ParamStore, Tape,
    LOG_SIGMA_MAX, LOG_SIGMA_MIN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerKind {
    /// Expand every binned action (feasible only while N^D stays small).
    Exhaustive,
    /// Fixed Normal(N/2, N/4) per dimension, rounded and clamped.
    ManualGaussian,
    /// Linear mean and log-std heads on the state embedding, reparameterized.
    LearnedGaussian,
    /// Draw from the policy head evaluated at (h, 0).
    ReusePolicy,
    /// Dedicated linear head over N*D logits with hard Gumbel-Softmax.
    LearnedSampling,
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SamplerKind::Exhaustive => "exhaustive",
            SamplerKind::ManualGaussian => "manual-gaussian",
            SamplerKind::LearnedGaussian => "learned-gaussian",
            SamplerKind::ReusePolicy => "reuse-policy",
            SamplerKind::LearnedSampling => "learned-sampling",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exhaustive" => Ok(Self::Exhaustive),
            "manual-gaussian" => Ok(Self::ManualGaussian),
            "learned-gaussian" => Ok(Self::LearnedGaussian),
            "reuse-policy" => Ok(Self::ReusePolicy),
            "learned-sampling" => Ok(Self::LearnedSampling),
            other => Err(format!("unknown sampler: {other}")),
        }
    }
}

/// One sampled expansion action plus its N*D encoding on the tape.
#[derive(Debug, Clone)]
pub struct SampledAction {
    pub action: ActionVector,
    pub encoding: NodeId,
}

fn constant_encoding(tape: &mut Tape, action: &ActionVector, bins: usize) -> SampledAction {
    let enc = tape.constant(one_hot_encoding(action, bins));
    SampledAction { action: action.clone(), encoding: enc }
}

/// All N^D actions in lexicographic order.
pub fn exhaustive_actions(tape: &mut Tape, grid: &ActionGrid) -> Vec<SampledAction> {
    let mut out = Vec::new();
    let mut idx = vec![0usize; grid.dims];
    loop {
        out.push(constant_encoding(tape, &ActionVector(idx.clone()), grid.bins));
        let mut d = grid.dims;
        loop {
            if d == 0 {
                return out;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < grid.bins {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// Per-dimension draw from Normal(N/2, N/4), rounded to the nearest whole
/// number and clamped into [0, N-1].
pub fn sample_manual_gaussian(
    tape: &mut Tape,
    grid: &ActionGrid,
    budget: usize,
    rng: &mut impl Rng,
) -> Vec<SampledAction> {
    let n = grid.bins as f64;
    let normal = Normal::new(n / 2.0, n / 4.0).expect("valid normal parameters");
    (0..budget)
        .map(|_| {
            let av = ActionVector(
                (0..grid.dims)
                    .map(|_| clamp_round(normal.sample(rng), grid.bins))
                    .collect(),
            );
            constant_encoding(tape, &av, grid.bins)
        })
        .collect()
}

pub(crate) fn clamp_round(raw: f64, bins: usize) -> usize {
    raw.round().clamp(0.0, (bins - 1) as f64) as usize
}

/// Linear heads estimate a mean and log-std per dimension; samples come from
/// the reparameterization mu + exp(log_sigma) * noise, are rounded and
/// clamped for expansion, and keep gradients through the pre-rounding values
/// (straight-through).
#[allow(clippy::too_many_arguments)]
pub fn sample_learned_gaussian(
    tape: &mut Tape,
    store: &ParamStore,
    mu_head: &MlpParams,
    sigma_head: &MlpParams,
    h: NodeId,
    grid: &ActionGrid,
    budget: usize,
    rng: &mut impl Rng,
) -> Result<Vec<SampledAction>, AgentError> {
    let mu = mlp_forward(tape, store, mu_head, h)?;
    let ls_raw = mlp_forward(tape, store, sigma_head, h)?;
    let ls = tape.clamp(ls_raw, LOG_SIGMA_MIN, LOG_SIGMA_MAX);
    let mut out = Vec::with_capacity(budget);
    for _ in 0..budget {
        let noise: Vec<f64> = (0..grid.dims)
            .map(|_| rand_distr::StandardNormal.sample(rng))
            .collect();
        let u = tape.gauss_reparam(mu, ls, &noise)?;
        let mut one_hots = Vec::with_capacity(grid.dims);
        let mut indices = Vec::with_capacity(grid.dims);
        for d in 0..grid.dims {
            let u_d = tape.gather(u, d);
            indices.push(clamp_round(tape.scalar(u_d), grid.bins));
            one_hots.push(tape.st_round_one_hot(u_d, grid.bins));
        }
        let encoding = tape.concat(&one_hots);
        out.push(SampledAction { action: ActionVector(indices), encoding });
    }
    Ok(out)
}

/// Reuses the policy head as the sampling distribution, substituting a zero
/// vector for the executor output that is not yet available.
#[allow(clippy::too_many_arguments)]
pub fn sample_reuse_policy(
    tape: &mut Tape,
    store: &ParamStore,
    policy_head: &MlpParams,
    h: NodeId,
    hidden_dim: usize,
    grid: &ActionGrid,
    budget: usize,
    rng: &mut impl Rng,
) -> Result<Vec<SampledAction>, AgentError> {
    let placeholder = tape.zeros(hidden_dim);
    let hx = tape.concat(&[h, placeholder]);
    let flat = mlp_forward(tape, store, policy_head, hx)?;
    let policy = FactorizedPolicy::from_flat(tape, flat, grid.dims, grid.bins);
    Ok((0..budget)
        .map(|_| {
            let av = policy.sample(tape, rng);
            constant_encoding(tape, &av, grid.bins)
        })
        .collect())
}

/// Dedicated linear head producing N*D logits read as D categoricals; actions
/// are drawn with hard (straight-through) Gumbel-Softmax so the head trains
/// end-to-end.
#[allow(clippy::too_many_arguments)]
pub fn sample_learned(
    tape: &mut Tape,
    store: &ParamStore,
    sampler_head: &MlpParams,
    h: NodeId,
    grid: &ActionGrid,
    budget: usize,
    temperature: f64,
    rng: &mut impl Rng,
) -> Result<Vec<SampledAction>, AgentError> {
    if !(temperature > 0.0) {
        return Err(AgentError::BadTemperature(temperature));
    }
    let flat = mlp_forward(tape, store, sampler_head, h)?;
    debug_assert_eq!(tape.value(flat).len(), grid.bins * grid.dims);
    let slices: Vec<NodeId> = (0..grid.dims)
        .map(|d| tape.slice(flat, d * grid.bins, grid.bins))
        .collect();
    let mut out = Vec::with_capacity(budget);
    for _ in 0..budget {
        let mut one_hots = Vec::with_capacity(grid.dims);
        let mut indices = Vec::with_capacity(grid.dims);
        for &slice in &slices {
            let noise = gumbel_noise(rng, grid.bins);
            let hard = gumbel_softmax(tape, slice, temperature, &noise, true)?;
            let idx = tape
                .value(hard)
                .iter()
                .position(|v| *v == 1.0)
                .expect("hard sample is one-hot");
            indices.push(idx);
            one_hots.push(hard);
        }
        let encoding = tape.concat(&one_hots);
        out.push(SampledAction { action: ActionVector(indices), encoding });
    }
    Ok(out)
}
