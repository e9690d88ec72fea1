//! MLP specification, parameter registration, and tape forward pass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::store::{ParamId, ParamStore};
use super::tape::{NodeId, Tape};
use super::DiffError;

pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerNormPos {
    None,
    /// Normalize the input of the final linear layer.
    BeforeLast,
}

/// Architecture of a fully-connected stack: `widths[0]` is the input size,
/// each following width one linear layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub widths: Vec<usize>,
    /// One tag per linear layer (`widths.len() - 1` of them).
    pub activations: Vec<Activation>,
    pub layer_norm: LayerNormPos,
}

impl MlpSpec {
    /// Hidden layers use ReLU, the output layer is linear.
    pub fn relu(widths: Vec<usize>, layer_norm: LayerNormPos) -> Self {
        let n_layers = widths.len().saturating_sub(1);
        let mut activations = vec![Activation::Relu; n_layers];
        if let Some(last) = activations.last_mut() {
            *last = Activation::Identity;
        }
        Self { widths, activations, layer_norm }
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    pub fn validate(&self) -> Result<(), DiffError> {
        if self.widths.len() < 2 {
            return Err(DiffError::BadSpec(format!(
                "need at least input and output widths, got {:?}",
                self.widths
            )));
        }
        if self.widths.contains(&0) {
            return Err(DiffError::BadSpec("widths must be positive".into()));
        }
        if self.activations.len() != self.num_layers() {
            return Err(DiffError::BadSpec(format!(
                "{} activation tags for {} layers",
                self.activations.len(),
                self.num_layers()
            )));
        }
        Ok(())
    }
}

/// Handles to one registered MLP's parameters.
#[derive(Debug, Clone)]
pub struct MlpParams {
    pub spec: MlpSpec,
    pub weights: Vec<ParamId>,
    pub biases: Vec<ParamId>,
    pub ln_gain: Option<ParamId>,
    pub ln_bias: Option<ParamId>,
}

/// Registers all layers of `spec` under `prefix` (`{prefix}.w0`, `{prefix}.b0`, ...).
/// Weights are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero,
/// layer-norm gain one.
pub fn register_mlp(
    store: &mut ParamStore,
    prefix: &str,
    spec: &MlpSpec,
    rng: &mut impl Rng,
) -> Result<MlpParams, DiffError> {
    spec.validate()?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..spec.num_layers() {
        let (fan_in, fan_out) = (spec.widths[l], spec.widths[l + 1]);
        weights.push(store.register_uniform(
            &format!("{prefix}.w{l}"),
            &[fan_out, fan_in],
            fan_in,
            rng,
        )?);
        biases.push(store.register_zeros(&format!("{prefix}.b{l}"), &[fan_out])?);
    }
    let (ln_gain, ln_bias) = if spec.layer_norm == LayerNormPos::BeforeLast {
        let dim = spec.widths[spec.widths.len() - 2];
        let g = store.register(&format!("{prefix}.ln.g"), &[dim], vec![1.0; dim])?;
        let b = store.register_zeros(&format!("{prefix}.ln.b"), &[dim])?;
        (Some(g), Some(b))
    } else {
        (None, None)
    };
    Ok(MlpParams {
        spec: spec.clone(),
        weights,
        biases,
        ln_gain,
        ln_bias,
    })
}

/// Looks up an already-registered MLP (used after loading a checkpoint).
pub fn lookup_mlp(
    store: &ParamStore,
    prefix: &str,
    spec: &MlpSpec,
) -> Result<MlpParams, DiffError> {
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..spec.num_layers() {
        weights.push(store.id(&format!("{prefix}.w{l}"))?);
        biases.push(store.id(&format!("{prefix}.b{l}"))?);
    }
    let (ln_gain, ln_bias) = if spec.layer_norm == LayerNormPos::BeforeLast {
        (
            Some(store.id(&format!("{prefix}.ln.g"))?),
            Some(store.id(&format!("{prefix}.ln.b"))?),
        )
    } else {
        (None, None)
    };
    Ok(MlpParams {
        spec: spec.clone(),
        weights,
        biases,
        ln_gain,
        ln_bias,
    })
}

/// Records the full forward pass of `params` on the tape.
pub fn mlp_forward(
    tape: &mut Tape,
    store: &ParamStore,
    params: &MlpParams,
    x: NodeId,
) -> Result<NodeId, DiffError> {
    let n_layers = params.spec.num_layers();
    let mut h = x;
    for l in 0..n_layers {
        if l + 1 == n_layers && params.spec.layer_norm == LayerNormPos::BeforeLast {
            h = tape.layer_norm(
                store,
                params.ln_gain.unwrap(),
                params.ln_bias.unwrap(),
                LAYER_NORM_EPS,
                h,
            )?;
        }
        h = tape.affine(store, params.weights[l], params.biases[l], h)?;
        if params.spec.activations[l] == Activation::Relu {
            h = tape.relu(h);
        }
    }
    Ok(h)
}
