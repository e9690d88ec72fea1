//! Named parameter arrays with gradient accumulators and Adam state.

use std::collections::HashMap;

use rand::Rng;

use super::DiffError;

/// Index of a parameter entry inside a [`ParamStore`]. Stable for the lifetime
/// of the store.
pub type ParamId = usize;

#[derive(Debug, Clone)]
pub(crate) struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    /// Adam first moment.
    pub m: Vec<f64>,
    /// Adam second moment.
    pub v: Vec<f64>,
    /// Frozen entries never receive gradient accumulation or optimizer updates.
    pub frozen: bool,
}

/// Adam hyperparameters with bias correction.
#[derive(Debug, Clone, Copy)]
pub struct AdamHyper {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamHyper {
    pub fn with_lr(lr: f64) -> Self {
        Self {
            lr,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), DiffError> {
        if !(self.lr > 0.0) {
            return Err(DiffError::BadHyper(format!("lr must be > 0, got {}", self.lr)));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(DiffError::BadHyper(format!("{name} must be in (0,1), got {b}")));
            }
        }
        Ok(())
    }
}

/// All learnable weights of a model, addressed by name.
///
/// Single-writer: gradient accumulation and optimizer steps take `&mut self`;
/// forward passes only read values.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    pub(crate) entries: Vec<ParamEntry>,
    index: HashMap<String, ParamId>,
    step: u64,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a parameter with explicit initial values.
    pub fn register(
        &mut self,
        name: &str,
        shape: &[usize],
        value: Vec<f64>,
    ) -> Result<ParamId, DiffError> {
        if self.index.contains_key(name) {
            return Err(DiffError::DuplicateParam(name.to_string()));
        }
        let len: usize = shape.iter().product();
        if value.len() != len {
            return Err(DiffError::ShapeMismatch {
                context: format!("register {name}"),
                expected: len,
                got: value.len(),
            });
        }
        let id = self.entries.len();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            value,
            grad: vec![0.0; len],
            m: vec![0.0; len],
            v: vec![0.0; len],
            frozen: false,
        });
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Registers a weight matrix initialized uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
    pub fn register_uniform(
        &mut self,
        name: &str,
        shape: &[usize],
        fan_in: usize,
        rng: &mut impl Rng,
    ) -> Result<ParamId, DiffError> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let len: usize = shape.iter().product();
        let value = (0..len).map(|_| rng.random_range(-bound..bound)).collect();
        self.register(name, shape, value)
    }

    /// Registers a zero-initialized parameter (biases, layer-norm offsets).
    pub fn register_zeros(&mut self, name: &str, shape: &[usize]) -> Result<ParamId, DiffError> {
        let len: usize = shape.iter().product();
        self.register(name, shape, vec![0.0; len])
    }

    pub fn id(&self, name: &str) -> Result<ParamId, DiffError> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| DiffError::UnknownParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id].name
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        &self.entries[id].shape
    }

    pub fn value(&self, id: ParamId) -> &[f64] {
        &self.entries[id].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.entries[id].value
    }

    pub fn grad(&self, id: ParamId) -> &[f64] {
        &self.entries[id].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut [f64] {
        &mut self.entries[id].grad
    }

    pub fn is_frozen(&self, id: ParamId) -> bool {
        self.entries[id].frozen
    }

    /// Marks every parameter whose name starts with `prefix` as frozen.
    pub fn freeze_prefix(&mut self, prefix: &str) {
        for e in &mut self.entries {
            if e.name.starts_with(prefix) {
                e.frozen = true;
            }
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn num_scalars(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// One Adam update with bias correction over all trainable entries.
    /// Rejects the whole step if any trainable gradient is non-finite.
    /// Gradients are left in place; call [`ParamStore::zero_grads`] to clear them.
    pub fn adam_step(&mut self, hyper: &AdamHyper) -> Result<(), DiffError> {
        hyper.validate()?;
        for e in &self.entries {
            if !e.frozen && e.grad.iter().any(|g| !g.is_finite()) {
                return Err(DiffError::NonFiniteGradient(e.name.clone()));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - hyper.beta1.powi(t);
        let bc2 = 1.0 - hyper.beta2.powi(t);
        for e in &mut self.entries {
            if e.frozen {
                continue;
            }
            for i in 0..e.value.len() {
                let g = e.grad[i];
                e.m[i] = hyper.beta1 * e.m[i] + (1.0 - hyper.beta1) * g;
                e.v[i] = hyper.beta2 * e.v[i] + (1.0 - hyper.beta2) * g * g;
                let m_hat = e.m[i] / bc1;
                let v_hat = e.v[i] / bc2;
                e.value[i] -= hyper.lr * m_hat / (v_hat.sqrt() + hyper.eps);
            }
            if e.value.iter().any(|w| !w.is_finite()) {
                return Err(DiffError::NonFiniteParam(e.name.clone()));
            }
        }
        Ok(())
    }

    /// FNV-1a hash of the frozen entries' exact bit patterns, for the
    /// frozen-executor contract.
    pub fn frozen_hash(&self) -> u64 {
        self.hash_entries(|e| e.frozen)
    }

    /// FNV-1a hash of the exact bit patterns of entries under `prefix`.
    pub fn hash_prefix(&self, prefix: &str) -> u64 {
        self.hash_entries(|e| e.name.starts_with(prefix))
    }

    fn hash_entries(&self, keep: impl Fn(&ParamEntry) -> bool) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |bytes: &[u8]| {
            for &b in bytes {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        for e in self.entries.iter().filter(|e| keep(e)) {
            eat(e.name.as_bytes());
            for w in &e.value {
                eat(&w.to_bits().to_le_bytes());
            }
        }
        h
    }
}
