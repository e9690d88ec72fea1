//! Reverse-mode automatic differentiation over vector-valued nodes.
//!
//! Each forward pass records operations into a fresh [`Tape`]; `backward`
//! replays them in reverse, accumulating parameter gradients directly into the
//! owning [`ParamStore`]. Weight matrices are referenced by [`ParamId`] rather
//! than copied onto the tape, so recording a pass costs one allocation per
//! intermediate vector.
//!
//! Scalars are length-1 vectors; there is no broadcasting.

use super::store::{ParamId, ParamStore};
use super::DiffError;

pub type NodeId = usize;

#[derive(Debug, Clone)]
enum Op {
    /// External input or fixed value; no gradient flows past it.
    Constant,
    /// y = W x + b.
    Affine { w: ParamId, b: ParamId, x: NodeId },
    /// y = p (direct read of a parameter vector).
    ParamVec { p: ParamId },
    Add { a: NodeId, b: NodeId },
    Sub { a: NodeId, b: NodeId },
    /// Elementwise product.
    Mul { a: NodeId, b: NodeId },
    Relu { x: NodeId },
    /// y = gain ⊙ (x - mean)/sqrt(var + eps) + bias.
    LayerNorm {
        x: NodeId,
        gain: ParamId,
        bias: ParamId,
        mean: f64,
        inv_std: f64,
    },
    Concat { parts: Vec<NodeId> },
    Slice { x: NodeId, start: usize },
    /// Elementwise max over several equal-length vectors; `argmax[i]` is the
    /// index (into `inputs`) of the winning vector for component i.
    MaxPool { inputs: Vec<NodeId>, argmax: Vec<u32> },
    Softmax { x: NodeId },
    LogSoftmax { x: NodeId },
    /// Length-1 output picking component `idx`.
    Gather { x: NodeId, idx: usize },
    Sum { x: NodeId },
    Mean { x: NodeId },
    Scale { x: NodeId, c: f64 },
    AddConst { x: NodeId },
    Exp { x: NodeId },
    /// Elementwise min; gradient routed to the smaller argument (ties to `b`,
    /// so a clipped-surrogate tie follows the clipped branch).
    Min2 { a: NodeId, b: NodeId },
    /// clamp(x, lo, hi); gradient passes only where lo < x < hi.
    Clamp { x: NodeId, lo: f64, hi: f64 },
    /// mu + exp(log_sigma) ⊙ noise.
    GaussReparam {
        mu: NodeId,
        log_sigma: NodeId,
        noise: Vec<f64>,
    },
    /// Forward: exact one-hot of argmax(soft). Backward: identity to `soft`
    /// (straight-through).
    StHardOneHot { soft: NodeId },
    /// Forward: one-hot of clamp(round(u), 0, n-1) for a length-1 input u.
    /// Backward: gradient of the two-bin linear interpolation
    /// (1-t)·e_lo + t·e_{lo+1}, zero where the clamp is active.
    StRoundOneHot { u: NodeId, lo: usize, interior: bool },
}

struct Node {
    value: Vec<f64>,
    op: Op,
}

/// A Wengert list for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::with_capacity(256) }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id].value
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        debug_assert_eq!(self.nodes[id].value.len(), 1);
        self.nodes[id].value[0]
    }

    fn push(&mut self, value: Vec<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn constant(&mut self, value: Vec<f64>) -> NodeId {
        self.push(value, Op::Constant)
    }

    pub fn constant_scalar(&mut self, value: f64) -> NodeId {
        self.constant(vec![value])
    }

    pub fn zeros(&mut self, len: usize) -> NodeId {
        self.constant(vec![0.0; len])
    }

    /// Reads a parameter vector onto the tape (used for head biases acting as
    /// standalone vectors). Gradient accumulates into the parameter.
    pub fn param_vec(&mut self, store: &ParamStore, p: ParamId) -> NodeId {
        self.push(store.value(p).to_vec(), Op::ParamVec { p })
    }

    /// y = W x + b with W of shape [rows, cols].
    pub fn affine(
        &mut self,
        store: &ParamStore,
        w: ParamId,
        b: ParamId,
        x: NodeId,
    ) -> Result<NodeId, DiffError> {
        let shape = store.shape(w);
        let (rows, cols) = (shape[0], shape[1]);
        let xv = &self.nodes[x].value;
        if xv.len() != cols {
            return Err(DiffError::ShapeMismatch {
                context: format!("affine layer {}", store.name(w)),
                expected: cols,
                got: xv.len(),
            });
        }
        let wv = store.value(w);
        let bv = store.value(b);
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &wv[r * cols..(r + 1) * cols];
            let mut acc = bv[r];
            for (wi, xi) in row.iter().zip(xv.iter()) {
                acc += wi * xi;
            }
            out.push(acc);
        }
        Ok(self.push(out, Op::Affine { w, b, x }))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        debug_assert_eq!(self.nodes[a].value.len(), self.nodes[b].value.len());
        let out = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| x + y)
            .collect();
        self.push(out, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        debug_assert_eq!(self.nodes[a].value.len(), self.nodes[b].value.len());
        let out = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| x - y)
            .collect();
        self.push(out, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        debug_assert_eq!(self.nodes[a].value.len(), self.nodes[b].value.len());
        let out = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| x * y)
            .collect();
        self.push(out, Op::Mul { a, b })
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let out = self.nodes[x].value.iter().map(|v| v.max(0.0)).collect();
        self.push(out, Op::Relu { x })
    }

    /// Per-vector normalization with learned gain and bias.
    pub fn layer_norm(
        &mut self,
        store: &ParamStore,
        gain: ParamId,
        bias: ParamId,
        eps: f64,
        x: NodeId,
    ) -> Result<NodeId, DiffError> {
        let xv = &self.nodes[x].value;
        let n = xv.len();
        if store.value(gain).len() != n || store.value(bias).len() != n {
            return Err(DiffError::ShapeMismatch {
                context: format!("layer_norm {}", store.name(gain)),
                expected: n,
                got: store.value(gain).len(),
            });
        }
        let mean = xv.iter().sum::<f64>() / n as f64;
        let var = xv.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let inv_std = 1.0 / (var + eps).sqrt();
        let g = store.value(gain);
        let b = store.value(bias);
        let out = xv
            .iter()
            .enumerate()
            .map(|(i, v)| g[i] * (v - mean) * inv_std + b[i])
            .collect();
        Ok(self.push(out, Op::LayerNorm { x, gain, bias, mean, inv_std }))
    }

    pub fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut out = Vec::new();
        for &p in parts {
            out.extend_from_slice(&self.nodes[p].value);
        }
        self.push(out, Op::Concat { parts: parts.to_vec() })
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        let out = self.nodes[x].value[start..start + len].to_vec();
        self.push(out, Op::Slice { x, start })
    }

    /// Elementwise max over `inputs` (all the same length). Ties go to the
    /// earliest input, which keeps the result invariant under permutations of
    /// equal values and deterministic otherwise.
    pub fn max_pool(&mut self, inputs: &[NodeId]) -> NodeId {
        assert!(!inputs.is_empty());
        let n = self.nodes[inputs[0]].value.len();
        let mut out = self.nodes[inputs[0]].value.clone();
        let mut argmax = vec![0u32; n];
        for (k, &id) in inputs.iter().enumerate().skip(1) {
            let v = &self.nodes[id].value;
            debug_assert_eq!(v.len(), n);
            for i in 0..n {
                if v[i] > out[i] {
                    out[i] = v[i];
                    argmax[i] = k as u32;
                }
            }
        }
        self.push(out, Op::MaxPool { inputs: inputs.to_vec(), argmax })
    }

    /// Overflow-safe softmax.
    pub fn softmax(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let m = xv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut out: Vec<f64> = xv.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = out.iter().sum();
        out.iter_mut().for_each(|v| *v /= z);
        self.push(out, Op::Softmax { x })
    }

    pub fn log_softmax(&mut self, x: NodeId) -> NodeId {
        let xv = &self.nodes[x].value;
        let m = xv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + xv.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let out = xv.iter().map(|v| v - lse).collect();
        self.push(out, Op::LogSoftmax { x })
    }

    pub fn gather(&mut self, x: NodeId, idx: usize) -> NodeId {
        let v = self.nodes[x].value[idx];
        self.push(vec![v], Op::Gather { x, idx })
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let v = self.nodes[x].value.iter().sum();
        self.push(vec![v], Op::Sum { x })
    }

    pub fn mean(&mut self, x: NodeId) -> NodeId {
        let n = self.nodes[x].value.len() as f64;
        let v = self.nodes[x].value.iter().sum::<f64>() / n;
        self.push(vec![v], Op::Mean { x })
    }

    pub fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let out = self.nodes[x].value.iter().map(|v| v * c).collect();
        self.push(out, Op::Scale { x, c })
    }

    pub fn add_const(&mut self, x: NodeId, c: f64) -> NodeId {
        let out = self.nodes[x].value.iter().map(|v| v + c).collect();
        self.push(out, Op::AddConst { x })
    }

    pub fn exp(&mut self, x: NodeId) -> NodeId {
        let out = self.nodes[x].value.iter().map(|v| v.exp()).collect();
        self.push(out, Op::Exp { x })
    }

    pub fn min2(&mut self, a: NodeId, b: NodeId) -> NodeId {
        debug_assert_eq!(self.nodes[a].value.len(), self.nodes[b].value.len());
        let out = self.nodes[a]
            .value
            .iter()
            .zip(&self.nodes[b].value)
            .map(|(x, y)| x.min(*y))
            .collect();
        self.push(out, Op::Min2 { a, b })
    }

    /// Clamp with zero gradient where the bound is active.
    pub fn clamp(&mut self, x: NodeId, lo: f64, hi: f64) -> NodeId {
        let out = self.nodes[x].value.iter().map(|v| v.clamp(lo, hi)).collect();
        self.push(out, Op::Clamp { x, lo, hi })
    }

    /// mu + exp(log_sigma) ⊙ noise, with externally supplied noise so sampling
    /// is reproducible and differentiable in mu and log_sigma.
    pub fn gauss_reparam(
        &mut self,
        mu: NodeId,
        log_sigma: NodeId,
        noise: &[f64],
    ) -> Result<NodeId, DiffError> {
        let muv = &self.nodes[mu].value;
        let lsv = &self.nodes[log_sigma].value;
        if muv.len() != lsv.len() || muv.len() != noise.len() {
            return Err(DiffError::ShapeMismatch {
                context: "gauss_reparam".into(),
                expected: muv.len(),
                got: noise.len(),
            });
        }
        let out = muv
            .iter()
            .zip(lsv.iter())
            .zip(noise.iter())
            .map(|((m, ls), n)| m + ls.exp() * n)
            .collect();
        Ok(self.push(out, Op::GaussReparam { mu, log_sigma, noise: noise.to_vec() }))
    }

    /// Straight-through hard one-hot: forward is the exact one-hot of
    /// argmax(soft); backward passes gradients through unchanged.
    pub fn st_hard_one_hot(&mut self, soft: NodeId) -> NodeId {
        let sv = &self.nodes[soft].value;
        let argmax = sv
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let mut out = vec![0.0; sv.len()];
        out[argmax] = 1.0;
        self.push(out, Op::StHardOneHot { soft })
    }

    /// Straight-through binned one-hot of a continuous scalar `u`: forward is
    /// the one-hot of `clamp(round(u), 0, n-1)`; backward treats the encoding
    /// as the linear interpolation between the two adjacent bins.
    pub fn st_round_one_hot(&mut self, u: NodeId, n: usize) -> NodeId {
        debug_assert_eq!(self.nodes[u].value.len(), 1);
        let raw = self.nodes[u].value[0];
        let idx = raw.round().clamp(0.0, (n - 1) as f64) as usize;
        let interior = raw > 0.0 && raw < (n - 1) as f64;
        let lo = (raw.floor().clamp(0.0, (n - 2) as f64)) as usize;
        let mut out = vec![0.0; n];
        out[idx] = 1.0;
        self.push(out, Op::StRoundOneHot { u, lo, interior })
    }

    fn accumulate<'g>(
        grads: &'g mut [Option<Vec<f64>>],
        lens: &[usize],
        id: NodeId,
    ) -> &'g mut Vec<f64> {
        grads[id].get_or_insert_with(|| vec![0.0; lens[id]])
    }

    /// Reverse pass from a scalar node, seeding its gradient with `seed`.
    /// Parameter gradients accumulate into `store` (frozen entries are
    /// skipped; gradients still flow *through* their outputs).
    pub fn backward(&self, store: &mut ParamStore, loss: NodeId, seed: f64) {
        debug_assert_eq!(self.nodes[loss].value.len(), 1, "backward needs a scalar loss");
        let lens: Vec<usize> = self.nodes.iter().map(|n| n.value.len()).collect();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss] = Some(vec![seed]);

        for id in (0..=loss).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[id].op {
                Op::Constant => {}
                Op::ParamVec { p } => {
                    if !store.is_frozen(*p) {
                        for (dst, src) in store.grad_mut(*p).iter_mut().zip(&g) {
                            *dst += src;
                        }
                    }
                }
                Op::Affine { w, b, x } => {
                    let cols = store.shape(*w)[1];
                    let xv = &self.nodes[*x].value;
                    // dx += W^T g (reads weights before mutably borrowing grads)
                    {
                        let wv = store.value(*w);
                        let dx = Self::accumulate(&mut grads, &lens, *x);
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            let row = &wv[r * cols..(r + 1) * cols];
                            for c in 0..cols {
                                dx[c] += row[c] * gr;
                            }
                        }
                    }
                    if !store.is_frozen(*w) {
                        let dw = store.grad_mut(*w);
                        for (r, gr) in g.iter().enumerate() {
                            if *gr == 0.0 {
                                continue;
                            }
                            let drow = &mut dw[r * cols..(r + 1) * cols];
                            for c in 0..cols {
                                drow[c] += gr * xv[c];
                            }
                        }
                    }
                    if !store.is_frozen(*b) {
                        for (dst, src) in store.grad_mut(*b).iter_mut().zip(&g) {
                            *dst += src;
                        }
                    }
                }
                Op::Add { a, b } => {
                    let da = Self::accumulate(&mut grads, &lens, *a);
                    da.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                    let db = Self::accumulate(&mut grads, &lens, *b);
                    db.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                }
                Op::Sub { a, b } => {
                    let da = Self::accumulate(&mut grads, &lens, *a);
                    da.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                    let db = Self::accumulate(&mut grads, &lens, *b);
                    db.iter_mut().zip(&g).for_each(|(d, s)| *d -= s);
                }
                Op::Mul { a, b } => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    {
                        let da = Self::accumulate(&mut grads, &lens, *a);
                        for i in 0..g.len() {
                            da[i] += g[i] * bv[i];
                        }
                    }
                    let db = Self::accumulate(&mut grads, &lens, *b);
                    for i in 0..g.len() {
                        db[i] += g[i] * av[i];
                    }
                }
                Op::Relu { x } => {
                    let xv = &self.nodes[*x].value;
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    for i in 0..g.len() {
                        if xv[i] > 0.0 {
                            dx[i] += g[i];
                        }
                    }
                }
                Op::LayerNorm { x, gain, bias, mean, inv_std } => {
                    let xv = &self.nodes[*x].value;
                    let n = xv.len() as f64;
                    let xhat: Vec<f64> = xv.iter().map(|v| (v - mean) * inv_std).collect();
                    let gv = store.value(*gain).to_vec();
                    if !store.is_frozen(*gain) {
                        let dg = store.grad_mut(*gain);
                        for i in 0..g.len() {
                            dg[i] += g[i] * xhat[i];
                        }
                    }
                    if !store.is_frozen(*bias) {
                        let db = store.grad_mut(*bias);
                        for (dst, src) in db.iter_mut().zip(&g) {
                            *dst += src;
                        }
                    }
                    let dxhat: Vec<f64> = g.iter().zip(&gv).map(|(gi, gv)| gi * gv).collect();
                    let m1 = dxhat.iter().sum::<f64>() / n;
                    let m2 = dxhat.iter().zip(&xhat).map(|(d, h)| d * h).sum::<f64>() / n;
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    for i in 0..dxhat.len() {
                        dx[i] += inv_std * (dxhat[i] - m1 - xhat[i] * m2);
                    }
                }
                Op::Concat { parts } => {
                    let mut offset = 0;
                    for &p in parts {
                        let len = lens[p];
                        let dp = Self::accumulate(&mut grads, &lens, p);
                        for i in 0..len {
                            dp[i] += g[offset + i];
                        }
                        offset += len;
                    }
                }
                Op::Slice { x, start } => {
                    let start = *start;
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    for (i, gi) in g.iter().enumerate() {
                        dx[start + i] += gi;
                    }
                }
                Op::MaxPool { inputs, argmax } => {
                    for (i, gi) in g.iter().enumerate() {
                        if *gi == 0.0 {
                            continue;
                        }
                        let winner = inputs[argmax[i] as usize];
                        let dw = Self::accumulate(&mut grads, &lens, winner);
                        dw[i] += gi;
                    }
                }
                Op::Softmax { x } => {
                    let p = &self.nodes[id].value;
                    let dot: f64 = g.iter().zip(p).map(|(gi, pi)| gi * pi).sum();
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    for i in 0..g.len() {
                        dx[i] += p[i] * (g[i] - dot);
                    }
                }
                Op::LogSoftmax { x } => {
                    let lp = &self.nodes[id].value;
                    let gsum: f64 = g.iter().sum();
                    let p: Vec<f64> = lp.iter().map(|v| v.exp()).collect();
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    for i in 0..g.len() {
                        dx[i] += g[i] - p[i] * gsum;
                    }
                }
                Op::Gather { x, idx } => {
                    let idx = *idx;
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    dx[idx] += g[0];
                }
                Op::Sum { x } => {
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    dx.iter_mut().for_each(|d| *d += g[0]);
                }
                Op::Mean { x } => {
                    let n = lens[*x] as f64;
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    dx.iter_mut().for_each(|d| *d += g[0] / n);
                }
                Op::Scale { x, c } => {
                    let c = *c;
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    for i in 0..g.len() {
                        dx[i] += g[i] * c;
                    }
                }
                Op::AddConst { x } => {
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    dx.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                }
                Op::Exp { x } => {
                    let ev = &self.nodes[id].value;
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    for i in 0..g.len() {
                        dx[i] += g[i] * ev[i];
                    }
                }
                Op::Min2 { a, b } => {
                    let av = &self.nodes[*a].value;
                    let bv = &self.nodes[*b].value;
                    {
                        let da = Self::accumulate(&mut grads, &lens, *a);
                        for i in 0..g.len() {
                            if av[i] < bv[i] {
                                da[i] += g[i];
                            }
                        }
                    }
                    let db = Self::accumulate(&mut grads, &lens, *b);
                    for i in 0..g.len() {
                        if av[i] >= bv[i] {
                            db[i] += g[i];
                        }
                    }
                }
                Op::Clamp { x, lo, hi } => {
                    let (lo, hi) = (*lo, *hi);
                    let xv = &self.nodes[*x].value;
                    let dx = Self::accumulate(&mut grads, &lens, *x);
                    for i in 0..g.len() {
                        if xv[i] > lo && xv[i] < hi {
                            dx[i] += g[i];
                        }
                    }
                }
                Op::GaussReparam { mu, log_sigma, noise } => {
                    let lsv = &self.nodes[*log_sigma].value;
                    {
                        let dmu = Self::accumulate(&mut grads, &lens, *mu);
                        dmu.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                    }
                    let dls = Self::accumulate(&mut grads, &lens, *log_sigma);
                    for i in 0..g.len() {
                        dls[i] += g[i] * lsv[i].exp() * noise[i];
                    }
                }
                Op::StHardOneHot { soft } => {
                    let ds = Self::accumulate(&mut grads, &lens, *soft);
                    ds.iter_mut().zip(&g).for_each(|(d, s)| *d += s);
                }
                Op::StRoundOneHot { u, lo, interior } => {
                    if *interior {
                        let (lo, hi) = (*lo, *lo + 1);
                        let du = Self::accumulate(&mut grads, &lens, *u);
                        du[0] += g[hi] - g[lo];
                    }
                }
            }
        }
    }
}
