//! Supervised pretraining of the executor on oracle value-iteration traces.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::{mlp_forward, register_mlp, AdamHyper, MlpParams, ParamStore, Tape};
use crate::graphgen::Dataset;
use crate::vioracle::TabularMDP;

use super::{mpnn_step, supervision_edges, ExecError, ExecutorConfig, GraphEdge, LatentGraph, Processor};

#[derive(Debug, Clone)]
pub struct PretrainHyper {
    pub config: ExecutorConfig,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for PretrainHyper {
    fn default() -> Self {
        Self {
            config: ExecutorConfig::default(),
            lr: 1e-3,
            epochs: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainMetrics {
    /// Mean per-pair MSE for each training epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean MSE over the training group after the final epoch.
    pub train_mse: f64,
    /// Mean MSE over held-out graphs of the training size.
    pub heldout_mse: f64,
    /// Mean MSE over held-out larger graphs.
    pub size_gen_mse: f64,
}

/// Pretrained executor: processor plus the scalar encoder/decoder used only
/// during pretraining. `frozen` is set before this is handed out.
pub struct PretrainedExecutor {
    pub config: ExecutorConfig,
    pub store: ParamStore,
    pub processor: Processor,
    pub enc: MlpParams,
    pub dec: MlpParams,
    pub frozen: bool,
    /// Value normalization factor (1 - gamma): inputs and targets are scaled
    /// by this before entering the network.
    pub value_scale: f64,
}

struct PairView<'a> {
    edges: &'a [(usize, usize, [f64; 3])],
    input: &'a [f64],
    target: &'a [f64],
}

/// Records encode → one processor step → decode for a supervision pair and
/// returns the scalar MSE node.
fn pair_loss(
    tape: &mut Tape,
    store: &ParamStore,
    exec: &PretrainedExecutor,
    pair: &PairView,
) -> Result<crate::diffcore::NodeId, ExecError> {
    let n = pair.input.len();
    let mut nodes = Vec::with_capacity(n);
    for &v in pair.input {
        let x = tape.constant(vec![v * exec.value_scale]);
        nodes.push(mlp_forward(tape, store, &exec.enc, x)?);
    }
    let edges: Vec<GraphEdge> = pair
        .edges
        .iter()
        .map(|&(src, dst, feat)| {
            let f = tape.constant(feat.to_vec());
            GraphEdge { src, dst, feat: f }
        })
        .collect();
    let graph = LatentGraph { nodes, edges, root: 0 };
    let updated = mpnn_step(tape, store, &exec.processor, &graph)?;

    let mut total: Option<crate::diffcore::NodeId> = None;
    for (s, &h) in updated.iter().enumerate() {
        let pred = mlp_forward(tape, store, &exec.dec, h)?;
        let target = tape.constant_scalar(pair.target[s] * exec.value_scale);
        let diff = tape.sub(pred, target);
        let sq = tape.mul(diff, diff);
        total = Some(match total {
            Some(t) => tape.add(t, sq),
            None => sq,
        });
    }
    let total = total.expect("graph has nodes");
    Ok(tape.scale(total, 1.0 / n as f64))
}

fn group_mse(
    exec: &PretrainedExecutor,
    group: &[(TabularMDP, Vec<crate::graphgen::SupervisionPair>)],
) -> Result<f64, ExecError> {
    let mut total = 0.0;
    let mut count = 0usize;
    for (mdp, pairs) in group {
        let edges = supervision_edges(mdp);
        for pair in pairs {
            let mut tape = Tape::new();
            let loss = pair_loss(
                &mut tape,
                &exec.store,
                exec,
                &PairView { edges: &edges, input: &pair.input, target: &pair.target },
            )?;
            total += tape.scalar(loss);
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}

/// Minimizes per-step MSE between the decoded processor output and the oracle
/// target over the training group, then freezes the processor. Targets and
/// inputs are normalized by (1 - gamma) so values live in roughly [0, 1].
pub fn pretrain_executor(
    dataset: &Dataset,
    hyper: &PretrainHyper,
) -> Result<(PretrainedExecutor, PretrainMetrics), ExecError> {
    if dataset.train.is_empty() || dataset.train.iter().all(|(_, p)| p.is_empty()) {
        return Err(ExecError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut store = ParamStore::new();
    let processor = Processor::register(&mut store, "", hyper.config, &mut rng)?;
    let enc = register_mlp(&mut store, "enc", &hyper.config.enc_spec(), &mut rng)?;
    let dec = register_mlp(&mut store, "dec", &hyper.config.dec_spec(), &mut rng)?;
    let mut exec = PretrainedExecutor {
        config: hyper.config,
        store,
        processor,
        enc,
        dec,
        frozen: false,
        value_scale: 1.0 - dataset.config.gamma,
    };

    let edge_cache: Vec<Vec<(usize, usize, [f64; 3])>> =
        dataset.train.iter().map(|(mdp, _)| supervision_edges(mdp)).collect();
    let mut indices: Vec<(usize, usize)> = dataset
        .train
        .iter()
        .enumerate()
        .flat_map(|(g, (_, pairs))| (0..pairs.len()).map(move |s| (g, s)))
        .collect();

    let adam = AdamHyper::with_lr(hyper.lr);
    let mut epoch_losses = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_total = 0.0;
        for (i, &(g, s)) in indices.iter().enumerate() {
            let pair = &dataset.train[g].1[s];
            let mut tape = Tape::new();
            let loss = pair_loss(
                &mut tape,
                &exec.store,
                &exec,
                &PairView { edges: &edge_cache[g], input: &pair.input, target: &pair.target },
            )?;
            let loss_value = tape.scalar(loss);
            if !loss_value.is_finite() {
                return Err(ExecError::Diverged { epoch, pair: i, loss: loss_value });
            }
            epoch_total += loss_value;
            tape.backward(&mut exec.store, loss, 1.0);
            exec.store.adam_step(&adam)?;
            exec.store.zero_grads();
        }
        epoch_losses.push(epoch_total / indices.len() as f64);
    }

    exec.store.freeze_prefix("msg.");
    exec.store.freeze_prefix("upd.");
    exec.frozen = true;

    let metrics = PretrainMetrics {
        train_mse: group_mse(&exec, &dataset.train)?,
        heldout_mse: group_mse(&exec, &dataset.heldout)?,
        size_gen_mse: group_mse(&exec, &dataset.size_gen)?,
        epoch_losses,
    };
    Ok((exec, metrics))
}
