//! Experiment harness: seed sweeps, evaluation protocol, ablation grids, and
//! result files.
//!
//! Every published result in this repository regenerates from a named config
//! file via [`run_experiment`]. Outputs per experiment: `rows.csv` (one row
//! per seed), `curve.csv` (per-update learning curves; the wall-time column
//! is the one nondeterministic field), `summary.txt`, and one agent
//! checkpoint per seed.

mod config;
mod plot;

pub use config::{
    ExperimentConfig, GridAxes, GridConfig, PretrainFileConfig, Variant,
};
pub use plot::{emit_plot, read_curve_csv, validate_svg, PlotSeries};

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::{Agent, AgentConfig, AgentError};
use crate::diffcore::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::envs::{env_by_name, Env, EnvError};
use crate::executor::{export_processor, pretrain_executor, ExecError, PretrainHyper, PretrainMetrics};
use crate::graphgen::generate_dataset;
use crate::ppo::{train, PpoError, UpdateMetrics};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("training failed on seed {seed}: {source}")]
    Training { seed: u64, source: Box<PpoError> },
    #[error("plot error: {0}")]
    Plot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Diff(#[from] crate::diffcore::DiffError),
}

impl HarnessError {
    /// CLI exit code: 2 for config problems, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            _ => 3,
        }
    }
}

/// Per-seed evaluation summary.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub fingerprint: String,
    pub seed: u64,
    pub mean_reward: f64,
    pub std_reward: f64,
    pub episodes: usize,
}

impl ResultRow {
    pub const CSV_HEADER: &'static str = "fingerprint,seed,mean_reward,std_reward,episodes";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.fingerprint, self.seed, self.mean_reward, self.std_reward, self.episodes
        )
    }
}

#[derive(Debug, Clone)]
pub struct EvalReport {
    pub mean: f64,
    pub std: f64,
    pub rewards: Vec<f64>,
}

/// Rolls out `episodes` full episodes with the trained policy (sampling, no
/// gradient, normalizer frozen) and aggregates episodic rewards.
pub fn evaluate(
    agent: &Agent,
    env: &mut dyn Env,
    episodes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<EvalReport, HarnessError> {
    let mut rewards = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut obs = env.reset(rng);
        let mut total = 0.0;
        loop {
            let decision = agent.act(&obs, rng)?;
            let step = env.step(&decision.continuous)?;
            total += step.reward;
            if step.done || step.truncated {
                break;
            }
            obs = step.obs;
        }
        rewards.push(total);
    }
    let mean = rewards.iter().sum::<f64>() / rewards.len().max(1) as f64;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>()
        / rewards.len().max(1) as f64;
    Ok(EvalReport { mean, std: var.sqrt(), rewards })
}

/// Maps an experiment config onto the agent architecture for `env`.
pub fn build_agent_config(
    experiment: &ExperimentConfig,
    env: &dyn Env,
) -> AgentConfig {
    let spec = env.spec();
    AgentConfig {
        obs_dim: spec.obs_dim,
        embedding_dim: experiment.embedding_dim,
        hidden_dim: experiment.hidden_dim,
        bins: experiment.bins,
        budget: experiment.budget,
        gnn_steps: experiment.gnn_steps,
        sampler: experiment.sampler,
        baseline: experiment.variant == Variant::PpoBaseline,
        max_graph_nodes: experiment.max_graph_nodes,
        gumbel_temperature: experiment.gumbel_temperature,
        action_bounds: spec.action_bounds.clone(),
        executor: experiment.executor_config(),
    }
}

/// Everything produced by one seed's train-then-evaluate run.
pub struct SeedOutcome {
    pub seed: u64,
    pub metrics: Vec<UpdateMetrics>,
    pub eval: EvalReport,
    pub agent: Agent,
}

/// Trains and evaluates a single seed, fully deterministic given the seed.
pub fn run_seed(
    experiment: &ExperimentConfig,
    executor_ckpt: Option<&Checkpoint>,
    seed: u64,
) -> Result<SeedOutcome, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = env_by_name(&experiment.env)?;
    let agent_config = build_agent_config(experiment, env.as_ref());
    let mut agent = Agent::new(agent_config, executor_ckpt, &mut rng)?;
    let (metrics, _collector) = train(env, &mut agent, &experiment.ppo, &mut rng)
        .map_err(|e| HarnessError::Training { seed, source: Box::new(e) })?;
    let mut eval_env = env_by_name(&experiment.env)?;
    let eval = evaluate(&agent, eval_env.as_mut(), experiment.eval_episodes, &mut rng)?;
    Ok(SeedOutcome { seed, metrics, eval, agent })
}

pub struct ExperimentOutput {
    pub fingerprint: String,
    pub rows: Vec<ResultRow>,
    /// Mean of the per-seed mean rewards.
    pub aggregate_mean: f64,
    /// Standard deviation across the per-seed means.
    pub aggregate_std: f64,
    pub out_dir: PathBuf,
}

/// Trains every seed (in parallel), evaluates, and writes the result files.
pub fn run_experiment(experiment: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    experiment.validate()?;
    let executor_ckpt = match &experiment.executor_checkpoint {
        Some(path) if experiment.variant != Variant::PpoBaseline => {
            Some(load_checkpoint(path)?)
        }
        _ => None,
    };
    let mut outcomes: Vec<SeedOutcome> = experiment
        .seeds
        .par_iter()
        .map(|&seed| run_seed(experiment, executor_ckpt.as_ref(), seed))
        .collect::<Result<_, _>>()?;
    outcomes.sort_by_key(|o| o.seed);
    write_outputs(experiment, &outcomes)
}

fn write_outputs(
    experiment: &ExperimentConfig,
    outcomes: &[SeedOutcome],
) -> Result<ExperimentOutput, HarnessError> {
    let fingerprint = experiment.fingerprint();
    let out_dir = experiment.resolved_output_dir();
    std::fs::create_dir_all(&out_dir)?;

    let rows: Vec<ResultRow> = outcomes
        .iter()
        .map(|o| ResultRow {
            fingerprint: fingerprint.clone(),
            seed: o.seed,
            mean_reward: o.eval.mean,
            std_reward: o.eval.std,
            episodes: o.eval.rewards.len(),
        })
        .collect();

    let mut rows_csv = String::from(ResultRow::CSV_HEADER);
    rows_csv.push('\n');
    for row in &rows {
        rows_csv.push_str(&row.csv_row());
        rows_csv.push('\n');
    }
    std::fs::write(out_dir.join("rows.csv"), rows_csv)?;

    let mut curve_csv = format!("seed,{}\n", UpdateMetrics::CSV_HEADER);
    for o in outcomes {
        for m in &o.metrics {
            curve_csv.push_str(&format!("{},{}\n", o.seed, m.csv_row()));
        }
    }
    std::fs::write(out_dir.join("curve.csv"), curve_csv)?;

    let seed_means: Vec<f64> = rows.iter().map(|r| r.mean_reward).collect();
    let aggregate_mean = seed_means.iter().sum::<f64>() / seed_means.len().max(1) as f64;
    let aggregate_std = {
        let var = seed_means
            .iter()
            .map(|m| (m - aggregate_mean) * (m - aggregate_mean))
            .sum::<f64>()
            / seed_means.len().max(1) as f64;
        var.sqrt()
    };

    let mut summary = String::new();
    let _ = writeln!(summary, "name = {}", experiment.name);
    let _ = writeln!(summary, "fingerprint = {fingerprint}");
    let _ = writeln!(summary, "variant = {}", experiment.variant);
    let _ = writeln!(summary, "env = {}", experiment.env);
    let _ = writeln!(summary, "seeds = {}", rows.len());
    let _ = writeln!(summary, "eval_episodes_per_seed = {}", experiment.eval_episodes);
    let _ = writeln!(summary, "aggregate_mean = {aggregate_mean}");
    let _ = writeln!(summary, "aggregate_std_across_seeds = {aggregate_std}");
    for row in &rows {
        let _ = writeln!(
            summary,
            "seed {} mean = {} std_across_episodes = {}",
            row.seed, row.mean_reward, row.std_reward
        );
    }
    std::fs::write(out_dir.join("summary.txt"), summary)?;

    for o in outcomes {
        let ckpt = o.agent.to_checkpoint();
        save_checkpoint(&out_dir.join(format!("agent_seed{}.ckpt", o.seed)), &ckpt)?;
    }

    Ok(ExperimentOutput { fingerprint, rows, aggregate_mean, aggregate_std, out_dir })
}

/// Runs every cell of an ablation grid and writes a merged CSV alongside the
/// per-cell outputs.
pub fn run_grid(grid: &GridConfig) -> Result<Vec<(ExperimentConfig, ExperimentOutput)>, HarnessError> {
    let cells = grid.expand();
    let mut results = Vec::with_capacity(cells.len());
    for cell in cells {
        let output = run_experiment(&cell)?;
        results.push((cell, output));
    }
    let root = grid.base.resolved_output_dir();
    std::fs::create_dir_all(&root)?;
    let mut merged = String::from("name,bins,gnn_steps,fingerprint,aggregate_mean,aggregate_std\n");
    for (cell, output) in &results {
        merged.push_str(&format!(
            "{},{},{},{},{},{}\n",
            cell.name,
            cell.bins,
            cell.gnn_steps,
            output.fingerprint,
            output.aggregate_mean,
            output.aggregate_std
        ));
    }
    std::fs::write(root.join("grid.csv"), merged)?;
    Ok(results)
}

/// Generates the configured dataset, pretrains an executor, and writes the
/// frozen processor checkpoint. Returns the metrics for reporting.
pub fn pretrain_from_config(
    config: &PretrainFileConfig,
) -> Result<PretrainMetrics, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.dataset.seed);
    let dataset = generate_dataset(&config.dataset, &mut rng);
    if let Some(cache) = &config.cache_dir {
        crate::graphgen::save_group(&cache.join("train"), &dataset.train)?;
        crate::graphgen::save_group(&cache.join("heldout"), &dataset.heldout)?;
        crate::graphgen::save_group(&cache.join("size_gen"), &dataset.size_gen)?;
    }
    let hyper = PretrainHyper {
        config: crate::executor::ExecutorConfig {
            hidden_dim: config.hidden_dim,
            edge_feat_dim: 3,
        },
        lr: config.lr,
        epochs: config.epochs,
        seed: config.seed,
    };
    let (exec, metrics) = pretrain_executor(&dataset, &hyper)?;
    let ckpt = export_processor(&exec.store, "", exec.config);
    save_checkpoint(&config.output, &ckpt)?;
    Ok(metrics)
}
