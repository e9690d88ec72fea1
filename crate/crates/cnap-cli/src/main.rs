//! Experiment CLI for the CNAP agent.
//!
//! Exit codes: 0 success, 2 config error, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cnap::agent::Agent;
use cnap::diffcore::load_checkpoint;
use cnap::harness::{
    emit_plot, evaluate, read_curve_csv, run_experiment, run_grid, ExperimentConfig, GridConfig,
    HarnessError, PlotSeries, PretrainFileConfig,
};

#[derive(Parser)]
#[command(name = "cnap", version, about = "Continuous Neural Algorithmic Planner experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain an executor on synthetic graphs and export the processor.
    PretrainExecutor { config: PathBuf },
    /// Train one experiment config across its seed sweep.
    Train { config: PathBuf },
    /// Evaluate a trained agent checkpoint under a config's protocol.
    Evaluate {
        checkpoint: PathBuf,
        config: PathBuf,
        /// Evaluation seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the ablation grid in a grid config.
    Ablate { config: PathBuf },
    /// Render learning curves from experiment output directories.
    Plot {
        /// Directory containing one subdirectory with curve.csv per variant.
        dir: PathBuf,
        #[arg(long, default_value = "learning_curves.svg")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::PretrainExecutor { config } => {
            let config = PretrainFileConfig::load(&config)?;
            let metrics = cnap::harness::pretrain_from_config(&config)?;
            println!("wrote {}", config.output.display());
            println!("train_mse = {:.6}", metrics.train_mse);
            println!("heldout_mse = {:.6}", metrics.heldout_mse);
            println!("size_gen_mse = {:.6}", metrics.size_gen_mse);
            Ok(())
        }
        Command::Train { config } => {
            let config = ExperimentConfig::load(&config)?;
            let output = run_experiment(&config)?;
            for row in &output.rows {
                println!(
                    "seed {}: mean {:.2} +/- {:.2} over {} episodes",
                    row.seed, row.mean_reward, row.std_reward, row.episodes
                );
            }
            println!(
                "aggregate: {:.2} +/- {:.2} across {} seeds -> {}",
                output.aggregate_mean,
                output.aggregate_std,
                output.rows.len(),
                output.out_dir.display()
            );
            Ok(())
        }
        Command::Evaluate { checkpoint, config, seed } => {
            let config = ExperimentConfig::load(&config)?;
            let ckpt = load_checkpoint(&checkpoint)?;
            let agent = Agent::from_checkpoint(&ckpt)?;
            let mut env = cnap::envs::env_by_name(&config.env)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let report = evaluate(&agent, env.as_mut(), config.eval_episodes, &mut rng)?;
            println!(
                "mean {:.2} +/- {:.2} over {} episodes",
                report.mean,
                report.std,
                report.rewards.len()
            );
            Ok(())
        }
        Command::Ablate { config } => {
            let grid = GridConfig::load(&config)?;
            let results = run_grid(&grid)?;
            for (cell, output) in &results {
                println!(
                    "{} (bins={}, gnn_steps={}): {:.2} +/- {:.2}",
                    cell.name, cell.bins, cell.gnn_steps, output.aggregate_mean, output.aggregate_std
                );
            }
            Ok(())
        }
        Command::Plot { dir, out } => {
            let mut series = Vec::new();
            let mut entries: Vec<_> = std::fs::read_dir(&dir)?
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .map(|e| e.path())
                .filter(|p| p.join("curve.csv").exists())
                .collect();
            entries.sort();
            for path in entries {
                let label = path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "curve".into());
                let seeds = read_curve_csv(&path.join("curve.csv"))?;
                series.push(PlotSeries { label, seeds });
            }
            if series.is_empty() {
                return Err(HarnessError::Plot(format!(
                    "no curve.csv found under {}",
                    dir.display()
                )));
            }
            emit_plot(&series, &out)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
