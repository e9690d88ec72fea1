//! Experiment configuration files (TOML) and config fingerprints.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::SamplerKind;
use crate::executor::ExecutorConfig;
use crate::graphgen::DatasetConfig;
use crate::ppo::PpoHyper;

use super::HarnessError;

/// Agent flavor being trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Encoder + policy/value heads only.
    PpoBaseline,
    /// Executor pretrained on bidirectional-control chains.
    CnapB,
    /// Executor pretrained on Erdős–Rényi graphs.
    CnapR,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::PpoBaseline => "ppo-baseline",
            Variant::CnapB => "cnap-b",
            Variant::CnapR => "cnap-r",
        })
    }
}

fn default_bins() -> usize {
    10
}
fn default_budget() -> usize {
    10
}
fn default_gnn_steps() -> usize {
    1
}
fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}
fn default_eval_episodes() -> usize {
    100
}
fn default_embedding_dim() -> usize {
    50
}
fn default_hidden_dim() -> usize {
    64
}
fn default_max_graph_nodes() -> usize {
    100_000
}
fn default_temperature() -> f64 {
    1.0
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_sampler() -> SamplerKind {
    SamplerKind::Exhaustive
}

/// One experiment: a variant trained on an environment over a seed sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub env: String,
    pub variant: Variant,
    #[serde(default = "default_sampler")]
    pub sampler: SamplerKind,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_gnn_steps")]
    pub gnn_steps: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_eval_episodes")]
    pub eval_episodes: usize,
    /// Processor checkpoint path; required for the CNAP variants.
    #[serde(default)]
    pub executor_checkpoint: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_embedding_dim")]
    pub embedding_dim: usize,
    #[serde(default = "default_hidden_dim")]
    pub hidden_dim: usize,
    #[serde(default = "default_max_graph_nodes")]
    pub max_graph_nodes: usize,
    #[serde(default = "default_temperature")]
    pub gumbel_temperature: f64,
    #[serde(default)]
    pub ppo: PpoHyper,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.name.is_empty() {
            return Err(HarnessError::Config("name: must not be empty".into()));
        }
        if self.bins < 2 {
            return Err(HarnessError::Config(format!("bins: need >= 2, got {}", self.bins)));
        }
        if self.budget < 1 {
            return Err(HarnessError::Config(format!("budget: need >= 1, got {}", self.budget)));
        }
        if self.gnn_steps < 1 {
            return Err(HarnessError::Config(format!(
                "gnn_steps: need >= 1, got {}",
                self.gnn_steps
            )));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Config("seeds: must not be empty".into()));
        }
        if self.variant != Variant::PpoBaseline && self.executor_checkpoint.is_none() {
            return Err(HarnessError::Config(format!(
                "executor_checkpoint: required for variant {}",
                self.variant
            )));
        }
        self.ppo.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// Stable fingerprint of the semantically meaningful fields; renaming the
    /// run or moving its output directory does not change it.
    pub fn fingerprint(&self) -> String {
        let mut semantic = self.clone();
        semantic.name = String::new();
        semantic.output_dir = PathBuf::new();
        let canonical = serde_json::to_string(&semantic).expect("config serializes");
        format!("{:016x}", fnv1a64(canonical.as_bytes()))
    }

    /// Resolved output directory for this experiment; the CNAP_OUTPUT_ROOT
    /// environment variable overrides the configured root.
    pub fn resolved_output_dir(&self) -> PathBuf {
        let root = std::env::var_os("CNAP_OUTPUT_ROOT")
            .map(PathBuf::from)
            .unwrap_or_else(|| self.output_dir.clone());
        root.join(&self.name)
    }

    pub fn executor_config(&self) -> ExecutorConfig {
        ExecutorConfig { hidden_dim: self.embedding_dim, edge_feat_dim: 3 }
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Ablation grid: the base experiment crossed with bins and GNN-step axes.
/// The file is an ordinary experiment config plus a `[grid]` table.
#[derive(Debug, Clone)]
pub struct GridConfig {
    pub base: ExperimentConfig,
    pub grid: GridAxes,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridAxes {
    pub bins: Vec<usize>,
    pub gnn_steps: Vec<usize>,
}

impl GridConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut table: toml::Table =
            text.parse().map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        let grid_value = table
            .remove("grid")
            .ok_or_else(|| HarnessError::Config("grid: missing [grid] table".into()))?;
        let grid: GridAxes = grid_value
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(format!("grid: {e}")))?;
        let base: ExperimentConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))?;
        base.validate()?;
        if grid.bins.is_empty() && grid.gnn_steps.is_empty() {
            return Err(HarnessError::Config("grid: at least one axis required".into()));
        }
        Ok(Self { base, grid })
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Cross product of the axes (an empty axis keeps the base value).
    pub fn expand(&self) -> Vec<ExperimentConfig> {
        let bins_axis = if self.grid.bins.is_empty() {
            vec![self.base.bins]
        } else {
            self.grid.bins.clone()
        };
        let steps_axis = if self.grid.gnn_steps.is_empty() {
            vec![self.base.gnn_steps]
        } else {
            self.grid.gnn_steps.clone()
        };
        let mut out = Vec::with_capacity(bins_axis.len() * steps_axis.len());
        for &bins in &bins_axis {
            for &gnn_steps in &steps_axis {
                let mut config = self.base.clone();
                config.bins = bins;
                config.gnn_steps = gnn_steps;
                config.name = format!("{}_n{}_l{}", self.base.name, bins, gnn_steps);
                out.push(config);
            }
        }
        out
    }
}

/// Config file for executor pretraining runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainFileConfig {
    pub output: PathBuf,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default = "default_pretrain_lr")]
    pub lr: f64,
    #[serde(default = "default_pretrain_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_embedding_dim")]
    pub hidden_dim: usize,
    /// Optional directory to cache the generated dataset into.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
}

fn default_pretrain_lr() -> f64 {
    1e-3
}
fn default_pretrain_epochs() -> usize {
    4
}

impl PretrainFileConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "table1-baseline"
env = "mountaincar-continuous"
variant = "ppo-baseline"
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(config.bins, 10);
        assert_eq!(config.seeds.len(), 10);
        assert_eq!(config.ppo.epochs, 4);
        assert_eq!(config.sampler, SamplerKind::Exhaustive);
    }

    #[test]
    fn cnap_variant_requires_checkpoint_field() {
        let text = MINIMAL.replace("ppo-baseline", "cnap-r");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("executor_checkpoint"), "{err}");
    }

    #[test]
    fn unknown_fields_are_named_in_errors() {
        let text = format!("{MINIMAL}\nmystery_knob = 3\n");
        let err = ExperimentConfig::parse(&text).unwrap_err();
        assert!(err.to_string().contains("mystery_knob"), "{err}");
    }

    #[test]
    fn fingerprint_tracks_semantic_fields_only() {
        let base = ExperimentConfig::parse(MINIMAL).unwrap();
        let f0 = base.fingerprint();

        let mut renamed = base.clone();
        renamed.name = "other".into();
        renamed.output_dir = PathBuf::from("elsewhere");
        assert_eq!(renamed.fingerprint(), f0);

        let mut changed = base.clone();
        changed.bins = 15;
        assert_ne!(changed.fingerprint(), f0);

        let mut ppo_changed = base.clone();
        ppo_changed.ppo.lr = 1e-3;
        assert_ne!(ppo_changed.fingerprint(), f0);

        let mut seeds_changed = base;
        seeds_changed.seeds = vec![1, 2];
        assert_ne!(seeds_changed.fingerprint(), f0);
    }

    #[test]
    fn grid_expansion_is_the_cross_product() {
        let text = format!(
            "{MINIMAL}\n[grid]\nbins = [5, 10, 15]\ngnn_steps = [1, 2, 3]\n"
        );
        let grid = GridConfig::parse(&text).unwrap();
        let configs = grid.expand();
        assert_eq!(configs.len(), 9);
        let names: Vec<&str> = configs.iter().map(|c| c.name.as_str()).collect();
        assert!(names.contains(&"table1-baseline_n5_l1"));
        assert!(names.contains(&"table1-baseline_n15_l3"));
        assert!(configs.iter().all(|c| c.validate().is_ok()));
    }

    #[test]
    fn ppo_section_overrides() {
        let text = format!("{MINIMAL}\n[ppo]\nlr = 0.001\nupdates = 3\nrollout = {{ steps = 128 }}\n");
        let config = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(config.ppo.lr, 1e-3);
        assert_eq!(config.ppo.updates, 3);
        assert_eq!(config.ppo.rollout, crate::ppo::RolloutMode::Steps(128));
        // Untouched fields keep defaults.
        assert_eq!(config.ppo.epochs, 4);
    }

    #[test]
    fn pretrain_config_parses() {
        let text = r#"
output = "out/exec.ckpt"
epochs = 2
[dataset]
regime = "bidirectional"
num-train = 10
"#;
        // DatasetConfig uses default serde naming (snake_case); fix the key.
        let text = text.replace("num-train", "num_train");
        let config = PretrainFileConfig::parse(&text).unwrap();
        assert_eq!(config.epochs, 2);
        assert_eq!(config.dataset.num_train, 10);
        assert_eq!(config.dataset.regime, crate::graphgen::GraphRegime::Bidirectional);
    }
}
