//! Synthetic MDP generation for executor pretraining.
//!
//! Two graph regimes: directed Erdős–Rényi graphs (the CNAP-R pretraining
//! distribution) and bidirectional chains that mimic left/right control
//! (CNAP-B). Both produce deterministic-transition [`TabularMDP`]s; the
//! transition probability still rides along as an edge feature downstream so
//! the executor sees the general Bellman form.

use std::path::Path;

use rand::Rng;

use crate::vioracle::{vi_step, MdpError, TabularMDP};

/// One step of value-iteration supervision: `target == vi_step(mdp, input)`
/// by construction.
#[derive(Debug, Clone)]
pub struct SupervisionPair {
    pub mdp_index: usize,
    pub step: usize,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
}

/// Directed Erdős–Rényi adjacency: every ordered pair (s, t), s != t, draws
/// an edge with probability `p`.
pub fn er_adjacency(n: usize, p: f64, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for s in 0..n {
        for t in 0..n {
            if s != t && rng.random::<f64>() < p {
                adj[s].push(t);
            }
        }
    }
    adj
}

/// Random ER-graph MDP. Each state's out-edges are assigned to
/// `actions_per_state` deterministic actions round-robin; states with no
/// out-edge self-loop on every action. Rewards are i.i.d. uniform [0, 1].
pub fn gen_erdos_renyi(
    n: usize,
    p: f64,
    actions_per_state: usize,
    gamma: f64,
    rng: &mut impl Rng,
) -> TabularMDP {
    assert!(n >= 2, "need at least 2 states");
    assert!(p > 0.0 && p <= 1.0, "edge probability must be in (0, 1]");
    assert!(actions_per_state >= 1);
    let adj = er_adjacency(n, p, rng);
    let mut transitions = vec![0.0; n * actions_per_state * n];
    let mut rewards = Vec::with_capacity(n * actions_per_state);
    for s in 0..n {
        for a in 0..actions_per_state {
            let succ = if adj[s].is_empty() {
                s
            } else {
                adj[s][a % adj[s].len()]
            };
            transitions[(s * actions_per_state + a) * n + succ] = 1.0;
            rewards.push(rng.random_range(0.0..1.0));
        }
    }
    TabularMDP::new(n, actions_per_state, transitions, rewards, gamma)
        .expect("generated ER MDP violates invariants")
}

/// Chain MDP with two actions per state: action 0 moves left, action 1 moves
/// right, with self-loops at the ends. Rewards are uniform [0, 1] except at a
/// designated goal state (a random end of the chain), where every action pays
/// exactly 1.
pub fn gen_bidirectional(n: usize, gamma: f64, rng: &mut impl Rng) -> TabularMDP {
    assert!(n >= 2, "need at least 2 states");
    let goal = if rng.random::<f64>() < 0.5 { 0 } else { n - 1 };
    let mut mdp = goal_chain(n, goal, gamma);
    for s in 0..n {
        for a in 0..2 {
            if s != goal {
                mdp.rewards[s * 2 + a] = rng.random_range(0.0..1.0);
            }
        }
    }
    mdp.validate().expect("generated chain MDP violates invariants");
    mdp
}

/// Deterministic chain with zero rewards everywhere except the goal state,
/// where both actions pay 1. Used for sanity checks where the optimal value
/// must be monotone toward the goal.
pub fn goal_chain(n: usize, goal: usize, gamma: f64) -> TabularMDP {
    assert!(n >= 2 && goal < n);
    let mut transitions = vec![0.0; n * 2 * n];
    let mut rewards = vec![0.0; n * 2];
    for s in 0..n {
        let left = s.saturating_sub(1);
        let right = (s + 1).min(n - 1);
        transitions[(s * 2) * n + left] = 1.0;
        transitions[(s * 2 + 1) * n + right] = 1.0;
        if s == goal {
            rewards[s * 2] = 1.0;
            rewards[s * 2 + 1] = 1.0;
        }
    }
    TabularMDP::new(n, 2, transitions, rewards, gamma).unwrap()
}

/// Emits `(V_k, V_{k+1})` pairs for k = 0..num_steps-1 starting from V_0 = 0,
/// each target produced by the oracle's own `vi_step`.
pub fn make_supervision(
    mdp: &TabularMDP,
    mdp_index: usize,
    num_steps: usize,
) -> Result<Vec<SupervisionPair>, MdpError> {
    assert!(num_steps >= 1);
    let mut pairs = Vec::with_capacity(num_steps);
    let mut v = vec![0.0; mdp.n_states];
    for k in 0..num_steps {
        let next = vi_step(mdp, &v)?;
        pairs.push(SupervisionPair {
            mdp_index,
            step: k,
            input: v.clone(),
            target: next.clone(),
        });
        v = next;
    }
    Ok(pairs)
}

/// Which synthetic graph family to pretrain on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphRegime {
    /// Erdős–Rényi graphs (CNAP-R).
    ErdosRenyi,
    /// Bidirectional control chains (CNAP-B).
    Bidirectional,
}

/// Pretraining dataset settings. The executor setup is not pinned by the
/// method itself, so these counts are explicit repo decisions reported with
/// results.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub regime: GraphRegime,
    pub seed: u64,
    pub num_train: usize,
    pub num_heldout: usize,
    pub num_size_gen: usize,
    pub train_states: usize,
    pub size_gen_states: usize,
    pub edge_prob: f64,
    pub actions_per_state: usize,
    pub gamma: f64,
    pub supervision_steps: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            regime: GraphRegime::ErdosRenyi,
            seed: 0,
            num_train: 1000,
            num_heldout: 50,
            num_size_gen: 50,
            train_states: 20,
            size_gen_states: 50,
            edge_prob: 0.2,
            actions_per_state: 4,
            gamma: 0.9,
            supervision_steps: 10,
        }
    }
}

/// A generated pretraining dataset: graphs plus their supervision chains.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: DatasetConfig,
    pub train: Vec<(TabularMDP, Vec<SupervisionPair>)>,
    pub heldout: Vec<(TabularMDP, Vec<SupervisionPair>)>,
    pub size_gen: Vec<(TabularMDP, Vec<SupervisionPair>)>,
}

pub fn generate_dataset(config: &DatasetConfig, rng: &mut impl Rng) -> Dataset {
    fn gen_group<R: Rng>(
        config: &DatasetConfig,
        count: usize,
        states: usize,
        rng: &mut R,
    ) -> Vec<(TabularMDP, Vec<SupervisionPair>)> {
        (0..count)
            .map(|i| {
                let mdp = match config.regime {
                    GraphRegime::ErdosRenyi => gen_erdos_renyi(
                        states,
                        config.edge_prob,
                        config.actions_per_state,
                        config.gamma,
                        rng,
                    ),
                    GraphRegime::Bidirectional => gen_bidirectional(states, config.gamma, rng),
                };
                let pairs = make_supervision(&mdp, i, config.supervision_steps)
                    .expect("oracle supervision failed");
                (mdp, pairs)
            })
            .collect()
    }
    let train = gen_group(config, config.num_train, config.train_states, rng);
    let heldout = gen_group(config, config.num_heldout, config.train_states, rng);
    let size_gen = gen_group(config, config.num_size_gen, config.size_gen_states, rng);
    Dataset { config: config.clone(), train, heldout, size_gen }
}

/// Writes a dataset group to `dir` as `graph_NNNN.mdp` (the TabularMDP text
/// format) plus `graph_NNNN.values` sidecars holding V_0..V_K rows.
pub fn save_group(
    dir: &Path,
    group: &[(TabularMDP, Vec<SupervisionPair>)],
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, (mdp, pairs)) in group.iter().enumerate() {
        std::fs::write(dir.join(format!("graph_{i:04}.mdp")), mdp.to_text())?;
        let mut sidecar = String::new();
        for pair in pairs {
            let row: Vec<String> = pair.input.iter().map(|v| format!("{v}")).collect();
            sidecar.push_str(&row.join(" "));
            sidecar.push('\n');
        }
        if let Some(last) = pairs.last() {
            let row: Vec<String> = last.target.iter().map(|v| format!("{v}")).collect();
            sidecar.push_str(&row.join(" "));
            sidecar.push('\n');
        }
        std::fs::write(dir.join(format!("graph_{i:04}.values")), sidecar)?;
    }
    Ok(())
}
