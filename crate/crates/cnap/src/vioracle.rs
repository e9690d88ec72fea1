//! Exact value iteration and greedy policy extraction over tabular MDPs.
//!
//! This is the ground-truth generator for executor pretraining and for the
//! equivalence tests: everything here is plain `f64` arithmetic with no
//! learned parts.

use std::fmt::Write as _;

#[derive(Debug, thiserror::Error)]
pub enum MdpError {
    #[error("transition row (s={state}, a={action}) sums to {sum}, expected 1")]
    BadTransitionRow { state: usize, action: usize, sum: f64 },
    #[error("negative transition probability at (s={state}, a={action})")]
    NegativeProbability { state: usize, action: usize },
    #[error("non-finite reward at (s={state}, a={action})")]
    NonFiniteReward { state: usize, action: usize },
    #[error("discount must be in [0, 1), got {0}")]
    BadDiscount(f64),
    #[error("tolerance must be > 0, got {0}")]
    BadTolerance(f64),
    #[error("value table contains non-finite entries")]
    NonFiniteValues,
    #[error("parse error: {0}")]
    Parse(String),
}

/// Explicit finite MDP: `p(s'|s,a)` and `r(s,a)` tables plus a discount.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMDP {
    pub n_states: usize,
    pub n_actions: usize,
    /// Row-major `[s][a][s']`.
    pub transitions: Vec<f64>,
    /// Row-major `[s][a]`.
    pub rewards: Vec<f64>,
    pub gamma: f64,
}

pub const PROB_SUM_TOL: f64 = 1e-9;

impl TabularMDP {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
    ) -> Result<Self, MdpError> {
        let mdp = Self { n_states, n_actions, transitions, rewards, gamma };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn transition(&self, s: usize, a: usize, s_next: usize) -> f64 {
        self.transitions[(s * self.n_actions + a) * self.n_states + s_next]
    }

    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let base = (s * self.n_actions + a) * self.n_states;
        &self.transitions[base..base + self.n_states]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn validate(&self) -> Result<(), MdpError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(MdpError::BadDiscount(self.gamma));
        }
        debug_assert_eq!(self.rewards.len(), self.n_states * self.n_actions);
        debug_assert_eq!(
            self.transitions.len(),
            self.n_states * self.n_actions * self.n_states
        );
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                if !self.reward(s, a).is_finite() {
                    return Err(MdpError::NonFiniteReward { state: s, action: a });
                }
                let row = self.transition_row(s, a);
                if row.iter().any(|p| *p < 0.0) {
                    return Err(MdpError::NegativeProbability { state: s, action: a });
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > PROB_SUM_TOL {
                    return Err(MdpError::BadTransitionRow { state: s, action: a, sum });
                }
            }
        }
        Ok(())
    }

    /// Q(s, a) = r(s,a) + gamma * sum_{s'} p(s'|s,a) V(s').
    pub fn q_value(&self, values: &[f64], s: usize, a: usize) -> f64 {
        let row = self.transition_row(s, a);
        let mut expect = 0.0;
        for (p, v) in row.iter().zip(values) {
            expect += p * v;
        }
        self.reward(s, a) + self.gamma * expect
    }

    /// Serializes to the fixture text format:
    ///
    /// ```text
    /// n_states n_actions gamma
    /// r(s,0) ... r(s,A-1)          (one line per state)
    /// p(0|s,a) ... p(S-1|s,a)      (one line per state-action pair, s-major)
    /// ```
    ///
    /// Floats print in shortest round-trip form, so parse(to_text(m)) == m.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.n_states, self.n_actions, self.gamma);
        for s in 0..self.n_states {
            let row: Vec<String> = (0..self.n_actions)
                .map(|a| format!("{}", self.reward(s, a)))
                .collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row: Vec<String> = self
                    .transition_row(s, a)
                    .iter()
                    .map(|p| format!("{p}"))
                    .collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, MdpError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| MdpError::Parse("empty input".into()))?;
        let mut parts = header.split_whitespace();
        let n_states: usize = parse_field(parts.next(), "n_states")?;
        let n_actions: usize = parse_field(parts.next(), "n_actions")?;
        let gamma: f64 = parse_field(parts.next(), "gamma")?;

        let mut rewards = Vec::with_capacity(n_states * n_actions);
        for s in 0..n_states {
            let line = lines
                .next()
                .ok_or_else(|| MdpError::Parse(format!("missing reward row for state {s}")))?;
            let row = parse_floats(line, n_actions)?;
            rewards.extend(row);
        }
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for s in 0..n_states {
            for a in 0..n_actions {
                let line = lines.next().ok_or_else(|| {
                    MdpError::Parse(format!("missing transition row for (s={s}, a={a})"))
                })?;
                let row = parse_floats(line, n_states)?;
                transitions.extend(row);
            }
        }
        Self::new(n_states, n_actions, transitions, rewards, gamma)
    }
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, name: &str) -> Result<T, MdpError> {
    field
        .ok_or_else(|| MdpError::Parse(format!("missing {name}")))?
        .parse()
        .map_err(|_| MdpError::Parse(format!("bad {name}")))
}

fn parse_floats(line: &str, expect: usize) -> Result<Vec<f64>, MdpError> {
    let vals: Result<Vec<f64>, _> = line.split_whitespace().map(|t| t.parse()).collect();
    let vals = vals.map_err(|_| MdpError::Parse(format!("bad float in line: {line}")))?;
    if vals.len() != expect {
        return Err(MdpError::Parse(format!(
            "expected {expect} values, got {} in line: {line}",
            vals.len()
        )));
    }
    Ok(vals)
}

/// Result of running value iteration to (near) convergence.
#[derive(Debug, Clone)]
pub struct ViResult {
    pub values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// One Bellman optimality backup: V'(s) = max_a { r(s,a) + gamma * E[V(s')] }.
pub fn vi_step(mdp: &TabularMDP, values: &[f64]) -> Result<Vec<f64>, MdpError> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(MdpError::NonFiniteValues);
    }
    debug_assert_eq!(values.len(), mdp.n_states);
    let mut next = Vec::with_capacity(mdp.n_states);
    for s in 0..mdp.n_states {
        let mut best = f64::NEG_INFINITY;
        for a in 0..mdp.n_actions {
            best = best.max(mdp.q_value(values, s, a));
        }
        next.push(best);
    }
    Ok(next)
}

/// Iterates [`vi_step`] from V = 0 until the sup-norm change drops below
/// `tol` or `max_iters` is exhausted (reported via `converged`).
pub fn value_iteration(
    mdp: &TabularMDP,
    tol: f64,
    max_iters: usize,
) -> Result<ViResult, MdpError> {
    if !(tol > 0.0) {
        return Err(MdpError::BadTolerance(tol));
    }
    let mut values = vec![0.0; mdp.n_states];
    for iter in 1..=max_iters {
        let next = vi_step(mdp, &values)?;
        let delta = sup_norm_diff(&next, &values);
        values = next;
        if delta < tol {
            return Ok(ViResult { values, iterations: iter, converged: true });
        }
    }
    Ok(ViResult { values, iterations: max_iters, converged: false })
}

/// Greedy policy: argmax_a Q(s, a), ties broken by the lowest action index.
pub fn extract_policy(mdp: &TabularMDP, values: &[f64]) -> Vec<usize> {
    (0..mdp.n_states)
        .map(|s| {
            let mut best_a = 0;
            let mut best_q = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions {
                let q = mdp.q_value(values, s, a);
                if q > best_q {
                    best_q = q;
                    best_a = a;
                }
            }
            best_a
        })
        .collect()
}

pub fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Evaluates a fixed deterministic policy by solving its Bellman equations
/// iteratively (used as an independent check on extracted policies).
pub fn evaluate_policy(
    mdp: &TabularMDP,
    policy: &[usize],
    tol: f64,
    max_iters: usize,
) -> Vec<f64> {
    let mut values = vec![0.0; mdp.n_states];
    for _ in 0..max_iters {
        let mut next = Vec::with_capacity(mdp.n_states);
        for s in 0..mdp.n_states {
            next.push(mdp.q_value(&values, s, policy[s]));
        }
        let delta = sup_norm_diff(&next, &values);
        values = next;
        if delta < tol {
            break;
        }
    }
    values
}

/// Constructs a single-state MDP whose one action self-loops with reward `r`.
pub fn self_loop(r: f64, gamma: f64) -> TabularMDP {
    TabularMDP::new(1, 1, vec![1.0], vec![r], gamma).unwrap()
}
