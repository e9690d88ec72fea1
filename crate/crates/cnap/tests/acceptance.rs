//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Fast criteria run with the normal test suite. The training-scale criteria
//! (04, 05, 10) are `#[ignore]`d slow-tier runs; execute them explicitly:
//!
//! ```text
//! cargo test --release -p cnap --test acceptance -- --ignored --nocapture --test-threads=1
//! ```

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cnap::agent::{
    discretize, sample_manual_gaussian, sample_reuse_policy,
    ActionVector, Agent, AgentConfig, FactorizedPolicy, SamplerKind,
};
use cnap::diffcore::{
    grad_check, grad_check_with, gumbel_noise, mlp_forward, register_mlp, Categorical,
    LayerNormPos, MlpSpec, NodeId, ParamStore, Tape,
};
use cnap::envs::EnvSpec;
use cnap::executor::{
    export_processor, hand_built_vi_processor, pretrain_executor, supervision_edges,
    ExecutorConfig, PretrainHyper, Processor,
};
use cnap::graphgen::{gen_erdos_renyi, generate_dataset, DatasetConfig};
use cnap::harness::{run_experiment, ExperimentConfig};
use cnap::ppo::{PpoHyper, RolloutMode};
use cnap::vioracle::{self, value_iteration, vi_step, TabularMDP};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {criterion:02} {name}: {verdict} — {detail}");
    assert!(pass, "criterion {criterion:02} ({name}) failed: {detail}");
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

/// Chi-square upper critical values at the 99% level.
fn chi2_critical_99(df: usize) -> f64 {
    match df {
        2 => 9.21034,
        10 => 23.2093,
        _ => panic!("no tabulated chi-square critical value for df = {df}"),
    }
}

fn chi2_statistic(counts: &[usize], probs: &[f64]) -> f64 {
    let n: usize = counts.iter().sum();
    counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let expect = p * n as f64;
            (c as f64 - expect) * (c as f64 - expect) / expect
        })
        .sum()
}

fn random_stochastic_mdp(n_states: usize, n_actions: usize, rng: &mut impl Rng) -> TabularMDP {
    let mut transitions = Vec::new();
    for _ in 0..n_states * n_actions {
        let raw: Vec<f64> = (0..n_states).map(|_| rng.random_range(0.01..1.0)).collect();
        let z: f64 = raw.iter().sum();
        transitions.extend(raw.iter().map(|p| p / z));
    }
    let rewards = (0..n_states * n_actions)
        .map(|_| rng.random_range(0.0..1.0))
        .collect();
    TabularMDP::new(n_states, n_actions, transitions, rewards, 0.9).unwrap()
}

// ---------------------------------------------------------------------------
// 01 — VI oracle exactness
// ---------------------------------------------------------------------------

#[test]
fn acceptance_01_vi_oracle_exactness() {
    let self_loop = vioracle::self_loop(1.0, 0.9);
    let result = value_iteration(&self_loop, 1e-8, 10_000).unwrap();
    let fixed_point_err = (result.values[0] - 10.0).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_violation = f64::NEG_INFINITY;
    for _ in 0..100 {
        let mdp = random_stochastic_mdp(20, 4, &mut rng);
        let mut prev = vec![0.0; 20];
        let mut curr = vi_step(&mdp, &prev).unwrap();
        loop {
            let next = vi_step(&mdp, &curr).unwrap();
            let lhs = vioracle::sup_norm_diff(&next, &curr);
            let rhs = vioracle::sup_norm_diff(&curr, &prev);
            worst_violation = worst_violation.max(lhs - mdp.gamma * rhs);
            if lhs < 1e-8 {
                break;
            }
            prev = curr;
            curr = next;
        }
    }
    let pass = fixed_point_err < 1e-6 && worst_violation <= 1e-12;
    report(
        1,
        "vi oracle exactness",
        pass,
        &format!(
            "self-loop |V*-10| = {fixed_point_err:.2e}; worst contraction slack = {worst_violation:.2e} over 100 random 20-state MDPs"
        ),
    );
}

// ---------------------------------------------------------------------------
// 02 — Executor fidelity on the default ER regime
// ---------------------------------------------------------------------------

#[test]
fn acceptance_02_executor_fidelity() {
    let config = DatasetConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dataset = generate_dataset(&config, &mut rng);
    let hyper = PretrainHyper { epochs: 2, ..PretrainHyper::default() };
    let (_, metrics) = pretrain_executor(&dataset, &hyper).unwrap();
    let pass = metrics.heldout_mse < 0.05 && metrics.size_gen_mse <= 2.0 * metrics.heldout_mse;
    report(
        2,
        "executor fidelity",
        pass,
        &format!(
            "heldout MSE = {:.2e} (< 0.05), 50-node MSE = {:.2e} (<= 2x heldout)",
            metrics.heldout_mse, metrics.size_gen_mse
        ),
    );
}

// ---------------------------------------------------------------------------
// 03 — Constructive VI equivalence
// ---------------------------------------------------------------------------

#[test]
fn acceptance_03_constructive_vi_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let mdp = gen_erdos_renyi(20, 0.2, 4, 0.9, &mut rng);
        let values: Vec<f64> = (0..20).map(|_| rng.random_range(0.0..10.0)).collect();
        let edges = supervision_edges(&mdp);
        let processed = hand_built_vi_processor(&values, &edges);
        let oracle = vi_step(&mdp, &values).unwrap();
        for (a, b) in processed.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
    }
    report(
        3,
        "constructive vi equivalence",
        worst <= 1e-9,
        &format!("max |processor - vi_step| = {worst:.2e} over 20 supervision graphs"),
    );
}

// ---------------------------------------------------------------------------
// 04 — Table 1 reproduction (directional; slow tier)
// ---------------------------------------------------------------------------

fn load_config(name: &str) -> ExperimentConfig {
    let root = workspace_root();
    let mut config = ExperimentConfig::load(&root.join("configs").join(name)).unwrap();
    if let Some(ckpt) = &config.executor_checkpoint {
        config.executor_checkpoint = Some(root.join(ckpt));
    }
    config.output_dir = root.join(&config.output_dir);
    config
}

/// Pretrains the named executor into out/ if its checkpoint is missing.
fn ensure_executor(config: &ExperimentConfig) {
    let Some(path) = &config.executor_checkpoint else { return };
    if path.exists() {
        return;
    }
    let regime = if path.to_string_lossy().contains("bidir") {
        cnap::graphgen::GraphRegime::Bidirectional
    } else {
        cnap::graphgen::GraphRegime::ErdosRenyi
    };
    let ds_config = DatasetConfig { regime, ..DatasetConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(ds_config.seed);
    let dataset = generate_dataset(&ds_config, &mut rng);
    let hyper = PretrainHyper { epochs: 3, ..PretrainHyper::default() };
    let (exec, _) = pretrain_executor(&dataset, &hyper).unwrap();
    let ckpt = export_processor(&exec.store, "", exec.config);
    cnap::diffcore::save_checkpoint(path, &ckpt).unwrap();
}

#[test]
#[ignore = "slow tier: ~2h single-core; run with --ignored"]
fn acceptance_04_table1_reproduction() {
    let baseline = load_config("table1-ppo-baseline.toml");
    let cnap_b = load_config("table1-cnap-b.toml");
    let cnap_r = load_config("table1-cnap-r.toml");
    ensure_executor(&cnap_b);
    ensure_executor(&cnap_r);

    let base_out = run_experiment(&baseline).unwrap();
    let b_out = run_experiment(&cnap_b).unwrap();
    let r_out = run_experiment(&cnap_r).unwrap();

    let pass = base_out.aggregate_mean < 0.0
        && b_out.aggregate_mean > 0.0
        && r_out.aggregate_mean > 0.0
        && b_out.aggregate_mean >= base_out.aggregate_mean + 20.0
        && r_out.aggregate_mean >= base_out.aggregate_mean + 20.0;
    report(
        4,
        "table 1 reproduction",
        pass,
        &format!(
            "baseline {:.2}±{:.2}, cnap-b {:.2}±{:.2}, cnap-r {:.2}±{:.2} (10 seeds, 100 eval episodes)",
            base_out.aggregate_mean,
            base_out.aggregate_std,
            b_out.aggregate_mean,
            b_out.aggregate_std,
            r_out.aggregate_mean,
            r_out.aggregate_std
        ),
    );
}

// ---------------------------------------------------------------------------
// 05 — Bin-count degradation trend (slow tier)
// ---------------------------------------------------------------------------

#[test]
#[ignore = "slow tier: several hours single-core; run with --ignored"]
fn acceptance_05_bin_degradation_trend() {
    let base = load_config("table1-cnap-r.toml");
    ensure_executor(&base);
    let mut means = Vec::new();
    for bins in [10usize, 50, 100] {
        let mut config = base.clone();
        config.bins = bins;
        config.name = format!("table5-cnap-r-n{bins}");
        config.output_dir = workspace_root().join("out/table5");
        let out = run_experiment(&config).unwrap();
        means.push((bins, out.aggregate_mean, out.aggregate_std));
    }
    let pass = means[1].1 < means[0].1 && means[2].1 < means[0].1;
    report(
        5,
        "bin-count degradation trend",
        pass,
        &format!(
            "N=10: {:.2}±{:.2}, N=50: {:.2}±{:.2}, N=100: {:.2}±{:.2}",
            means[0].1, means[0].2, means[1].1, means[1].2, means[2].1, means[2].2
        ),
    );
}

// ---------------------------------------------------------------------------
// 06 — Gradient suite
// ---------------------------------------------------------------------------

#[test]
fn acceptance_06_gradient_suite() {
    let mut worst: Vec<(String, f64)> = Vec::new();

    // Encoder: loss = ||encode(obs)||^2.
    {
        let spec = MlpSpec::relu(vec![3, 8, 8, 8], LayerNormPos::None);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(601);
        let params = register_mlp(&mut store, "enc", &spec, &mut rng).unwrap();
        let obs = vec![0.4, -0.8, 1.1];
        let run = |s: &ParamStore| {
            let mut tape = Tape::new();
            let x = tape.constant(obs.clone());
            let h = mlp_forward(&mut tape, s, &params, x).unwrap();
            let sq = tape.mul(h, h);
            let loss = tape.sum(sq);
            (tape, loss)
        };
        let (tape, loss) = run(&store);
        tape.backward(&mut store, loss, 1.0);
        let err = grad_check(&mut store, 1e-4, |s| run(s).0.scalar(run(s).1)).unwrap();
        worst.push(("encoder".into(), err));
    }

    // Transition (with layer norm): loss = ||T(h, a)||^2.
    {
        let (k, nd) = (8, 8);
        let spec = MlpSpec::relu(vec![k + nd, 8, 8, k], LayerNormPos::BeforeLast);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(602);
        let params = register_mlp(&mut store, "trans", &spec, &mut rng).unwrap();
        let h: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut a = vec![0.0; nd];
        a[2] = 1.0;
        a[4 + 1] = 1.0;
        let run = |s: &ParamStore| {
            let mut tape = Tape::new();
            let hv = tape.constant(h.clone());
            let av = tape.constant(a.clone());
            let joined = tape.concat(&[hv, av]);
            let out = mlp_forward(&mut tape, s, &params, joined).unwrap();
            let sq = tape.mul(out, out);
            let loss = tape.sum(sq);
            (tape, loss)
        };
        let (tape, loss) = run(&store);
        tape.backward(&mut store, loss, 1.0);
        let err = grad_check(&mut store, 1e-4, |s| run(s).0.scalar(run(s).1)).unwrap();
        worst.push(("transition".into(), err));
    }

    // Policy head: loss = joint log-prob of a fixed action vector.
    {
        let (k, dims, bins) = (6, 2, 5);
        let spec = MlpSpec::relu(vec![2 * k, dims * bins], LayerNormPos::None);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(603);
        let params = register_mlp(&mut store, "policy", &spec, &mut rng).unwrap();
        let hx: Vec<f64> = (0..2 * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let action = ActionVector(vec![1, 4]);
        let run = |s: &ParamStore| {
            let mut tape = Tape::new();
            let x = tape.constant(hx.clone());
            let flat = mlp_forward(&mut tape, s, &params, x).unwrap();
            let policy = FactorizedPolicy::from_flat(&mut tape, flat, dims, bins);
            let loss = policy.joint_log_prob(&mut tape, &action);
            (tape, loss)
        };
        let (tape, loss) = run(&store);
        tape.backward(&mut store, loss, 1.0);
        let err = grad_check(&mut store, 1e-4, |s| run(s).0.scalar(run(s).1)).unwrap();
        worst.push(("policy head".into(), err));
    }

    // Value head: loss = V(h, x).
    {
        let k = 6;
        let spec = MlpSpec::relu(vec![2 * k, 1], LayerNormPos::None);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(604);
        let params = register_mlp(&mut store, "value", &spec, &mut rng).unwrap();
        let hx: Vec<f64> = (0..2 * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let run = |s: &ParamStore| {
            let mut tape = Tape::new();
            let x = tape.constant(hx.clone());
            let v = mlp_forward(&mut tape, s, &params, x).unwrap();
            (tape, v)
        };
        let (tape, loss) = run(&store);
        tape.backward(&mut store, loss, 1.0);
        let err = grad_check(&mut store, 1e-4, |s| run(s).0.scalar(run(s).1)).unwrap();
        worst.push(("value head".into(), err));
    }

    // Learned-Gaussian sampler, fixed noise: loss = sum over K pre-rounding
    // sample vectors (the straight-through rounding is checked structurally
    // elsewhere; a step function has zero finite difference by construction).
    {
        let (k, dims, budget) = (6, 3, 4);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(605);
        let mu = register_mlp(&mut store, "mu", &MlpSpec::relu(vec![k, dims], LayerNormPos::None), &mut rng).unwrap();
        let sigma = register_mlp(&mut store, "sigma", &MlpSpec::relu(vec![k, dims], LayerNormPos::None), &mut rng).unwrap();
        let h: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let noise: Vec<Vec<f64>> = (0..budget)
            .map(|_| (0..dims).map(|_| rng.random_range(-1.5..1.5)).collect())
            .collect();
        let run = |s: &ParamStore| {
            let mut tape = Tape::new();
            let hv = tape.constant(h.clone());
            let mu_out = mlp_forward(&mut tape, s, &mu, hv).unwrap();
            let ls_raw = mlp_forward(&mut tape, s, &sigma, hv).unwrap();
            let ls = tape.clamp(ls_raw, cnap::diffcore::LOG_SIGMA_MIN, cnap::diffcore::LOG_SIGMA_MAX);
            let mut total: Option<NodeId> = None;
            for n in &noise {
                let u = tape.gauss_reparam(mu_out, ls, n).unwrap();
                let su = tape.sum(u);
                total = Some(match total {
                    Some(t) => tape.add(t, su),
                    None => su,
                });
            }
            let loss = tape.scale(total.unwrap(), 1.0 / budget as f64);
            (tape, loss)
        };
        let (tape, loss) = run(&store);
        tape.backward(&mut store, loss, 1.0);
        let err = grad_check(&mut store, 1e-4, |s| run(s).0.scalar(run(s).1)).unwrap();
        worst.push(("learned-gaussian sampler".into(), err));
    }

    // Learned-Sampling head, fixed Gumbel noise: loss on the soft relaxation
    // the straight-through estimator backs onto.
    {
        let (k, dims, bins) = (6, 2, 5);
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        let head = register_mlp(&mut store, "sampler", &MlpSpec::relu(vec![k, dims * bins], LayerNormPos::None), &mut rng).unwrap();
        let h: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let gumbel: Vec<Vec<f64>> = (0..dims).map(|_| gumbel_noise(&mut rng, bins)).collect();
        let weights: Vec<Vec<f64>> = (0..dims)
            .map(|_| (0..bins).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let run = |s: &ParamStore| {
            let mut tape = Tape::new();
            let hv = tape.constant(h.clone());
            let flat = mlp_forward(&mut tape, s, &head, hv).unwrap();
            let mut total: Option<NodeId> = None;
            for d in 0..dims {
                let slice = tape.slice(flat, d * bins, bins);
                let noise = tape.constant(gumbel[d].clone());
                let noisy = tape.add(slice, noise);
                let scaled = tape.scale(noisy, 1.0);
                let soft = tape.softmax(scaled);
                let w = tape.constant(weights[d].clone());
                let prod = tape.mul(soft, w);
                let dot = tape.sum(prod);
                total = Some(match total {
                    Some(t) => tape.add(t, dot),
                    None => dot,
                });
            }
            (tape, total.unwrap())
        };
        let (tape, loss) = run(&store);
        tape.backward(&mut store, loss, 1.0);
        let err = grad_check(&mut store, 1e-4, |s| run(s).0.scalar(run(s).1)).unwrap();
        worst.push(("learned-sampling head".into(), err));
    }

    // Full PPO loss on a one-transition buffer, through planning graph and
    // frozen executor.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(607);
        let mut pstore = ParamStore::new();
        let pconfig = ExecutorConfig { hidden_dim: 8, edge_feat_dim: 3 };
        let proc = Processor::register(&mut pstore, "", pconfig, &mut rng).unwrap();
        let ckpt = export_processor(&pstore, "", proc.config);
        let config = AgentConfig {
            obs_dim: 2,
            embedding_dim: 8,
            hidden_dim: 8,
            bins: 4,
            budget: 4,
            gnn_steps: 1,
            sampler: SamplerKind::Exhaustive,
            baseline: false,
            max_graph_nodes: 100_000,
            gumbel_temperature: 1.0,
            action_bounds: vec![(-1.0, 1.0)],
            executor: pconfig,
        };
        let mut agent = Agent::new(config, Some(&ckpt), &mut rng).unwrap();
        let obs = [0.3, -0.6];
        let decision = agent.act(&obs, &mut rng).unwrap();
        let (advantage, ret, clip, c_v, c_e) = (0.7, 1.3, 0.2, 0.5, 0.01);

        let old_lp = decision.log_prob;
        let ppo_loss = move |agent: &Agent| -> (Tape, NodeId) {
            let mut tape = Tape::new();
            let fwd = agent
                .forward(&mut tape, &decision.obs_normalized, decision.planning_seed)
                .unwrap();
            let new_lp = fwd.policy.joint_log_prob(&mut tape, &decision.action);
            let old = tape.constant_scalar(old_lp);
            let diff = tape.sub(new_lp, old);
            let ratio = tape.exp(diff);
            let surr = tape.scale(ratio, advantage);
            let clipped = tape.clamp(ratio, 1.0 - clip, 1.0 + clip);
            let surr_c = tape.scale(clipped, advantage);
            let objective = tape.min2(surr, surr_c);
            let policy_loss = tape.scale(objective, -1.0);
            let r = tape.constant_scalar(ret);
            let verr = tape.sub(fwd.value, r);
            let value_loss = tape.mul(verr, verr);
            let entropy = fwd.policy.entropy(&mut tape);
            let sv = tape.scale(value_loss, c_v);
            let se = tape.scale(entropy, -c_e);
            let partial = tape.add(policy_loss, sv);
            let total = tape.add(partial, se);
            (tape, total)
        };
        {
            let (tape, loss) = ppo_loss(&agent);
            tape.backward(&mut agent.store, loss, 1.0);
        }
        // Deep composition: a smaller step keeps truncation error below the
        // relative tolerance on near-zero gradient coordinates.
        let err = grad_check_with(&mut agent, |a| &mut a.store, 1e-5, |a| {
            let (tape, loss) = ppo_loss(a);
            tape.scalar(loss)
        })
        .unwrap();
        worst.push(("full ppo loss".into(), err));
    }

    let max = worst.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    let detail: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.2e}")).collect();
    report(6, "gradient suite", max < 1e-3, &detail.join(", "));
}

// ---------------------------------------------------------------------------
// 07 — Factorization identity
// ---------------------------------------------------------------------------

#[test]
fn acceptance_07_factorization_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let (dims, bins) = (3, 7);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let logits: Vec<f64> = (0..dims * bins).map(|_| rng.random_range(-6.0..6.0)).collect();
        let action = ActionVector((0..dims).map(|_| rng.random_range(0..bins)).collect());
        let mut tape = Tape::new();
        let flat = tape.constant(logits.clone());
        let policy = FactorizedPolicy::from_flat(&mut tape, flat, dims, bins);
        let joint = policy.joint_log_prob(&mut tape, &action);
        let mut expected = 0.0;
        for d in 0..dims {
            let cat = Categorical::from_logits(&logits[d * bins..(d + 1) * bins]).unwrap();
            expected += cat.log_prob(action.0[d]);
        }
        worst = worst.max((tape.scalar(joint) - expected).abs());
    }
    report(
        7,
        "factorization identity",
        worst < 1e-9,
        &format!("max |joint - sum of per-dim| = {worst:.2e} over 10^4 draws"),
    );
}

// ---------------------------------------------------------------------------
// 08 — Sampler distribution checks
// ---------------------------------------------------------------------------

/// Standard normal density.
fn phi(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Simpson's rule on [a, b] with `n` (even) intervals.
fn simpson(a: f64, b: f64, n: usize, mu: f64, sigma: f64) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = phi(a, mu, sigma) + phi(b, mu, sigma);
    for i in 1..n {
        let w = if i % 2 == 0 { 2.0 } else { 4.0 };
        acc += w * phi(a + i as f64 * h, mu, sigma);
    }
    acc * h / 3.0
}

/// pmf of clamp(round(Normal(mu, sigma)), 0, n-1) by numeric integration.
fn clamped_rounded_normal_pmf(bins: usize, mu: f64, sigma: f64) -> Vec<f64> {
    let lo_tail = mu - 14.0 * sigma;
    let hi_tail = mu + 14.0 * sigma;
    (0..bins)
        .map(|j| {
            let a = if j == 0 { lo_tail } else { j as f64 - 0.5 };
            let b = if j == bins - 1 { hi_tail } else { j as f64 + 0.5 };
            simpson(a, b, 4000, mu, sigma)
        })
        .collect()
}

#[test]
fn acceptance_08_sampler_distribution_checks() {
    let draws = 100_000usize;
    let mut details = Vec::new();
    let mut pass = true;

    // Manual-Gaussian, N = 11: chi-square against the numerically integrated
    // clamped-rounded Normal(5.5, 2.75) pmf.
    {
        let spec = EnvSpec {
            obs_dim: 1,
            action_dim: 1,
            action_bounds: vec![(-1.0, 1.0)],
            max_episode_steps: 1,
        };
        let grid = discretize(&spec, 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(801);
        let mut counts = vec![0usize; 11];
        let mut remaining = draws;
        while remaining > 0 {
            let batch = remaining.min(5000);
            let mut tape = Tape::new();
            for s in sample_manual_gaussian(&mut tape, &grid, batch, &mut rng) {
                counts[s.action.0[0]] += 1;
            }
            remaining -= batch;
        }
        let pmf = clamped_rounded_normal_pmf(11, 5.5, 2.75);
        let stat = chi2_statistic(&counts, &pmf);
        let crit = chi2_critical_99(10);
        pass &= stat < crit;
        details.push(format!("manual-gaussian chi2 = {stat:.2} (crit {crit:.2})"));
    }

    // Zero-initialized Reuse-Policy and Learned-Sampling: uniformity per
    // dimension.
    {
        let spec = EnvSpec {
            obs_dim: 1,
            action_dim: 2,
            action_bounds: vec![(-1.0, 1.0); 2],
            max_episode_steps: 1,
        };
        let grid = discretize(&spec, 11).unwrap();
        let uniform = vec![1.0 / 11.0; 11];

        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(802);
        let policy_head = register_mlp(
            &mut store,
            "policy",
            &MlpSpec::relu(vec![8, 22], LayerNormPos::None),
            &mut rng,
        )
        .unwrap();
        let sampler_head = register_mlp(
            &mut store,
            "sampler",
            &MlpSpec::relu(vec![4, 22], LayerNormPos::None),
            &mut rng,
        )
        .unwrap();
        for head in [&policy_head, &sampler_head] {
            for &w in head.weights.iter().chain(head.biases.iter()) {
                store.value_mut(w).iter_mut().for_each(|v| *v = 0.0);
            }
        }

        let mut counts = [vec![0usize; 11], vec![0usize; 11]];
        let mut remaining = draws;
        while remaining > 0 {
            let batch = remaining.min(5000);
            let mut tape = Tape::new();
            let h = tape.constant(vec![0.2, -0.1, 0.4, 0.0]);
            for s in
                sample_reuse_policy(&mut tape, &store, &policy_head, h, 4, &grid, batch, &mut rng)
                    .unwrap()
            {
                counts[0][s.action.0[0]] += 1;
                counts[1][s.action.0[1]] += 1;
            }
            remaining -= batch;
        }
        for (d, c) in counts.iter().enumerate() {
            let stat = chi2_statistic(c, &uniform);
            let crit = chi2_critical_99(10);
            pass &= stat < crit;
            details.push(format!("reuse-policy dim{d} chi2 = {stat:.2}"));
        }

        let mut counts = [vec![0usize; 11], vec![0usize; 11]];
        let mut remaining = draws;
        while remaining > 0 {
            let batch = remaining.min(2000);
            let mut tape = Tape::new();
            let h = tape.constant(vec![0.2, -0.1, 0.4, 0.0]);
            for s in
                cnap::agent::sample_learned(&mut tape, &store, &sampler_head, h, &grid, batch, 1.0, &mut rng)
                    .unwrap()
            {
                counts[0][s.action.0[0]] += 1;
                counts[1][s.action.0[1]] += 1;
            }
            remaining -= batch;
        }
        for (d, c) in counts.iter().enumerate() {
            let stat = chi2_statistic(c, &uniform);
            let crit = chi2_critical_99(10);
            pass &= stat < crit;
            details.push(format!("learned-sampling dim{d} chi2 = {stat:.2}"));
        }
    }

    // Gumbel-Softmax at vanishing temperature: hard samples equal
    // argmax(logits + noise) draw by draw, and frequencies over uniform
    // logits pass chi-square against the uniform pmf.
    {
        let logits = vec![0.0, 0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(803);
        let mut counts = vec![0usize; 3];
        let mut identity_ok = true;
        let mut remaining = draws;
        while remaining > 0 {
            let batch = remaining.min(5000);
            let mut tape = Tape::new();
            let flat = tape.constant(logits.clone());
            for _ in 0..batch {
                let noise = gumbel_noise(&mut rng, 3);
                let noise_node = tape.constant(noise.clone());
                let noisy = tape.add(flat, noise_node);
                let scaled = tape.scale(noisy, 1.0 / 1e-6);
                let soft = tape.softmax(scaled);
                let hard = tape.st_hard_one_hot(soft);
                let sampled = tape.value(hard).iter().position(|v| *v == 1.0).unwrap();
                let argmax = (0..3)
                    .max_by(|&a, &b| {
                        (logits[a] + noise[a]).total_cmp(&(logits[b] + noise[b]))
                    })
                    .unwrap();
                identity_ok &= sampled == argmax;
                counts[sampled] += 1;
            }
            remaining -= batch;
        }
        let stat = chi2_statistic(&counts, &[1.0 / 3.0; 3]);
        let crit = chi2_critical_99(2);
        pass &= identity_ok && stat < crit;
        details.push(format!(
            "gumbel tau->0 argmax identity = {identity_ok}, chi2 = {stat:.2} (crit {crit:.2})"
        ));
    }

    report(8, "sampler distribution checks", pass, &details.join("; "));
}

// ---------------------------------------------------------------------------
// 09 — Graph budget formula
// ---------------------------------------------------------------------------

#[test]
fn acceptance_09_graph_budget_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(901);
    let mut pstore = ParamStore::new();
    let pconfig = ExecutorConfig { hidden_dim: 8, edge_feat_dim: 3 };
    let proc = Processor::register(&mut pstore, "", pconfig, &mut rng).unwrap();
    let ckpt = export_processor(&pstore, "", proc.config);

    let mut pass = true;
    let mut checked = 0;
    for budget in 1..=10usize {
        for depth in 1..=3usize {
            let config = AgentConfig {
                obs_dim: 2,
                embedding_dim: 8,
                hidden_dim: 8,
                bins: 11,
                budget,
                gnn_steps: depth,
                sampler: SamplerKind::ManualGaussian,
                baseline: false,
                max_graph_nodes: 1_000_000,
                gumbel_temperature: 1.0,
                action_bounds: vec![(-1.0, 1.0); 2],
                executor: pconfig,
            };
            let agent = Agent::new(config, Some(&ckpt), &mut rng).unwrap();
            let mut tape = Tape::new();
            let h = agent.encode(&mut tape, &[0.1, -0.2]).unwrap();
            let graph = agent
                .build_planning_graph(&mut tape, h, &mut ChaCha8Rng::seed_from_u64(42))
                .unwrap();
            let expect: usize = (0..=depth).map(|l| budget.pow(l as u32)).sum();
            pass &= graph.node_count() == expect && graph.edge_count() == expect - 1;
            checked += 1;
        }
    }

    // Exhaustive D = 1, N = 10, L = 2.
    let config = AgentConfig {
        obs_dim: 2,
        embedding_dim: 8,
        hidden_dim: 8,
        bins: 10,
        budget: 1,
        gnn_steps: 2,
        sampler: SamplerKind::Exhaustive,
        baseline: false,
        max_graph_nodes: 1_000_000,
        gumbel_temperature: 1.0,
        action_bounds: vec![(-1.0, 1.0)],
        executor: pconfig,
    };
    let agent = Agent::new(config, Some(&ckpt), &mut rng).unwrap();
    let mut tape = Tape::new();
    let h = agent.encode(&mut tape, &[0.3, 0.1]).unwrap();
    let graph = agent
        .build_planning_graph(&mut tape, h, &mut ChaCha8Rng::seed_from_u64(43))
        .unwrap();
    let exhaustive_ok = graph.node_count() == 111 && graph.edge_count() == 110;
    pass &= exhaustive_ok;

    report(
        9,
        "graph budget formula",
        pass,
        &format!("{checked} (K, L) cells verified; exhaustive N=10 D=1 L=2 has {} nodes", graph.node_count()),
    );
}

// ---------------------------------------------------------------------------
// 10 — High-dimensional smoke (slow tier)
// ---------------------------------------------------------------------------

/// Mean over seeds of the final "last 100 episodes" training reward, read
/// back from the experiment's curve.csv, plus a finiteness flag over every
/// logged loss column.
fn final_curve_stats(out_dir: &Path) -> (f64, bool) {
    let text = std::fs::read_to_string(out_dir.join("curve.csv")).unwrap();
    let mut last_by_seed: std::collections::BTreeMap<u64, f64> = Default::default();
    let mut finite = true;
    for line in text.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let seed: u64 = fields[0].parse().unwrap();
        let reward: f64 = fields[3].parse().unwrap();
        for col in 4..8 {
            let v: f64 = fields[col].parse().unwrap();
            finite &= v.is_finite();
        }
        last_by_seed.insert(seed, reward);
    }
    let mean = last_by_seed.values().sum::<f64>() / last_by_seed.len().max(1) as f64;
    (mean, finite)
}

#[test]
#[ignore = "slow tier: hours single-core; run with --ignored"]
fn acceptance_10_high_dimensional_smoke() {
    let samplers = [
        "manual-gaussian",
        "learned-gaussian",
        "reuse-policy",
        "learned-sampling",
    ];

    // njoint-6: four samplers + baseline, 5 seeds each; the comparison is on
    // the final 100-episode training mean, as on a learning curve.
    let baseline = load_config("njoint6-ppo-baseline.toml");
    let base_out = run_experiment(&baseline).unwrap();
    let (base_final, base_finite) = final_curve_stats(&base_out.out_dir);
    let mut pass = base_finite;
    let mut details = vec![format!("njoint-6 baseline final-100 {base_final:.3}")];
    for name in samplers {
        let config = load_config(&format!("njoint6-{name}.toml"));
        ensure_executor(&config);
        let out = run_experiment(&config).unwrap();
        let (cnap_final, finite) = final_curve_stats(&out.out_dir);
        let beats = cnap_final >= base_final;
        pass &= finite && beats;
        details.push(format!("njoint-6 {name} final-100 {cnap_final:.3} (>= baseline: {beats})"));
    }

    // njoint-17: finite-loss smoke for every sampler.
    for name in samplers {
        let config = load_config(&format!("njoint17-{name}.toml"));
        ensure_executor(&config);
        let out = run_experiment(&config).unwrap();
        let (_, finite) = final_curve_stats(&out.out_dir);
        let finite = finite && out.rows.iter().all(|r| r.mean_reward.is_finite());
        pass &= finite;
        details.push(format!("njoint-17 {name} finite: {finite}"));
    }

    report(10, "high-dimensional smoke", pass, &details.join("; "));
}

// ---------------------------------------------------------------------------
// 11 — Frozen-executor contract
// ---------------------------------------------------------------------------

#[test]
fn acceptance_11_frozen_executor_contract() {
    let mut rng = ChaCha8Rng::seed_from_u64(1101);
    let mut pstore = ParamStore::new();
    let pconfig = ExecutorConfig { hidden_dim: 8, edge_feat_dim: 3 };
    let proc = Processor::register(&mut pstore, "", pconfig, &mut rng).unwrap();
    let ckpt = export_processor(&pstore, "", proc.config);

    let config = AgentConfig {
        obs_dim: 2,
        embedding_dim: 8,
        hidden_dim: 8,
        bins: 5,
        budget: 5,
        gnn_steps: 1,
        sampler: SamplerKind::Exhaustive,
        baseline: false,
        max_graph_nodes: 100_000,
        gumbel_temperature: 1.0,
        action_bounds: vec![(-1.0, 1.0)],
        executor: pconfig,
    };
    let mut agent = Agent::new(config, Some(&ckpt), &mut rng).unwrap();
    let hash_before = agent.executor_hash();

    let env = cnap::envs::env_by_name("mountaincar-continuous").unwrap();
    let hyper = PpoHyper {
        updates: 2,
        rollout: RolloutMode::Steps(64),
        minibatch_size: 16,
        epochs: 2,
        ..PpoHyper::default()
    };
    cnap::ppo::train(env, &mut agent, &hyper, &mut rng).unwrap();
    let hash_after = agent.executor_hash();
    report(
        11,
        "frozen-executor contract",
        hash_before == hash_after,
        &format!("hash {hash_before:016x} -> {hash_after:016x} across a live PPO run"),
    );
}
