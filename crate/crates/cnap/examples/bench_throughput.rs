//! Rough single-core throughput probe for the MountainCar table-1 config.
use cnap::agent::{Agent, SamplerKind};
use cnap::envs::env_by_name;
use cnap::harness::{build_agent_config, ExperimentConfig, Variant};
use cnap::ppo::{train, PpoHyper, RolloutMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    // Random-exploration probe: fraction of uniform random binned episodes
    // reaching the goal.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut env = env_by_name("mountaincar-continuous").unwrap();
    let mut hits = 0;
    let episodes = 200;
    let t0 = Instant::now();
    use rand::Rng;
    for _ in 0..episodes {
        let mut _obs = env.reset(&mut rng);
        loop {
            let bin: usize = rng.random_range(0..10);
            let a = -1.0 + 2.0 * bin as f64 / 9.0;
            let step = env.step(&[a]).unwrap();
            if step.done { hits += 1; break; }
            if step.truncated { break; }
        }
    }
    println!("random-policy goal rate: {}/{episodes} ({:?})", hits, t0.elapsed());

    // Training throughput: 2 updates of the table-1 CNAP config.
    let exp = ExperimentConfig {
        name: "bench".into(), env: "mountaincar-continuous".into(),
        variant: Variant::CnapR, sampler: SamplerKind::Exhaustive,
        bins: 10, budget: 10, gnn_steps: 1, seeds: vec![0], eval_episodes: 3,
        executor_checkpoint: None, output_dir: "/tmp/bench".into(),
        embedding_dim: 50, hidden_dim: 64, max_graph_nodes: 100_000,
        gumbel_temperature: 1.0,
        ppo: PpoHyper { updates: 2, rollout: RolloutMode::Episodes(5), ..PpoHyper::default() },
    };
    // Fresh random processor (untrained) is fine for a speed probe.
    let mut store = cnap::diffcore::ParamStore::new();
    let mut prng = ChaCha8Rng::seed_from_u64(1);
    let pc = cnap::executor::ExecutorConfig { hidden_dim: 50, edge_feat_dim: 3 };
    let proc = cnap::executor::Processor::register(&mut store, "", pc, &mut prng).unwrap();
    let ckpt = cnap::executor::export_processor(&store, "", proc.config);

    let env = env_by_name("mountaincar-continuous").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut agent = Agent::new(build_agent_config(&exp, env.as_ref()), Some(&ckpt), &mut rng).unwrap();
    let t0 = Instant::now();
    let (metrics, collector) = train(env, &mut agent, &exp.ppo, &mut rng).unwrap();
    let dt = t0.elapsed();
    println!("2 updates: {} env steps in {:?} ({:.1} steps/s incl. updates)",
        collector.total_env_steps, dt, collector.total_env_steps as f64 / dt.as_secs_f64());
    for m in &metrics { println!("  update {}: reward {:.2} pol {:.3} val {:.3} ent {:.3} clip {:.2} wall {:.0}ms",
        m.update, m.mean_episode_reward, m.policy_loss, m.value_loss, m.entropy, m.clip_fraction, m.wall_ms); }
}
