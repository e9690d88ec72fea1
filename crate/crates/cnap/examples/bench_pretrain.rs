//! Executor pretraining probe at the default ER regime.
use cnap::executor::{pretrain_executor, PretrainHyper};
use cnap::graphgen::{generate_dataset, DatasetConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1e-3);
    let config = DatasetConfig::default();
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ds = generate_dataset(&config, &mut rng);
    println!("dataset: {} train graphs ({:?})", ds.train.len(), t0.elapsed());
    let hyper = PretrainHyper { epochs, lr, ..PretrainHyper::default() };
    let t0 = Instant::now();
    let (_exec, metrics) = pretrain_executor(&ds, &hyper).unwrap();
    println!("pretrain {epochs} epochs lr {lr}: {:?}", t0.elapsed());
    println!("epoch losses: {:?}", metrics.epoch_losses);
    println!("train_mse={:.2e} heldout={:.2e} size_gen={:.2e}", metrics.train_mse, metrics.heldout_mse, metrics.size_gen_mse);
}
