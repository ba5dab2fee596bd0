//! Logit-swap forgery on a toy 8-16-8-4 network.
//!
//! Usage: `cargo run --release --example swap_attack -- [inputs] [rounds]` (defaults 25, 10).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use vinf::attacks::{run_attack, AttackConfig};
use vinf::model::{Activation, Architecture, Model, OutputFn};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let inputs = args.first().copied().unwrap_or(25);
    let rounds = args.get(1).copied().unwrap_or(10);

    let arch = Architecture::dense(&[8, 16, 8, 4], Activation::Sigmoid, OutputFn::Identity)?;
    let model = Model::random(&arch, 7);
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let queries: Vec<Vec<f32>> = (0..inputs).map(|_| (0..8).map(|_| rng.random::<f32>()).collect()).collect();

    let cfg = AttackConfig {
        rounds,
        ..AttackConfig::swap()
    };
    let results = run_attack(&model, &queries, &cfg)?;
    let seps: Vec<f64> = results.iter().filter_map(|r| r.path_separation).collect();
    let min = seps.iter().copied().fold(f64::INFINITY, f64::min);
    let converged = results.iter().filter(|r| r.converged).count();
    let detectable = seps.iter().filter(|&&s| s > 1e-3).count();
    println!("rounds: {}", results.len());
    println!("converged: {converged}");
    println!("min path separation: {min:.6}");
    println!("rounds with path separation > 1e-3: {detectable}/{}", results.len());
    Ok(())
}
