//! Random path testing against a trace with one tampered output node.
//!
//! With a single path the tamper is caught only when the path starts at the
//! tampered node, so acceptance sits near `(mu - 1) / mu`; covering every
//! output node with `mu` paths catches it every time.
//!
//! Usage: `cargo run --release --example path_test -- [mu] [trials]` (defaults 4, 10000).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use vinf::model::{Activation, Architecture, Model, OutputFn};
use vinf::path_test::{rand_path_test, rand_path_test_with, Challenge, PathSampling, DEFAULT_TOL};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let mu = args.first().copied().unwrap_or(4);
    let trials = args.get(1).copied().unwrap_or(10_000);

    let arch = Architecture::dense(&[4, 8, mu], Activation::Relu, OutputFn::Identity)?;
    let model = Model::random(&arch, 1);
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let q: Vec<f32> = (0..4).map(|_| rng.random()).collect();
    let mut trace = model.eval_trace(&q)?;
    trace.layer_mut(2)[0] += 1.0;

    let mut single = 0;
    let mut covering = 0;
    for _ in 0..trials {
        let rho = Challenge::random(&mut rng).rho;
        single += usize::from(rand_path_test(&model, &trace, &q, &rho, 1, DEFAULT_TOL).accept);
        covering += usize::from(rand_path_test_with(&model, &trace, &q, &rho, mu, PathSampling::OutputCoverage, DEFAULT_TOL).accept);
    }
    println!("mu = {mu}, {trials} challenges");
    println!("one path:             accepted {:.4} (expected {:.4})", single as f64 / trials as f64, (mu - 1) as f64 / mu as f64);
    println!("{mu} covering paths:   accepted {:.4}", covering as f64 / trials as f64);
    Ok(())
}
