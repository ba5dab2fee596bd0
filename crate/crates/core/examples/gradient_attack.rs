//! Gradient-descent reconstruction against the bundled Iris-shaped net.
//!
//! Usage: `cargo run --release --example gradient_attack -- [inputs] [rounds] [epochs]`
//! (defaults 125, 50, 10000).

use std::path::Path;
use std::time::Instant;

use vinf::attacks::{pass_rate_table, run_attack, AttackConfig, Metric, TABLE1_THRESHOLDS};
use vinf::model::io::{read_model, QuerySet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let inputs = args.first().copied().unwrap_or(125);
    let rounds = args.get(1).copied().unwrap_or(50);
    let epochs = args.get(2).copied().unwrap_or(10_000);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let model = read_model(&dir.join("iris_4_64_32_3.json"))?;
    let queries = QuerySet::read(&dir.join("iris_queries.json"))?.queries;
    let queries = &queries[..inputs.min(queries.len())];

    let cfg = AttackConfig {
        rounds,
        max_iters: epochs,
        ..AttackConfig::gradient_descent()
    };
    let start = Instant::now();
    let results = run_attack(&model, queries, &cfg)?;
    let table = pass_rate_table(&results, &TABLE1_THRESHOLDS, &Metric::ALL)?;
    print!("{}", table.render());
    println!("elapsed: {:.1?}", start.elapsed());
    Ok(())
}
