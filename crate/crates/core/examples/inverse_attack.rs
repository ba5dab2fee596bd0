//! Inverse-transform forgery on the Iris-shaped net with all three
//! pseudo-inverse methods.
//!
//! Usage: `cargo run --release --example inverse_attack -- [samples]` (default 120).

use std::path::Path;

use vinf::attacks::{pass_rate_table, run_attack, AttackConfig, InverseMethod, Metric, TABLE2_THRESHOLDS};
use vinf::model::io::{read_model, QuerySet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples: usize = std::env::args().nth(1).map(|a| a.parse()).transpose()?.unwrap_or(120);
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let model = read_model(&dir.join("iris_4_64_32_3.json"))?;
    let queries = QuerySet::read(&dir.join("iris_queries.json"))?.queries;
    let queries = &queries[..samples.min(queries.len())];

    for method in InverseMethod::ALL {
        let results = run_attack(&model, queries, &AttackConfig::inverse(method))?;
        let table = pass_rate_table(&results, &TABLE2_THRESHOLDS, &Metric::ALL)?;
        println!("== {}", method.name());
        print!("{}", table.render());
    }
    Ok(())
}
