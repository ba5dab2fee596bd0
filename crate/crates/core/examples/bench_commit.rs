//! Row-wise commitment benchmark at the synthetic 32-block shape; prints the
//! JSON report.
//!
//! Usage: `cargo run --release --example bench_commit`

use vinf::bench::{run_bench, BenchConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let report = run_bench(&BenchConfig::llama_synthetic())?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
