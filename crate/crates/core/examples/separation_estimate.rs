//! Threshold estimation against a family of perturbed models: builds the
//! separation dataset, prints its percentiles, and selects parameters.
//!
//! Usage: `cargo run --release --example separation_estimate -- [eps_sep] [eps_target]` (defaults 0.05, 0.05).

use std::path::Path;

use vinf::model::io::{read_model, QuerySet};
use vinf::model::Model;
use vinf::separation::report::summary_text;
use vinf::separation::{run_family, DatasetBuilder, TestConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let eps_sep = args.first().copied().unwrap_or(0.05);
    let eps_target = args.get(1).copied().unwrap_or(0.05);

    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let model = read_model(&dir.join("iris_4_64_32_3.json"))?;
    let queries = QuerySet::read(&dir.join("iris_queries.json"))?.queries;

    // Honest weights plus a little noise from another random model.
    let adversaries: Vec<Model> = [0.25f32, 0.5, 1.0]
        .iter()
        .enumerate()
        .map(|(k, &scale)| {
            let noise = Model::random(model.architecture(), 100 + k as u64);
            let mut m = model.clone();
            for (l, n) in m.layers_mut().iter_mut().zip(noise.layers()) {
                for (w, d) in l.weights.iter_mut().zip(&n.weights) {
                    *w += scale * d;
                }
            }
            m
        })
        .collect();

    let builder = DatasetBuilder::default();
    let ds = builder.build(&model, &adversaries, &queries)?;
    println!("layers kept by the divergence filter: {:?}", ds.filter.valid);
    print!("{}", summary_text(&ds.records));

    let cfg = TestConfig { repetitions: 20, ..TestConfig::default() };
    let result = run_family(&model, &adversaries, &queries, &builder, eps_sep, eps_target, &cfg)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}
