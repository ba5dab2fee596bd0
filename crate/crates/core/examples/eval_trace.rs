//! Evaluate the bundled Iris-shaped model on one query, print its trace
//! layer by layer, and round-trip it through the binary trace format.
//!
//! Usage: `cargo run --example eval_trace`

use std::path::Path;

use vinf::model::io::{read_model, trace_from_bytes, trace_to_bytes, QuerySet};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let model = read_model(&dir.join("iris_4_64_32_3.json"))?;
    let q = QuerySet::read(&dir.join("iris_queries.json"))?.queries.swap_remove(0);
    let arch = model.architecture();
    let trace = model.eval_trace(&q)?;
    for l in 0..trace.num_layers() {
        let layer = trace.layer(l);
        let active = layer.iter().filter(|v| **v != 0.0).count();
        println!("layer {l}: width {:>2}, {:>2} non-zero, first {:?}", layer.len(), active, &layer[..layer.len().min(3)]);
    }
    println!("output ({:?}): {:?}", arch.out_fn(), trace.output(arch)?);

    let bytes = trace_to_bytes(&trace);
    let back = trace_from_bytes(&bytes)?;
    println!("{} trace bytes, round trip exact: {}", bytes.len(), back == trace);
    Ok(())
}
