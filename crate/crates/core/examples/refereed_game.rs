//! Two provers disagree about one hidden activation; the referee bisects
//! their hashed traces and checks a single node.
//!
//! Usage: `cargo run --example refereed_game`

use std::path::Path;

use vinf::model::io::{read_model, QuerySet};
use vinf::protocol::{commit_model, gen_params, ProtocolConfig};
use vinf::refereed::{padded_last, run_bisection, Referee, TraceParty};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let model = read_model(&dir.join("iris_4_64_32_3.json"))?;
    let q = QuerySet::read(&dir.join("iris_queries.json"))?.queries.swap_remove(0);
    let arch = model.architecture();
    let pp = gen_params(128, ProtocolConfig::default())?;

    let honest = model.eval_trace(&q)?;
    let mut lie = honest.values().to_vec();
    let target = arch.node_index(2, 5);
    lie[target] += 0.25;

    let mut p1 = TraceParty::with_values(&model, &lie);
    let mut p2 = TraceParty::honest(&model, &q)?;
    let mut referee = Referee::new(commit_model(&pp, &model)?);
    let verdict = run_bisection(&mut p1, &mut p2, &mut referee, &q)?;
    println!("p1 lies at index {target} of {} (padded to {})", arch.total_nodes(), padded_last(arch.total_nodes()));
    println!("{verdict:?}");
    let mut log = Vec::new();
    referee.write_log(&mut log)?;
    print!("{}", String::from_utf8(log)?);
    Ok(())
}
