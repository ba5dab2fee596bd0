//! The three-message protocol in one process: an honest run, then a prover
//! that commits to another model's trace under the honest commitment.
//!
//! Usage: `cargo run --example protocol_roundtrip`

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use vinf::model::io::{read_model, QuerySet};
use vinf::model::Model;
use vinf::path_test::Challenge;
use vinf::protocol::{commit_model, gen_params, prove1, prove2, verify, ProtocolConfig, Transcript};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let model = read_model(&dir.join("iris_4_64_32_3.json"))?;
    let q = QuerySet::read(&dir.join("iris_queries.json"))?.queries.swap_remove(10);
    let pp = gen_params(128, ProtocolConfig { num_paths: 3, ..ProtocolConfig::default() })?;
    let cm = commit_model(&pp, &model)?;
    let mut rng = ChaCha20Rng::seed_from_u64(0);

    let (proof1, state) = prove1(&pp, &model, &q)?;
    let rho = Challenge::random(&mut rng);
    let proof2 = prove2(&state, &rho)?;
    let verdict = verify(&pp, &cm, &q, &proof1.claimed_output, &proof1, &rho, &proof2);
    let transcript = Transcript {
        pp_hash: pp.digest(),
        cm: cm.clone(),
        qry: q.clone(),
        proof1: proof1.clone(),
        rho: Some(rho),
        proof2: Some(proof2.clone()),
    };
    println!("honest: {verdict:?}");
    println!("  claimed output {:?}", proof1.claimed_output);
    println!("  {} openings, transcript {} bytes", proof2.num_openings(), transcript.to_bytes().len());

    let other = Model::random(model.architecture(), 42);
    let forged = other.eval_trace(&q)?;
    let (_, state) = prove1(&pp, &model, &q)?;
    let (state, proof1) = state.with_trace(forged)?;
    let rho = Challenge::random(&mut rng);
    let proof2 = prove2(&state, &rho)?;
    let verdict = verify(&pp, &cm, &q, &proof1.claimed_output, &proof1, &rho, &proof2);
    println!("other model's trace: {verdict:?}");
    Ok(())
}
