//! Commit to a vector, open one position, and show that the opening does not
//! verify for any other value or position.
//!
//! Usage: `cargo run --example merkle_commitment`

use vinf::merkle::wire::{decode_opening, encode_opening};
use vinf::merkle::{commit_vec, open, verify_opening, VcParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let vc = VcParams::default();
    let values: Vec<Vec<u8>> = ["alpha", "beta", "gamma", "delta", "epsilon"].iter().map(|s| s.as_bytes().to_vec()).collect();
    let cm = commit_vec(&vc, &values)?;
    println!("root {} over {} leaves (padded to {})", cm.to_hex(), cm.length, cm.padded_len());

    let proof = open(&vc, &values, 2)?;
    let wire = encode_opening(&proof);
    println!("opening of position 2: {} siblings, {} bytes on the wire", proof.siblings.len(), wire.len());
    let decoded = decode_opening(&wire)?;
    println!("verifies at 2 with the right value: {}", verify_opening(&vc, &cm, 2, b"gamma", &decoded));
    println!("verifies at 2 with another value:   {}", verify_opening(&vc, &cm, 2, b"GAMMA", &decoded));
    println!("verifies at 3 with the same value:  {}", verify_opening(&vc, &cm, 3, b"gamma", &decoded));
    Ok(())
}
