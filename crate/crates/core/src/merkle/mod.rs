//! SHA-256 Merkle vector commitments with position-bound leaves.
//!
//! Leaf `i` hashes to `H(0x00 | i as u64 LE | value)`, internal nodes to
//! `H(0x01 | left | right)`. Vectors are padded to the next power of two with
//! `H(0x00 | i | "")`.

pub mod hybrid;
pub mod wire;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use hybrid::{commit_trace_hybrid, HybridCommitment, HybridLayer, LayerKind, RowLocation, Tensor};

use crate::model::Model;

pub type Hash = [u8; 32];

const LEAF_TAG: u8 = 0x00;
const NODE_TAG: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VcError {
    #[error("cannot commit to an empty vector")]
    Empty,
    #[error("vector of length {len} exceeds max_len {max}")]
    TooLong { len: usize, max: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("max_len must be at least 1")]
    InvalidParams,
}

/// Public parameters. The hash function is fixed to SHA-256.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VcParams {
    pub max_len: usize,
}

impl VcParams {
    pub fn new(max_len: usize) -> Result<Self, VcError> {
        if max_len == 0 {
            return Err(VcError::InvalidParams);
        }
        Ok(Self { max_len })
    }

    pub const HASH_ID: &'static str = "sha256";
}

impl Default for VcParams {
    fn default() -> Self {
        Self { max_len: 1 << 40 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Commitment {
    #[serde(with = "hex_hash")]
    pub root: Hash,
    pub length: usize,
}

impl Commitment {
    pub fn to_hex(&self) -> String {
        hex::encode(self.root)
    }

    pub fn to_bytes(&self) -> [u8; 40] {
        let mut out = [0u8; 40];
        out[..32].copy_from_slice(&self.root);
        out[32..].copy_from_slice(&(self.length as u64).to_le_bytes());
        out
    }

    pub fn padded_len(&self) -> usize {
        self.length.next_power_of_two()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpeningProof {
    pub index: usize,
    #[serde(with = "hex::serde")]
    pub value: Vec<u8>,
    #[serde(with = "hex_hashes")]
    pub siblings: Vec<Hash>,
}

impl OpeningProof {
    /// Wire size in bytes (see [`wire`]).
    pub fn encoded_len(&self) -> usize {
        8 + 8 + 4 + self.value.len() + 2 + 32 * self.siblings.len()
    }
}

pub fn leaf_hash(index: usize, value: &[u8]) -> Hash {
    let mut h = Sha256::new();
    h.update([LEAF_TAG]);
    h.update((index as u64).to_le_bytes());
    h.update(value);
    h.finalize().into()
}

pub fn node_hash(left: &Hash, right: &Hash) -> Hash {
    let mut h = Sha256::new();
    h.update([NODE_TAG]);
    h.update(left);
    h.update(right);
    h.finalize().into()
}

/// Number of sibling hashes in an opening for a vector of `len` leaves.
pub fn proof_depth(len: usize) -> usize {
    len.next_power_of_two().trailing_zeros() as usize
}

/// A fully materialized tree; `levels[0]` holds the padded leaf hashes and
/// the last level holds the root.
#[derive(Debug, Clone)]
pub struct MerkleTree {
    levels: Vec<Vec<Hash>>,
    length: usize,
}

impl MerkleTree {
    pub fn from_leaf_hashes(mut leaves: Vec<Hash>) -> Result<Self, VcError> {
        let length = leaves.len();
        if length == 0 {
            return Err(VcError::Empty);
        }
        let padded = length.next_power_of_two();
        leaves.extend((length..padded).map(|i| leaf_hash(i, &[])));
        let mut levels = vec![leaves];
        while levels.last().map_or(0, Vec::len) > 1 {
            let prev = levels.last().unwrap();
            let next: Vec<Hash> = if prev.len() >= 4096 {
                prev.par_chunks_exact(2).map(|p| node_hash(&p[0], &p[1])).collect()
            } else {
                prev.chunks_exact(2).map(|p| node_hash(&p[0], &p[1])).collect()
            };
            levels.push(next);
        }
        Ok(Self { levels, length })
    }

    /// Hashes each leaf (in parallel for large inputs) and builds the tree.
    pub fn build<T: AsRef<[u8]> + Sync>(values: &[T]) -> Result<Self, VcError> {
        let leaves: Vec<Hash> = if values.len() >= 1024 {
            values.par_iter().enumerate().map(|(i, v)| leaf_hash(i, v.as_ref())).collect()
        } else {
            values.iter().enumerate().map(|(i, v)| leaf_hash(i, v.as_ref())).collect()
        };
        Self::from_leaf_hashes(leaves)
    }

    pub fn root(&self) -> Hash {
        self.levels.last().unwrap()[0]
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn commitment(&self) -> Commitment {
        Commitment {
            root: self.root(),
            length: self.length,
        }
    }

    pub fn siblings(&self, index: usize) -> Result<Vec<Hash>, VcError> {
        if index >= self.length {
            return Err(VcError::IndexOutOfRange {
                index,
                len: self.length,
            });
        }
        let mut idx = index;
        let mut out = Vec::with_capacity(self.levels.len() - 1);
        for level in &self.levels[..self.levels.len() - 1] {
            out.push(level[idx ^ 1]);
            idx >>= 1;
        }
        Ok(out)
    }

    pub fn open(&self, index: usize, value: &[u8]) -> Result<OpeningProof, VcError> {
        Ok(OpeningProof {
            index,
            value: value.to_vec(),
            siblings: self.siblings(index)?,
        })
    }
}

fn check_len(params: &VcParams, len: usize) -> Result<(), VcError> {
    if len == 0 {
        return Err(VcError::Empty);
    }
    if len > params.max_len {
        return Err(VcError::TooLong {
            len,
            max: params.max_len,
        });
    }
    Ok(())
}

pub fn commit_vec<T: AsRef<[u8]> + Sync>(params: &VcParams, values: &[T]) -> Result<Commitment, VcError> {
    check_len(params, values.len())?;
    Ok(MerkleTree::build(values)?.commitment())
}

/// Opens position `index`. Builds the tree from scratch; keep a
/// [`MerkleTree`] around when opening many positions.
pub fn open<T: AsRef<[u8]> + Sync>(params: &VcParams, values: &[T], index: usize) -> Result<OpeningProof, VcError> {
    check_len(params, values.len())?;
    if index >= values.len() {
        return Err(VcError::IndexOutOfRange {
            index,
            len: values.len(),
        });
    }
    MerkleTree::build(values)?.open(index, values[index].as_ref())
}

/// Accepts iff `proof` authenticates `value` at `index` under `cm`.
pub fn verify_opening(params: &VcParams, cm: &Commitment, index: usize, value: &[u8], proof: &OpeningProof) -> bool {
    if cm.length == 0 || cm.length > params.max_len || index >= cm.length || proof.index != index {
        return false;
    }
    if proof.value != value || proof.siblings.len() != proof_depth(cm.length) {
        return false;
    }
    let mut acc = leaf_hash(index, value);
    let mut idx = index;
    for sib in &proof.siblings {
        acc = if idx & 1 == 0 {
            node_hash(&acc, sib)
        } else {
            node_hash(sib, &acc)
        };
        idx >>= 1;
    }
    acc == cm.root
}

/// Leaf payloads of the model commitment: one leaf per computed node holding
/// its fan-in weights followed by its bias, layer-major then node order.
pub fn model_leaves(model: &Model) -> Vec<Vec<u8>> {
    let arch = model.architecture();
    let mut out = Vec::with_capacity(arch.computed_nodes());
    for l in 1..=arch.depth() {
        let layer = model.layer(l);
        for j in 0..layer.outputs {
            out.push(layer.fan_in(j).to_bytes());
        }
    }
    out
}

/// Leaf index of computed node `(layer, node)` in the model commitment.
pub fn model_leaf_index(arch: &crate::model::Architecture, layer: usize, node: usize) -> usize {
    arch.layer_offset(layer) - arch.input_width() + node
}

/// Deterministic commitment to a model's weights.
pub fn commit_to_model(params: &VcParams, model: &Model) -> Result<Commitment, VcError> {
    commit_vec(params, &model_leaves(model))
}

/// Leaf payloads of the flat trace commitment: one `f32` LE per node.
pub fn trace_leaves(values: &[f32]) -> Vec<[u8; 4]> {
    values.iter().map(|v| v.to_le_bytes()).collect()
}

mod hex_hash {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(h: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(h))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        let mut out = [0u8; 32];
        hex::decode_to_slice(&s, &mut out).map_err(serde::de::Error::custom)?;
        Ok(out)
    }
}

mod hex_hashes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(hs: &[[u8; 32]], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(hs.iter().map(hex::encode))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<[u8; 32]>, D::Error> {
        let strs = Vec::<String>::deserialize(d)?;
        strs.iter()
            .map(|s| {
                let mut out = [0u8; 32];
                hex::decode_to_slice(s, &mut out).map_err(serde::de::Error::custom)?;
                Ok(out)
            })
            .collect()
    }
}
