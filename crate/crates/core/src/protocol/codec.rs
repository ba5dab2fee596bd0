//! `VINF-TXN` transcript files.
//!
//! After the magic come six sections, each a `u64` LE byte length followed by
//! its payload, in the order pp-hash, cm_M, qry, proof1, rho, proof2. A
//! partial transcript (before the challenge or the response) leaves the rho
//! and proof2 sections empty.
//!
//! Payloads:
//! * pp-hash: 32 bytes.
//! * cm_M: architecture header, root (32), length (`u64`).
//! * qry: count (`u64`), `f32` values.
//! * proof1: output count (`u64`), `f32` values, trace root (32), trace length (`u64`).
//! * rho: 32 bytes.
//! * proof2: weight count (`u32`), then `layer u32 | node u32 | VINF-OPN` each;
//!   activation count (`u32`), then `index u64 | VINF-OPN` each.

use std::path::Path;

use super::{ModelCommitment, Proof1, Proof2};
use crate::codec::{put_f32s, ParseError, Reader};
use crate::merkle::wire::{read_opening, write_opening};
use crate::merkle::{Commitment, Hash};
use crate::model::io::{read_arch, write_arch, FormatError};
use crate::model::Architecture;
use crate::path_test::Challenge;

pub const TRANSCRIPT_MAGIC: &[u8; 8] = b"VINF-TXN";

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub pp_hash: Hash,
    pub cm: ModelCommitment,
    pub qry: Vec<f32>,
    pub proof1: Proof1,
    pub rho: Option<Challenge>,
    pub proof2: Option<Proof2>,
}

pub(crate) fn arch_bytes(arch: &Architecture) -> Vec<u8> {
    let mut out = Vec::new();
    write_arch(&mut out, arch);
    out
}

fn put_commitment(out: &mut Vec<u8>, c: &Commitment) {
    out.extend_from_slice(&c.root);
    out.extend_from_slice(&(c.length as u64).to_le_bytes());
}

fn read_commitment(r: &mut Reader<'_>) -> Result<Commitment, ParseError> {
    let root = r.array::<32>()?;
    let at = r.offset();
    let length = usize::try_from(r.u64()?).map_err(|_| ParseError::new(at, "commitment length overflows"))?;
    Ok(Commitment { root, length })
}

pub fn model_commitment_bytes(cm: &ModelCommitment) -> Vec<u8> {
    let mut out = arch_bytes(&cm.arch);
    put_commitment(&mut out, &cm.weights);
    out
}

fn read_model_commitment(r: &mut Reader<'_>) -> Result<ModelCommitment, FormatError> {
    let arch = read_arch(r)?;
    let weights = read_commitment(r)?;
    Ok(ModelCommitment { arch, weights })
}

fn put_vec(out: &mut Vec<u8>, v: &[f32]) {
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    put_f32s(out, v);
}

fn read_vec(r: &mut Reader<'_>) -> Result<Vec<f32>, ParseError> {
    let n = r.len_u64(4)?;
    r.f32_vec(n)
}

pub fn proof1_bytes(p: &Proof1) -> Vec<u8> {
    let mut out = Vec::new();
    put_vec(&mut out, &p.claimed_output);
    put_commitment(&mut out, &p.trace_commitment);
    out
}

fn read_proof1(r: &mut Reader<'_>) -> Result<Proof1, ParseError> {
    let claimed_output = read_vec(r)?;
    let trace_commitment = read_commitment(r)?;
    Ok(Proof1 {
        claimed_output,
        trace_commitment,
    })
}

pub fn proof2_bytes(p: &Proof2) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&(p.weights.len() as u32).to_le_bytes());
    for (&(layer, node), proof) in &p.weights {
        out.extend_from_slice(&(layer as u32).to_le_bytes());
        out.extend_from_slice(&(node as u32).to_le_bytes());
        write_opening(&mut out, proof);
    }
    out.extend_from_slice(&(p.activations.len() as u32).to_le_bytes());
    for (&idx, proof) in &p.activations {
        out.extend_from_slice(&(idx as u64).to_le_bytes());
        write_opening(&mut out, proof);
    }
    out
}

fn read_proof2(r: &mut Reader<'_>) -> Result<Proof2, ParseError> {
    // Smallest opening: 8 + 8 + 4 + 2 bytes, plus its key.
    let nw = r.len_u32(8 + 22)?;
    let mut p = Proof2::default();
    for _ in 0..nw {
        let at = r.offset();
        let key = (r.u32()? as usize, r.u32()? as usize);
        if p.weights.insert(key, read_opening(r)?).is_some() {
            return Err(ParseError::new(at, format!("duplicate weight opening for {key:?}")));
        }
    }
    let na = r.len_u32(8 + 22)?;
    for _ in 0..na {
        let at = r.offset();
        let idx = usize::try_from(r.u64()?).map_err(|_| ParseError::new(at, "index overflows"))?;
        if p.activations.insert(idx, read_opening(r)?).is_some() {
            return Err(ParseError::new(at, format!("duplicate activation opening at {idx}")));
        }
    }
    Ok(p)
}

fn put_section(out: &mut Vec<u8>, payload: &[u8]) {
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(payload);
}

/// Reads one length-prefixed section and checks the parser consumed it all.
fn section<'a, T, E>(r: &mut Reader<'a>, name: &str, parse: impl FnOnce(&mut Reader<'a>) -> Result<T, E>) -> Result<Option<T>, FormatError>
where
    E: Into<FormatError>,
{
    let len = r.len_u64(1)?;
    if len == 0 {
        return Ok(None);
    }
    let start = r.offset();
    let body = r.take(len)?;
    let mut sub = Reader::new(body);
    let value = parse(&mut sub).map_err(|e| shift(e.into(), start))?;
    if sub.remaining() != 0 {
        return Err(ParseError::new(start + sub.offset(), format!("{} trailing bytes in {name} section", sub.remaining())).into());
    }
    Ok(Some(value))
}

fn shift(e: FormatError, by: usize) -> FormatError {
    match e {
        FormatError::Parse(p) => FormatError::Parse(ParseError::new(p.offset + by, p.message)),
        other => other,
    }
}

impl Transcript {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(TRANSCRIPT_MAGIC);
        put_section(&mut out, &self.pp_hash);
        put_section(&mut out, &model_commitment_bytes(&self.cm));
        let mut q = Vec::new();
        put_vec(&mut q, &self.qry);
        put_section(&mut out, &q);
        put_section(&mut out, &proof1_bytes(&self.proof1));
        put_section(&mut out, self.rho.as_ref().map_or(&[][..], |c| &c.rho[..]));
        put_section(&mut out, &self.proof2.as_ref().map(proof2_bytes).unwrap_or_default());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader::new(bytes);
        r.magic(TRANSCRIPT_MAGIC)?;
        let missing = |r: &Reader<'_>, what: &str| FormatError::from(ParseError::new(r.offset(), format!("{what} section is empty")));
        let pp_hash = section(&mut r, "pp-hash", |s| s.array::<32>())?.ok_or_else(|| missing(&r, "pp-hash"))?;
        let cm = section(&mut r, "cm_M", read_model_commitment)?.ok_or_else(|| missing(&r, "cm_M"))?;
        let qry = section(&mut r, "qry", read_vec)?.ok_or_else(|| missing(&r, "qry"))?;
        let proof1 = section(&mut r, "proof1", read_proof1)?.ok_or_else(|| missing(&r, "proof1"))?;
        let rho = section(&mut r, "rho", |s| s.array::<32>())?.map(Challenge::new);
        let proof2 = section(&mut r, "proof2", read_proof2)?;
        r.finish()?;
        if proof2.is_some() && rho.is_none() {
            return Err(ParseError::new(r.offset(), "proof2 present without a challenge").into());
        }
        Ok(Self {
            pp_hash,
            cm,
            qry,
            proof1,
            rho,
            proof2,
        })
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        std::fs::write(path, self.to_bytes()).map_err(|e| FormatError::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::model::{Activation, OutputFn};

    #[test]
    fn round_trip_full_and_partial() {
        let arch = Architecture::dense(&[2, 3, 2], Activation::Sigmoid, OutputFn::Identity).unwrap();
        let m = Model::random(&arch, 1);
        let pp = gen_params(128, ProtocolConfig::default()).unwrap();
        let (t, v) = self_play(&pp, &m, &[1.0, -1.0], &Challenge::new([7; 32])).unwrap();
        assert!(v.accept);
        let back = Transcript::from_bytes(&t.to_bytes()).unwrap();
        assert_eq!(back, t);

        let partial = Transcript {
            rho: None,
            proof2: None,
            ..t.clone()
        };
        assert_eq!(Transcript::from_bytes(&partial.to_bytes()).unwrap(), partial);
    }

    #[test]
    fn truncation_is_a_parse_error() {
        let arch = Architecture::dense(&[2, 2], Activation::Relu, OutputFn::Identity).unwrap();
        let m = Model::random(&arch, 1);
        let pp = gen_params(128, ProtocolConfig::default()).unwrap();
        let (t, _) = self_play(&pp, &m, &[1.0, -1.0], &Challenge::new([7; 32])).unwrap();
        let bytes = t.to_bytes();
        for cut in [0, 7, 20, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(Transcript::from_bytes(&bytes[..cut]), Err(crate::model::io::FormatError::Parse(_))));
        }
    }
}
