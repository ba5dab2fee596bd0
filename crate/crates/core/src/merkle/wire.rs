//! `VINF-OPN` opening proof encoding:
//! `magic | index u64 | value length u32 | value | sibling count u16 | siblings`.

use super::{Hash, OpeningProof};
use crate::codec::{ParseError, Reader};

pub const OPENING_MAGIC: &[u8; 8] = b"VINF-OPN";

pub fn encode_opening(proof: &OpeningProof) -> Vec<u8> {
    let mut out = Vec::with_capacity(proof.encoded_len());
    write_opening(&mut out, proof);
    out
}

pub(crate) fn write_opening(out: &mut Vec<u8>, proof: &OpeningProof) {
    out.extend_from_slice(OPENING_MAGIC);
    out.extend_from_slice(&(proof.index as u64).to_le_bytes());
    out.extend_from_slice(&(proof.value.len() as u32).to_le_bytes());
    out.extend_from_slice(&proof.value);
    out.extend_from_slice(&(proof.siblings.len() as u16).to_le_bytes());
    for s in &proof.siblings {
        out.extend_from_slice(s);
    }
}

pub(crate) fn read_opening(r: &mut Reader<'_>) -> Result<OpeningProof, ParseError> {
    r.magic(OPENING_MAGIC)?;
    let at = r.offset();
    let index = usize::try_from(r.u64()?).map_err(|_| ParseError::new(at, "index does not fit in usize"))?;
    let len = r.len_u32(1)?;
    let value = r.take(len)?.to_vec();
    let at = r.offset();
    let count = r.u16()? as usize;
    if count * 32 > r.remaining() {
        return Err(ParseError::new(at, format!("{count} siblings exceed remaining input")));
    }
    let siblings = (0..count).map(|_| r.array::<32>()).collect::<Result<Vec<Hash>, _>>()?;
    Ok(OpeningProof { index, value, siblings })
}

pub fn decode_opening(bytes: &[u8]) -> Result<OpeningProof, ParseError> {
    let mut r = Reader::new(bytes);
    let proof = read_opening(&mut r)?;
    r.finish()?;
    Ok(proof)
}
