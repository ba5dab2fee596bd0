//! Little-endian byte cursor shared by the binary file formats.

use thiserror::Error;

/// A malformed binary or text document. `offset` is the byte position at
/// which decoding stopped.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(offset: usize, message: impl Into<String>) -> Self {
        Self {
            offset,
            message: message.into(),
        }
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn error(&self, message: impl Into<String>) -> ParseError {
        ParseError::new(self.pos, message)
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], ParseError> {
        if self.remaining() < n {
            return Err(self.error(format!(
                "unexpected end of input: need {n} bytes, {} left",
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    pub fn array<const N: usize>(&mut self) -> Result<[u8; N], ParseError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8; 8]) -> Result<(), ParseError> {
        let start = self.pos;
        let got = self.take(8)?;
        if got != expected {
            return Err(ParseError::new(
                start,
                format!(
                    "bad magic: expected {:?}, found {:?}",
                    String::from_utf8_lossy(expected),
                    String::from_utf8_lossy(got)
                ),
            ));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8, ParseError> {
        Ok(self.array::<1>()?[0])
    }

    pub fn u16(&mut self) -> Result<u16, ParseError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, ParseError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, ParseError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    /// Reads a `u64` that is used as an in-memory length, bounded by the bytes
    /// still available so a corrupt header cannot trigger a huge allocation.
    pub fn len_u64(&mut self, elem_size: usize) -> Result<usize, ParseError> {
        let at = self.pos;
        let n = self.u64()?;
        let need = n.checked_mul(elem_size as u64);
        match need {
            Some(bytes) if bytes <= self.remaining() as u64 => Ok(n as usize),
            _ => Err(ParseError::new(at, format!("length {n} exceeds remaining input"))),
        }
    }

    pub fn len_u32(&mut self, elem_size: usize) -> Result<usize, ParseError> {
        let at = self.pos;
        let n = self.u32()? as u64;
        if n * elem_size as u64 > self.remaining() as u64 {
            return Err(ParseError::new(at, format!("length {n} exceeds remaining input")));
        }
        Ok(n as usize)
    }

    pub fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>, ParseError> {
        let bytes = self.take(n * 4)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn finish(&self) -> Result<(), ParseError> {
        if self.remaining() != 0 {
            return Err(self.error(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

pub(crate) fn put_f32s(out: &mut Vec<u8>, values: &[f32]) {
    out.reserve(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Converts a serde_json line/column position into a byte offset in `text`.
pub(crate) fn json_offset(text: &str, err: &serde_json::Error) -> usize {
    let line = err.line();
    if line == 0 {
        return 0;
    }
    let mut offset = 0usize;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + err.column().saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reader_reports_offset_on_truncation() {
        let bytes = [1u8, 0, 0, 0, 7];
        let mut r = Reader::new(&bytes);
        assert_eq!(r.u32().unwrap(), 1);
        let err = r.u32().unwrap_err();
        assert_eq!(err.offset, 4);
    }

    #[test]
    fn oversized_length_prefix_is_rejected() {
        let mut bytes = u64::MAX.to_le_bytes().to_vec();
        bytes.extend_from_slice(&[0; 8]);
        let mut r = Reader::new(&bytes);
        assert_eq!(r.len_u64(4).unwrap_err().offset, 0);
    }

    #[test]
    fn json_offset_maps_line_and_column() {
        let text = "{\n  \"a\": x\n}";
        let err = serde_json::from_str::<serde_json::Value>(text).unwrap_err();
        let off = json_offset(text, &err);
        assert_eq!(&text[off..off + 1], "x");
    }
}
