//! Model, trace and query-set file formats.
//!
//! The text model document is JSON:
//!
//! ```text
//! {"version": 1, "layer_widths": [4, 64, 3], "activation": ["relu", "identity"],
//!  "out_fn": "softmax", "has_bias": true,
//!  "layers": [{"weights": [[..d_1 floats..] x d_0], "bias": [..d_1..]}, ...]}
//! ```
//!
//! The binary model (`VINF-MDL`) is
//! `magic | version u32 | L u32 | widths u64 x (L+1) | activation u8 x L |
//! out_fn u8 | has_bias u8 | per layer: weights f32 row-major, bias f32`.
//! The binary trace (`VINF-TRC`) is
//! `magic | layer count u64 | offsets u64 x count | value count u64 | f32 values`.
//! All integers and floats are little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Activation, Architecture, DenseLayer, Model, ModelError, OutputFn, Trace};
use crate::codec::{json_offset, put_f32s, ParseError, Reader};

pub const MODEL_MAGIC: &[u8; 8] = b"VINF-MDL";
pub const TRACE_MAGIC: &[u8; 8] = b"VINF-TRC";
pub const FORMAT_VERSION: u32 = 1;
const MAX_WIDTH: usize = 1 << 32;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl FormatError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        FormatError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    weights: Vec<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f32>>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    layer_widths: Vec<usize>,
    activation: Vec<Activation>,
    out_fn: OutputFn,
    has_bias: bool,
    layers: Vec<LayerDoc>,
}

/// Serializes to the text model document. `f32` values are written with
/// shortest round-trip formatting, so reading back is bit-exact.
pub fn model_to_json(model: &Model) -> String {
    let arch = model.architecture();
    let doc = ModelDoc {
        version: FORMAT_VERSION,
        layer_widths: arch.widths().to_vec(),
        activation: arch.activations().to_vec(),
        out_fn: arch.out_fn(),
        has_bias: arch.has_bias(),
        layers: model
            .layers()
            .iter()
            .map(|l| LayerDoc {
                weights: l.weights.chunks(l.outputs).map(<[f32]>::to_vec).collect(),
                bias: l.bias.clone(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("model document serializes")
}

pub fn model_from_json(text: &str) -> Result<Model, FormatError> {
    let doc: ModelDoc =
        serde_json::from_str(text).map_err(|e| ParseError::new(json_offset(text, &e), e.to_string()))?;
    if doc.version != FORMAT_VERSION {
        return Err(ParseError::new(0, format!("unsupported model version {}", doc.version)).into());
    }
    let arch = Architecture::new(doc.layer_widths, doc.activation, doc.out_fn, doc.has_bias)?;
    if doc.layers.len() != arch.depth() {
        return Err(ModelError::InvalidArchitecture(format!(
            "{} weight layers for depth {}",
            doc.layers.len(),
            arch.depth()
        ))
        .into());
    }
    let mut layers = Vec::with_capacity(arch.depth());
    for (i, ld) in doc.layers.into_iter().enumerate() {
        let l = i + 1;
        let (din, dout) = (arch.width(l - 1), arch.width(l));
        if ld.weights.len() != din {
            return Err(ModelError::ShapeMismatch {
                layer: l,
                expected: din,
                found: ld.weights.len(),
            }
            .into());
        }
        let mut weights = Vec::with_capacity(din * dout);
        for row in ld.weights {
            if row.len() != dout {
                return Err(ModelError::ShapeMismatch {
                    layer: l,
                    expected: dout,
                    found: row.len(),
                }
                .into());
            }
            weights.extend(row);
        }
        layers.push(DenseLayer {
            inputs: din,
            outputs: dout,
            weights,
            bias: ld.bias,
        });
    }
    Ok(Model::new(arch, layers)?)
}

pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    let arch = model.architecture();
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    write_arch(&mut out, arch);
    for layer in model.layers() {
        put_f32s(&mut out, &layer.weights);
        if let Some(b) = &layer.bias {
            put_f32s(&mut out, b);
        }
    }
    out
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<Model, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(MODEL_MAGIC)?;
    let at = r.offset();
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(ParseError::new(at, format!("unsupported model version {version}")).into());
    }
    let arch = read_arch(&mut r)?;
    let (depth, has_bias) = (arch.depth(), arch.has_bias());
    let mut layers = Vec::with_capacity(depth);
    for l in 1..=depth {
        let (din, dout) = (arch.width(l - 1), arch.width(l));
        let n = din
            .checked_mul(dout)
            .filter(|n| n.saturating_mul(4) <= r.remaining())
            .ok_or_else(|| r.error(format!("layer {l} weights exceed remaining input")))?;
        let weights = r.f32_vec(n)?;
        let bias = if has_bias { Some(r.f32_vec(dout)?) } else { None };
        layers.push(DenseLayer {
            inputs: din,
            outputs: dout,
            weights,
            bias,
        });
    }
    r.finish()?;
    Ok(Model::new(arch, layers)?)
}

/// Architecture header shared by the binary model and the model commitment:
/// `L u32 | widths u64 x (L+1) | activation u8 x L | out_fn u8 | has_bias u8`.
pub(crate) fn write_arch(out: &mut Vec<u8>, arch: &Architecture) {
    out.extend_from_slice(&(arch.depth() as u32).to_le_bytes());
    for &w in arch.widths() {
        out.extend_from_slice(&(w as u64).to_le_bytes());
    }
    out.extend(arch.activations().iter().map(|a| a.code()));
    out.push(arch.out_fn().code());
    out.push(u8::from(arch.has_bias()));
}

pub(crate) fn read_arch(r: &mut Reader<'_>) -> Result<Architecture, FormatError> {
    let depth = r.len_u32(8)?;
    let widths = (0..=depth)
        .map(|_| {
            let at = r.offset();
            let w = r.u64()?;
            usize::try_from(w)
                .ok()
                .filter(|&w| w > 0 && w <= MAX_WIDTH)
                .ok_or_else(|| ParseError::new(at, format!("implausible layer width {w}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut acts = Vec::with_capacity(depth);
    for _ in 0..depth {
        let at = r.offset();
        let code = r.u8()?;
        acts.push(Activation::from_code(code).ok_or_else(|| ParseError::new(at, format!("unknown activation code {code}")))?);
    }
    let at = r.offset();
    let code = r.u8()?;
    let out_fn = OutputFn::from_code(code).ok_or_else(|| ParseError::new(at, format!("unknown out_fn code {code}")))?;
    let at = r.offset();
    let has_bias = match r.u8()? {
        0 => false,
        1 => true,
        other => return Err(ParseError::new(at, format!("has_bias must be 0 or 1, found {other}")).into()),
    };
    Ok(Architecture::new(widths, acts, out_fn, has_bias)?)
}

pub fn trace_to_bytes(trace: &Trace) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 16 + trace.offsets().len() * 8 + trace.len() * 4);
    out.extend_from_slice(TRACE_MAGIC);
    out.extend_from_slice(&(trace.offsets().len() as u64).to_le_bytes());
    for &o in trace.offsets() {
        out.extend_from_slice(&(o as u64).to_le_bytes());
    }
    out.extend_from_slice(&(trace.len() as u64).to_le_bytes());
    put_f32s(&mut out, trace.values());
    out
}

pub fn trace_from_bytes(bytes: &[u8]) -> Result<Trace, FormatError> {
    let mut r = Reader::new(bytes);
    r.magic(TRACE_MAGIC)?;
    let layers = r.len_u64(8)?;
    let mut offsets = Vec::with_capacity(layers);
    for _ in 0..layers {
        offsets.push(r.u64()? as usize);
    }
    let n = r.len_u64(4)?;
    let values = r.f32_vec(n)?;
    r.finish()?;
    Ok(Trace::new(values, offsets)?)
}

/// Loads a model, choosing the binary or text decoder from the leading magic.
pub fn read_model(path: &Path) -> Result<Model, FormatError> {
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    if bytes.starts_with(MODEL_MAGIC) {
        model_from_bytes(&bytes)
    } else {
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| ParseError::new(e.valid_up_to(), "model file is neither VINF-MDL nor UTF-8 text"))?;
        model_from_json(text)
    }
}

/// Writes the binary form when the extension is `.bin` or `.mdl`, text otherwise.
pub fn write_model(path: &Path, model: &Model) -> Result<(), FormatError> {
    let binary = matches!(path.extension().and_then(|e| e.to_str()), Some("bin" | "mdl"));
    let bytes = if binary {
        model_to_bytes(model)
    } else {
        model_to_json(model).into_bytes()
    };
    std::fs::write(path, bytes).map_err(|e| FormatError::io(path, e))
}

pub fn read_trace(path: &Path) -> Result<Trace, FormatError> {
    let bytes = std::fs::read(path).map_err(|e| FormatError::io(path, e))?;
    trace_from_bytes(&bytes)
}

pub fn write_trace(path: &Path, trace: &Trace) -> Result<(), FormatError> {
    std::fs::write(path, trace_to_bytes(trace)).map_err(|e| FormatError::io(path, e))
}

/// Min-max scaler parameters recorded alongside exported queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: Vec<f32>,
    pub max: Vec<f32>,
}

/// A query file: scaled inputs, optional labels and reference outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuerySet {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaler: Option<Scaler>,
    pub queries: Vec<Vec<f32>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub logits: Vec<Vec<f32>>,
}

impl QuerySet {
    pub fn new(queries: Vec<Vec<f32>>) -> Self {
        Self {
            version: FORMAT_VERSION,
            scaler: None,
            queries,
            labels: Vec::new(),
            logits: Vec::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let set: QuerySet =
            serde_json::from_str(text).map_err(|e| ParseError::new(json_offset(text, &e), e.to_string()))?;
        if set.queries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { layer: 0 }.into());
        }
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("query set serializes")
    }

    pub fn read(path: &Path) -> Result<Self, FormatError> {
        let text = std::fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: &Path) -> Result<(), FormatError> {
        std::fs::write(path, self.to_json()).map_err(|e| FormatError::io(path, e))
    }
}

/// Parses a query given either as a JSON array (`[0.1, 0.2]`), a query-set
/// file whose first query is used, or comma separated numbers.
pub fn parse_query(text: &str) -> Result<Vec<f32>, FormatError> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        let set = QuerySet::from_json(trimmed)?;
        return set
            .queries
            .into_iter()
            .next()
            .ok_or_else(|| ParseError::new(0, "query set is empty").into());
    }
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed)
            .map_err(|e| ParseError::new(json_offset(trimmed, &e), e.to_string()).into());
    }
    let mut out = Vec::new();
    let mut offset = 0;
    for part in trimmed.split(',') {
        let v: f32 = part
            .trim()
            .parse()
            .map_err(|_| ParseError::new(offset, format!("not a number: {:?}", part.trim())))?;
        out.push(v);
        offset += part.len() + 1;
    }
    Ok(out)
}
