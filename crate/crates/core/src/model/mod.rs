//! Dense feed-forward models, execution traces, and the per-node
//! consistency check that every verifier in this crate is built on.
//!
//! Activations use the row-vector convention: layer `l` is
//! `a_l = phi_l(a_{l-1} W_l + b_l)` where `W_l` is stored row-major with
//! shape `d_{l-1} x d_l`. Committed values are `f32`; each node is
//! accumulated in `f64` in ascending parent order (bias last, as a virtual
//! parent with activation 1) and rounded once to `f32`. Fixing that order is
//! what lets a verifier recompute a node bit-for-bit.

pub mod io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("layer {layer}: expected {expected} values, found {found}")]
    ShapeMismatch {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("query has length {found}, model expects {expected}")]
    QueryLength { expected: usize, found: usize },
    #[error("layer {layer}: non-finite value")]
    NonFinite { layer: usize },
    #[error("node ({layer}, {node}) is out of range")]
    NodeOutOfRange { layer: usize, node: usize },
    #[error("node {node} is in the input layer; input nodes are anchored to the query, not checked")]
    InputNode { node: usize },
}

/// Per-layer non-linearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `y`.
    #[inline]
    pub fn derivative(self, z: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

/// Map from the last layer's activations to the model output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFn {
    Identity,
    Softmax,
}

impl OutputFn {
    pub fn apply(self, last: &[f64]) -> Vec<f64> {
        match self {
            OutputFn::Identity => last.to_vec(),
            OutputFn::Softmax => softmax(last),
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            OutputFn::Identity => 0,
            OutputFn::Softmax => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(OutputFn::Identity),
            1 => Some(OutputFn::Softmax),
            _ => None,
        }
    }
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Public shape of a fully connected network. Parents of every node in layer
/// `l >= 1` are all nodes of layer `l - 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
    activations: Vec<Activation>,
    out_fn: OutputFn,
    has_bias: bool,
}

impl Architecture {
    pub fn new(
        widths: Vec<usize>,
        activations: Vec<Activation>,
        out_fn: OutputFn,
        has_bias: bool,
    ) -> Result<Self, ModelError> {
        if widths.len() < 2 {
            return Err(ModelError::InvalidArchitecture(
                "need an input layer and at least one computed layer".into(),
            ));
        }
        if let Some(i) = widths.iter().position(|&w| w == 0) {
            return Err(ModelError::InvalidArchitecture(format!("layer {i} has width 0")));
        }
        if activations.len() != widths.len() - 1 {
            return Err(ModelError::InvalidArchitecture(format!(
                "{} activations for {} computed layers",
                activations.len(),
                widths.len() - 1
            )));
        }
        Ok(Self {
            widths,
            activations,
            out_fn,
            has_bias,
        })
    }

    /// Hidden layers use `hidden`, the last layer is `Identity`.
    pub fn dense(widths: &[usize], hidden: Activation, out_fn: OutputFn) -> Result<Self, ModelError> {
        let n = widths.len().saturating_sub(1);
        let mut acts = vec![hidden; n];
        if let Some(last) = acts.last_mut() {
            *last = Activation::Identity;
        }
        Self::new(widths.to_vec(), acts, out_fn, true)
    }

    /// Number of computed layers `L` (the input layer is layer 0).
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn width(&self, layer: usize) -> usize {
        self.widths[layer]
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        self.widths[self.depth()]
    }

    pub fn activation(&self, layer: usize) -> Activation {
        self.activations[layer - 1]
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn out_fn(&self) -> OutputFn {
        self.out_fn
    }

    pub fn has_bias(&self) -> bool {
        self.has_bias
    }

    pub fn with_out_fn(mut self, out_fn: OutputFn) -> Self {
        self.out_fn = out_fn;
        self
    }

    /// Start index of each layer in the flat trace.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        self.widths
            .iter()
            .map(|w| {
                let o = acc;
                acc += w;
                o
            })
            .collect()
    }

    pub fn layer_offset(&self, layer: usize) -> usize {
        self.widths[..layer].iter().sum()
    }

    pub fn total_nodes(&self) -> usize {
        self.widths.iter().sum()
    }

    /// Nodes outside the input layer.
    pub fn computed_nodes(&self) -> usize {
        self.total_nodes() - self.widths[0]
    }

    pub fn node_index(&self, layer: usize, node: usize) -> usize {
        self.layer_offset(layer) + node
    }

    /// Inverse of [`Architecture::node_index`].
    pub fn locate(&self, index: usize) -> Option<(usize, usize)> {
        let mut start = 0;
        for (layer, &w) in self.widths.iter().enumerate() {
            if index < start + w {
                return Some((layer, index - start));
            }
            start += w;
        }
        None
    }

    pub fn output_indices(&self) -> std::ops::Range<usize> {
        let start = self.layer_offset(self.depth());
        start..start + self.output_width()
    }

    /// Number of weights feeding one node of `layer`, bias included.
    pub fn fan_in_len(&self, layer: usize) -> usize {
        self.widths[layer - 1] + usize::from(self.has_bias)
    }
}

/// One dense layer: `weights` is row-major `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f32>,
    pub bias: Option<Vec<f32>>,
}

impl DenseLayer {
    #[inline]
    pub fn weight(&self, parent: usize, node: usize) -> f32 {
        self.weights[parent * self.outputs + node]
    }

    pub fn fan_in(&self, node: usize) -> FanIn {
        FanIn {
            weights: (0..self.inputs).map(|i| self.weight(i, node)).collect(),
            bias: self.bias.as_ref().map(|b| b[node]),
        }
    }
}

/// Incoming weights of a single node, in ascending parent order.
#[derive(Debug, Clone, PartialEq)]
pub struct FanIn {
    pub weights: Vec<f32>,
    pub bias: Option<f32>,
}

impl FanIn {
    /// Leaf payload used by the model commitment: weights then bias, `f32` LE.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity((self.weights.len() + 1) * 4);
        crate::codec::put_f32s(&mut out, &self.weights);
        if let Some(b) = self.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], parents: usize, has_bias: bool) -> Option<Self> {
        let expected = (parents + usize::from(has_bias)) * 4;
        if bytes.len() != expected {
            return None;
        }
        let mut vals: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let bias = if has_bias { vals.pop() } else { None };
        Some(Self { weights: vals, bias })
    }
}

/// Computes one node exactly as [`eval_trace`] does.
#[inline]
pub fn node_value(fan_in: &FanIn, parents: &[f32], activation: Activation) -> f32 {
    debug_assert_eq!(fan_in.weights.len(), parents.len());
    let mut acc = 0.0f64;
    for (w, a) in fan_in.weights.iter().zip(parents) {
        acc += f64::from(*w) * f64::from(*a);
    }
    if let Some(b) = fan_in.bias {
        acc += f64::from(b);
    }
    activation.apply(acc) as f32
}

/// Outcome of a local consistency check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalCheck {
    pub pass: bool,
    pub residual: f64,
    pub expected: f32,
}

/// Checks `claimed == phi(sum_i w_i a_i + b)` within `tol`. With `tol = 0`
/// the comparison is exact.
pub fn check_node(fan_in: &FanIn, parents: &[f32], claimed: f32, activation: Activation, tol: f64) -> LocalCheck {
    let expected = node_value(fan_in, parents, activation);
    let residual = (f64::from(claimed) - f64::from(expected)).abs();
    let pass = if residual.is_nan() { false } else { residual <= tol };
    LocalCheck {
        pass,
        residual,
        expected,
    }
}

/// Architecture plus weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    arch: Architecture,
    layers: Vec<DenseLayer>,
}

impl Model {
    pub fn new(arch: Architecture, layers: Vec<DenseLayer>) -> Result<Self, ModelError> {
        if layers.len() != arch.depth() {
            return Err(ModelError::InvalidArchitecture(format!(
                "{} weight layers for depth {}",
                layers.len(),
                arch.depth()
            )));
        }
        for (i, layer) in layers.iter().enumerate() {
            let l = i + 1;
            let (din, dout) = (arch.width(l - 1), arch.width(l));
            if layer.inputs != din || layer.outputs != dout || layer.weights.len() != din * dout {
                return Err(ModelError::ShapeMismatch {
                    layer: l,
                    expected: din * dout,
                    found: layer.weights.len(),
                });
            }
            match (&layer.bias, arch.has_bias()) {
                (Some(b), true) if b.len() == dout => {}
                (None, false) => {}
                (b, _) => {
                    return Err(ModelError::ShapeMismatch {
                        layer: l,
                        expected: if arch.has_bias() { dout } else { 0 },
                        found: b.as_ref().map_or(0, Vec::len),
                    })
                }
            }
            let finite = layer.weights.iter().all(|w| w.is_finite())
                && layer.bias.iter().flatten().all(|b| b.is_finite());
            if !finite {
                return Err(ModelError::NonFinite { layer: l });
            }
        }
        Ok(Self { arch, layers })
    }

    /// Seeded weights drawn uniformly from `[-1, 1] / sqrt(d_{l-1})`.
    pub fn random(arch: &Architecture, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let layers = (1..=arch.depth())
            .map(|l| {
                let (din, dout) = (arch.width(l - 1), arch.width(l));
                let scale = 1.0 / (din as f64).sqrt();
                let mut draw = || (rng.random_range(-1.0f64..=1.0) * scale) as f32;
                let weights = (0..din * dout).map(|_| draw()).collect();
                let bias = arch.has_bias().then(|| (0..dout).map(|_| draw()).collect());
                DenseLayer {
                    inputs: din,
                    outputs: dout,
                    weights,
                    bias,
                }
            })
            .collect();
        Self {
            arch: arch.clone(),
            layers,
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    /// Weight layer feeding computed layer `layer` (1-based).
    pub fn layer(&self, layer: usize) -> &DenseLayer {
        &self.layers[layer - 1]
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn fan_in(&self, layer: usize, node: usize) -> Result<FanIn, ModelError> {
        if layer == 0 {
            return Err(ModelError::InputNode { node });
        }
        if layer > self.arch.depth() || node >= self.arch.width(layer) {
            return Err(ModelError::NodeOutOfRange { layer, node });
        }
        Ok(self.layer(layer).fan_in(node))
    }

    /// Runs inference and records every activation, input layer included.
    pub fn eval_trace(&self, query: &[f32]) -> Result<Trace, ModelError> {
        let d0 = self.arch.input_width();
        if query.len() != d0 {
            return Err(ModelError::QueryLength {
                expected: d0,
                found: query.len(),
            });
        }
        if query.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { layer: 0 });
        }
        let mut values = Vec::with_capacity(self.arch.total_nodes());
        values.extend_from_slice(query);
        let mut prev_start = 0;
        for l in 1..=self.arch.depth() {
            let layer = self.layer(l);
            let act = self.arch.activation(l);
            let start = values.len();
            let mut acc = vec![0.0f64; layer.outputs];
            // Row-outer loop keeps memory access sequential while still adding
            // parents into each node in ascending order.
            for i in 0..layer.inputs {
                let a = f64::from(values[prev_start + i]);
                let row = &layer.weights[i * layer.outputs..(i + 1) * layer.outputs];
                for (s, w) in acc.iter_mut().zip(row) {
                    *s += f64::from(*w) * a;
                }
            }
            if let Some(bias) = &layer.bias {
                for (s, b) in acc.iter_mut().zip(bias) {
                    *s += f64::from(*b);
                }
            }
            for s in acc {
                let v = act.apply(s) as f32;
                if !v.is_finite() {
                    return Err(ModelError::NonFinite { layer: l });
                }
                values.push(v);
            }
            prev_start = start;
        }
        Ok(Trace {
            values,
            offsets: self.arch.layer_offsets(),
        })
    }

    /// `out(eval_trace(model, query))`.
    pub fn predict(&self, query: &[f32]) -> Result<Vec<f32>, ModelError> {
        let trace = self.eval_trace(query)?;
        trace.output(&self.arch)
    }

    /// Local consistency check for one computed node given claimed parent
    /// activations.
    pub fn local_check(
        &self,
        layer: usize,
        node: usize,
        parents: &[f32],
        claimed: f32,
        tol: f64,
    ) -> Result<LocalCheck, ModelError> {
        let fan_in = self.fan_in(layer, node)?;
        if parents.len() != fan_in.weights.len() {
            return Err(ModelError::ShapeMismatch {
                layer: layer - 1,
                expected: fan_in.weights.len(),
                found: parents.len(),
            });
        }
        Ok(check_node(&fan_in, parents, claimed, self.arch.activation(layer), tol))
    }
}

/// Flat activation vector with per-layer offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    values: Vec<f32>,
    offsets: Vec<usize>,
}

impl Trace {
    pub fn new(values: Vec<f32>, offsets: Vec<usize>) -> Result<Self, ModelError> {
        if offsets.is_empty() || offsets[0] != 0 {
            return Err(ModelError::InvalidArchitecture("layer offsets must start at 0".into()));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) || *offsets.last().unwrap() >= values.len().max(1) {
            return Err(ModelError::InvalidArchitecture(
                "layer offsets must be strictly increasing and inside the trace".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFinite { layer: 0 });
        }
        Ok(Self { values, offsets })
    }

    /// Builds a trace shaped for `arch` from per-layer activation vectors.
    pub fn from_layers(arch: &Architecture, layers: &[Vec<f32>]) -> Result<Self, ModelError> {
        if layers.len() != arch.widths().len() {
            return Err(ModelError::InvalidArchitecture(format!(
                "{} layers for a depth-{} model",
                layers.len(),
                arch.depth()
            )));
        }
        let mut values = Vec::with_capacity(arch.total_nodes());
        for (l, vals) in layers.iter().enumerate() {
            if vals.len() != arch.width(l) {
                return Err(ModelError::ShapeMismatch {
                    layer: l,
                    expected: arch.width(l),
                    found: vals.len(),
                });
            }
            values.extend_from_slice(vals);
        }
        Self::new(values, arch.layer_offsets())
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn num_layers(&self) -> usize {
        self.offsets.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layer(&self, layer: usize) -> &[f32] {
        let start = self.offsets[layer];
        let end = self.offsets.get(layer + 1).copied().unwrap_or(self.values.len());
        &self.values[start..end]
    }

    pub fn layer_mut(&mut self, layer: usize) -> &mut [f32] {
        let start = self.offsets[layer];
        let end = self.offsets.get(layer + 1).copied().unwrap_or(self.values.len());
        &mut self.values[start..end]
    }

    pub fn is_shaped_for(&self, arch: &Architecture) -> bool {
        self.values.len() == arch.total_nodes() && self.offsets == arch.layer_offsets()
    }

    /// Last-layer activations passed through the output function.
    pub fn output(&self, arch: &Architecture) -> Result<Vec<f32>, ModelError> {
        if !self.is_shaped_for(arch) {
            return Err(ModelError::ShapeMismatch {
                layer: arch.depth(),
                expected: arch.total_nodes(),
                found: self.values.len(),
            });
        }
        Ok(output_from_last(arch.out_fn(), self.layer(arch.depth())))
    }
}

/// Applies `out_fn` to last-layer values with the same rounding as
/// [`Trace::output`].
pub fn output_from_last(out_fn: OutputFn, last: &[f32]) -> Vec<f32> {
    let wide: Vec<f64> = last.iter().map(|&v| f64::from(v)).collect();
    out_fn.apply(&wide).into_iter().map(|v| v as f32).collect()
}
