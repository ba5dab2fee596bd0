//! Trace separation metrics and threshold estimation.
//!
//! The separation value of layer `i` measures how far a substituted trace
//! lands from the honest one when pushed through the honest weights:
//! `|phi(a_M^{i-1} W_M^i + b) - phi(a_~^{i-1} W_M^i + b)|`, elementwise.

pub mod estimate;
pub mod report;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Model, Trace};

pub use estimate::{
    estimate_eps_tst, gen_candidates, run_family, select_params, Dataset, DatasetBuilder, EpsTstEstimate,
    FamilyResult, Selection, SeparationRecord, SelectedParams, TestConfig, ThresholdCandidate, TraceSample, MIN_SUPPORT,
};

pub const JS_THRESHOLD: f64 = 0.05;
pub const DEFAULT_BINS: usize = 50;
pub const JS_SMOOTHING: f64 = 1e-12;
pub const DELTA_NOISE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeparationError {
    #[error("layer {layer}: shapes differ ({left} vs {right})")]
    Shape { layer: usize, left: usize, right: usize },
    #[error("layer {0} has no incoming weights")]
    InputLayer(usize),
    #[error("no layer passes the divergence filter")]
    EmptyFilter,
    #[error("need at least 2 samples per side, got {0}")]
    TooFewSamples(usize),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no record has trace difference >= {delta} (CountValid = 0)")]
    NoQualifying { delta: f64 },
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// min / mean / max of a set of separation values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                min: 0.0,
                mean: 0.0,
                max: 0.0,
            };
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self { min, mean, max }
    }
}

/// Recomputes layer `layer` from `prev` with the model's weights, in `f64`.
pub fn recompute_layer(model: &Model, prev: &[f32], layer: usize) -> Vec<f64> {
    let l = model.layer(layer);
    let act = model.architecture().activation(layer);
    let mut acc = vec![0.0f64; l.outputs];
    for (i, &a) in prev.iter().enumerate() {
        let row = &l.weights[i * l.outputs..(i + 1) * l.outputs];
        for (s, &w) in acc.iter_mut().zip(row) {
            *s += f64::from(w) * f64::from(a);
        }
    }
    if let Some(b) = &l.bias {
        for (s, &bj) in acc.iter_mut().zip(b) {
            *s += f64::from(bj);
        }
    }
    acc.into_iter().map(|s| act.apply(s)).collect()
}

/// Elementwise separation values at computed layer `layer`.
pub fn separation_value(model: &Model, honest: &Trace, other: &Trace, layer: usize) -> Result<Vec<f64>, SeparationError> {
    separation_value_with(model, honest, other, layer, false)
}

/// As [`separation_value`]; with `apply_out_fn` the last layer is compared
/// after the model's output function.
pub fn separation_value_with(
    model: &Model,
    honest: &Trace,
    other: &Trace,
    layer: usize,
    apply_out_fn: bool,
) -> Result<Vec<f64>, SeparationError> {
    let arch = model.architecture();
    if layer == 0 || layer > arch.depth() {
        return Err(SeparationError::InputLayer(layer));
    }
    for t in [honest, other] {
        if !t.is_shaped_for(arch) {
            return Err(SeparationError::Shape {
                layer,
                left: arch.total_nodes(),
                right: t.len(),
            });
        }
    }
    let mut a = recompute_layer(model, honest.layer(layer - 1), layer);
    let mut b = recompute_layer(model, other.layer(layer - 1), layer);
    if apply_out_fn && layer == arch.depth() {
        a = arch.out_fn().apply(&a);
        b = arch.out_fn().apply(&b);
    }
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect())
}

/// Separation values for every computed layer `1..=L`.
pub fn separation_profile(model: &Model, honest: &Trace, other: &Trace, apply_out_fn: bool) -> Result<Vec<Vec<f64>>, SeparationError> {
    (1..=model.architecture().depth())
        .map(|l| separation_value_with(model, honest, other, l, apply_out_fn))
        .collect()
}

/// Euclidean distance between two output vectors.
pub fn d_out(y1: &[f32], y2: &[f32]) -> f64 {
    y1.iter()
        .zip(y2)
        .map(|(a, b)| {
            let d = f64::from(*a) - f64::from(*b);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Mean over `layers` of the per-layer mean absolute difference.
pub fn d_trc(t1: &Trace, t2: &Trace, layers: &[usize]) -> Result<f64, SeparationError> {
    if layers.is_empty() {
        return Err(SeparationError::EmptyFilter);
    }
    let mut total = 0.0;
    for &l in layers {
        total += layer_mad(t1.layer(l), t2.layer(l)).map_err(|(a, b)| SeparationError::Shape { layer: l, left: a, right: b })?;
    }
    Ok(total / layers.len() as f64)
}

/// `(1 / D) * ||a - b||_1`.
pub fn layer_mad(a: &[f32], b: &[f32]) -> Result<f64, (usize, usize)> {
    if a.len() != b.len() || a.is_empty() {
        return Err((a.len(), b.len()));
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (f64::from(*x) - f64::from(*y)).abs()).sum();
    Ok(s / a.len() as f64)
}

/// Jensen-Shannon divergence (base 2) between two samples, histogrammed on
/// their joint range with `bins` equal-width bins and additive smoothing.
pub fn js_divergence(p: &[f64], q: &[f64], bins: usize) -> f64 {
    let lo = p.iter().chain(q).copied().fold(f64::INFINITY, f64::min);
    let hi = p.iter().chain(q).copied().fold(f64::NEG_INFINITY, f64::max);
    let hist = |xs: &[f64]| {
        let mut h = vec![0.0f64; bins];
        for &x in xs {
            let b = if hi > lo {
                (((x - lo) / (hi - lo)) * bins as f64).floor() as usize
            } else {
                0
            };
            h[b.min(bins - 1)] += 1.0;
        }
        let n = xs.len() as f64;
        let mut probs: Vec<f64> = h.into_iter().map(|c| c / n + JS_SMOOTHING).collect();
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|v| *v /= z);
        probs
    };
    let (hp, hq) = (hist(p), hist(q));
    let kl = |a: &[f64], m: &[f64]| a.iter().zip(m).map(|(x, y)| x * (x / y).log2()).sum::<f64>();
    let m: Vec<f64> = hp.iter().zip(&hq).map(|(a, b)| 0.5 * (a + b)).collect();
    (0.5 * kl(&hp, &m) + 0.5 * kl(&hq, &m)).clamp(0.0, 1.0)
}

/// Per-layer divergences and the layers that pass the filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFilter {
    pub js: Vec<f64>,
    pub valid: Vec<usize>,
}

/// Pools every activation of each layer across samples and compares the two
/// sides layer by layer.
pub fn js_per_layer(honest: &[Trace], other: &[Trace], bins: usize) -> Result<LayerFilter, SeparationError> {
    let n = honest.len().min(other.len());
    if n < 2 {
        return Err(SeparationError::TooFewSamples(n));
    }
    let layers = honest[0].num_layers();
    let pool = |ts: &[Trace], l: usize| -> Vec<f64> { ts.iter().flat_map(|t| t.layer(l).iter().map(|&v| f64::from(v))).collect() };
    let js: Vec<f64> = (0..layers).map(|l| js_divergence(&pool(honest, l), &pool(other, l), bins)).collect();
    let valid = js
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > JS_THRESHOLD)
        .map(|(l, _)| l)
        .collect();
    Ok(LayerFilter { js, valid })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Activation, Architecture, OutputFn};

    #[test]
    fn same_model_has_zero_separation() {
        let arch = Architecture::dense(&[3, 4, 2], Activation::Relu, OutputFn::Softmax).unwrap();
        let m = Model::random(&arch, 2);
        let t = m.eval_trace(&[0.1, 0.5, -0.3]).unwrap();
        for row in separation_profile(&m, &t, &t, true).unwrap() {
            assert!(row.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn linear_unit_column_propagates_delta() {
        let arch = Architecture::new(vec![2, 1], vec![Activation::Identity], OutputFn::Identity, false).unwrap();
        let m = Model::new(
            arch.clone(),
            vec![crate::model::DenseLayer {
                inputs: 2,
                outputs: 1,
                weights: vec![1.0, 0.0],
                bias: None,
            }],
        )
        .unwrap();
        let t = m.eval_trace(&[0.5, 0.5]).unwrap();
        let mut other = t.clone();
        other.layer_mut(0)[0] += 0.25;
        assert_eq!(separation_value(&m, &t, &other, 1).unwrap(), vec![0.25]);
    }

    #[test]
    fn d_out_and_d_trc_basics() {
        assert!((d_out(&[1.0, 0.0], &[0.0, 1.0]) - 2f64.sqrt()).abs() < 1e-15);
        let arch = Architecture::dense(&[2, 2], Activation::Relu, OutputFn::Identity).unwrap();
        let t = Trace::from_layers(&arch, &[vec![0.0, 0.0], vec![1.0, 3.0]]).unwrap();
        let u = Trace::from_layers(&arch, &[vec![0.0, 0.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(d_trc(&t, &t, &[0, 1]).unwrap(), 0.0);
        assert_eq!(d_trc(&t, &u, &[1]).unwrap(), 1.5);
        assert_eq!(d_trc(&t, &u, &[0, 1]).unwrap(), 0.75);
        assert_eq!(d_trc(&t, &u, &[]).unwrap_err(), SeparationError::EmptyFilter);
    }

    #[test]
    fn js_identical_and_disjoint() {
        let p: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        assert!(js_divergence(&p, &p, 50) < 1e-12);
        let q: Vec<f64> = p.iter().map(|v| v + 10.0).collect();
        assert!((js_divergence(&p, &q, 50) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn js_filter_rejects_tiny_samples() {
        let arch = Architecture::dense(&[1, 1], Activation::Relu, OutputFn::Identity).unwrap();
        let t = Model::random(&arch, 0).eval_trace(&[1.0]).unwrap();
        assert_eq!(
            js_per_layer(&[t.clone()], &[t], 50).unwrap_err(),
            SeparationError::TooFewSamples(1)
        );
    }
}
