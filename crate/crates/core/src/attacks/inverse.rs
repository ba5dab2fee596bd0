//! Inverse-transform forgery: solve each layer backwards from the output.
//!
//! With the row-vector convention `z = a W + b`, the previous activation is
//! recovered as `a = (z - b) W^+`. The forged trace stores each solved `a`
//! as is. ReLU is not invertible; negative pre-activations are lost and
//! `max(0, .)` stands in for the inverse when solving the layer below.

use serde::{Deserialize, Serialize};

use super::linalg::{pinv_normal, pinv_svd, Matrix};
use super::{AttackError, AttackResult};
use crate::model::{Activation, Model, OutputFn, Trace};

/// Probabilities and sigmoid outputs are clamped into `[c, 1 - c]` before
/// taking logarithms.
pub const SIGMOID_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum InverseMethod {
    /// `(W^T W)^{-1} W^T` on the well-posed side; fails on singular Gram matrices.
    Pinv,
    /// `V S^+ U^T` from a Jacobi SVD.
    Svd,
    /// `(W^T W + ridge I)^{-1} W^T`.
    Regularized,
}

impl InverseMethod {
    pub const ALL: [InverseMethod; 3] = [InverseMethod::Pinv, InverseMethod::Svd, InverseMethod::Regularized];

    pub fn name(self) -> &'static str {
        match self {
            InverseMethod::Pinv => "pinv",
            InverseMethod::Svd => "svd",
            InverseMethod::Regularized => "regularized",
        }
    }
}

fn invert_activation(act: Activation, a: f64) -> f64 {
    match act {
        Activation::Relu => a.max(0.0),
        Activation::Sigmoid => {
            let p = a.clamp(SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP);
            (p / (1.0 - p)).ln()
        }
        Activation::Identity => a,
    }
}

fn invert_out_fn(f: OutputFn, y: &[f32]) -> Vec<f64> {
    match f {
        OutputFn::Identity => y.iter().map(|&v| f64::from(v)).collect(),
        OutputFn::Softmax => y.iter().map(|&p| f64::from(p).clamp(SIGMOID_CLAMP, 1.0).ln()).collect(),
    }
}

/// Pseudo-inverses of every weight matrix, indexed by layer (entry 0 unused).
pub fn layer_inverses(model: &Model, method: InverseMethod, ridge: f64) -> Result<Vec<Matrix>, AttackError> {
    let mut out = vec![Matrix::zeros(0, 0)];
    for (i, l) in model.layers().iter().enumerate() {
        let w = Matrix::from_f32(l.inputs, l.outputs, &l.weights);
        let inv = match method {
            InverseMethod::Pinv => pinv_normal(&w, 0.0),
            InverseMethod::Svd => pinv_svd(&w),
            InverseMethod::Regularized => pinv_normal(&w, ridge),
        }
        .map_err(|source| AttackError::Linalg { layer: i + 1, source })?;
        out.push(inv);
    }
    Ok(out)
}

/// Forges a full trace whose output function reproduces `desired`.
pub fn invert_output(model: &Model, desired: &[f32], method: InverseMethod, ridge: f64) -> Result<Trace, AttackError> {
    let inverses = layer_inverses(model, method, ridge)?;
    invert_with(model, &inverses, desired)
}

fn invert_with(model: &Model, inverses: &[Matrix], desired: &[f32]) -> Result<Trace, AttackError> {
    let arch = model.architecture();
    let depth = arch.depth();
    if desired.len() != arch.output_width() {
        return Err(crate::model::ModelError::ShapeMismatch {
            layer: depth,
            expected: arch.output_width(),
            found: desired.len(),
        }
        .into());
    }
    let mut layers: Vec<Vec<f32>> = vec![Vec::new(); depth + 1];
    let top = invert_out_fn(arch.out_fn(), desired);
    let act = arch.activation(depth);
    layers[depth] = top.iter().map(|&v| v as f32).collect();
    let mut pre: Vec<f64> = top.iter().map(|&v| invert_activation(act, v)).collect();
    for l in (1..=depth).rev() {
        let layer = model.layer(l);
        if let Some(b) = &layer.bias {
            for (z, &bj) in pre.iter_mut().zip(b) {
                *z -= f64::from(bj);
            }
        }
        let a = inverses[l].vec_mul(&pre);
        if l == 1 {
            layers[0] = a.iter().map(|&v| v as f32).collect();
        } else {
            let act = arch.activation(l - 1);
            layers[l - 1] = a.iter().map(|&v| v as f32).collect();
            pre = a.iter().map(|&v| invert_activation(act, v)).collect();
        }
    }
    Ok(Trace::from_layers(arch, &layers)?)
}

/// Forges a trace for the honest output and reports `|forged - honest|` per
/// computed layer, comparing the last layer after the output function.
pub fn inverse_transform_attack(model: &Model, honest: &Trace, method: InverseMethod, ridge: f64) -> Result<AttackResult, AttackError> {
    let arch = model.architecture();
    let desired = honest.output(arch)?;
    let forged = invert_output(model, &desired, method, ridge)?;
    let depth = arch.depth();
    let mut seps = Vec::with_capacity(depth);
    for l in 1..=depth {
        let (a, b): (Vec<f64>, Vec<f64>) = if l == depth {
            let f = |t: &Trace| arch.out_fn().apply(&t.layer(l).iter().map(|&v| f64::from(v)).collect::<Vec<_>>());
            (f(honest), f(&forged))
        } else {
            let f = |t: &Trace| t.layer(l).iter().map(|&v| f64::from(v)).collect();
            (f(honest), f(&forged))
        };
        seps.push(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect::<Vec<f64>>());
    }
    let loss = seps[depth - 1].iter().map(|d| d * d).sum::<f64>() / seps[depth - 1].len() as f64;
    let diverged = !loss.is_finite() || forged.values().iter().any(|v| !v.is_finite());
    Ok(AttackResult::from_separations(forged, &seps, 1, loss, !diverged, diverged))
}
