//! A small reverse-mode gradient engine over vector operations.
//!
//! The tape is built once and re-evaluated in place, so an optimisation loop
//! does not allocate. Only the operations the attacks need are provided.

use std::sync::Arc;

use crate::model::{Activation, DenseLayer, OutputFn};

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Dense layer parameters widened to `f64` (row-vector convention).
#[derive(Debug, Clone)]
pub struct Affine {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Arc<[f64]>,
    pub bias: Option<Arc<[f64]>>,
}

impl From<&DenseLayer> for Affine {
    fn from(l: &DenseLayer) -> Self {
        Self {
            inputs: l.inputs,
            outputs: l.outputs,
            weights: l.weights.iter().map(|&w| f64::from(w)).collect(),
            bias: l.bias.as_ref().map(|b| b.iter().map(|&v| f64::from(v)).collect()),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Affine { x: Var, params: Affine },
    Act { x: Var, act: Activation },
    Softmax { x: Var },
    /// Mean squared difference to a fixed target.
    Mse { x: Var, target: Vec<f64> },
    SqNorm { x: Var },
    Add { a: Var, b: Var },
    Scale { x: Var, c: f64 },
}

#[derive(Debug, Clone, Default)]
pub struct Tape {
    ops: Vec<Op>,
    vals: Vec<Vec<f64>>,
    grads: Vec<Vec<f64>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, op: Op, len: usize) -> Var {
        self.ops.push(op);
        self.vals.push(vec![0.0; len]);
        self.grads.push(vec![0.0; len]);
        Var(self.ops.len() - 1)
    }

    fn len_of(&self, v: Var) -> usize {
        self.vals[v.0].len()
    }

    pub fn leaf(&mut self, value: &[f64]) -> Var {
        let v = self.push(Op::Leaf, value.len());
        self.vals[v.0].copy_from_slice(value);
        v
    }

    pub fn affine(&mut self, x: Var, params: Affine) -> Var {
        assert_eq!(self.len_of(x), params.inputs, "affine input width");
        let n = params.outputs;
        self.push(Op::Affine { x, params }, n)
    }

    pub fn act(&mut self, x: Var, act: Activation) -> Var {
        let n = self.len_of(x);
        self.push(Op::Act { x, act }, n)
    }

    pub fn out_fn(&mut self, x: Var, f: OutputFn) -> Var {
        match f {
            OutputFn::Identity => x,
            OutputFn::Softmax => {
                let n = self.len_of(x);
                self.push(Op::Softmax { x }, n)
            }
        }
    }

    pub fn mse(&mut self, x: Var, target: &[f64]) -> Var {
        assert_eq!(self.len_of(x), target.len(), "mse target width");
        self.push(
            Op::Mse {
                x,
                target: target.to_vec(),
            },
            1,
        )
    }

    pub fn sq_norm(&mut self, x: Var) -> Var {
        self.push(Op::SqNorm { x }, 1)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.len_of(a), self.len_of(b), "add widths");
        let n = self.len_of(a);
        self.push(Op::Add { a, b }, n)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let n = self.len_of(x);
        self.push(Op::Scale { x, c }, n)
    }

    /// Overwrites a leaf value; call [`Tape::forward`] afterwards.
    pub fn set(&mut self, leaf: Var, value: &[f64]) {
        debug_assert!(matches!(self.ops[leaf.0], Op::Leaf));
        self.vals[leaf.0].copy_from_slice(value);
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.vals[v.0]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.vals[v.0][0]
    }

    pub fn grad(&self, v: Var) -> &[f64] {
        &self.grads[v.0]
    }

    /// Recomputes every non-leaf value in tape order.
    pub fn forward(&mut self) {
        for i in 0..self.ops.len() {
            let (before, rest) = self.vals.split_at_mut(i);
            let out = &mut rest[0];
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Affine { x, params } => {
                    let xv = &before[x.0];
                    match &params.bias {
                        Some(b) => out.copy_from_slice(b),
                        None => out.fill(0.0),
                    }
                    for (k, &a) in xv.iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        let row = &params.weights[k * params.outputs..(k + 1) * params.outputs];
                        for (o, &w) in out.iter_mut().zip(row) {
                            *o += a * w;
                        }
                    }
                }
                Op::Act { x, act } => {
                    for (o, &z) in out.iter_mut().zip(&before[x.0]) {
                        *o = act.apply(z);
                    }
                }
                Op::Softmax { x } => {
                    let z = &before[x.0];
                    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let mut s = 0.0;
                    for (o, &v) in out.iter_mut().zip(z) {
                        *o = (v - m).exp();
                        s += *o;
                    }
                    out.iter_mut().for_each(|o| *o /= s);
                }
                Op::Mse { x, target } => {
                    let xv = &before[x.0];
                    let s: f64 = xv.iter().zip(target).map(|(a, t)| (a - t) * (a - t)).sum();
                    out[0] = s / xv.len() as f64;
                }
                Op::SqNorm { x } => out[0] = before[x.0].iter().map(|v| v * v).sum(),
                Op::Add { a, b } => {
                    for ((o, &p), &q) in out.iter_mut().zip(&before[a.0]).zip(&before[b.0]) {
                        *o = p + q;
                    }
                }
                Op::Scale { x, c } => {
                    for (o, &v) in out.iter_mut().zip(&before[x.0]) {
                        *o = c * v;
                    }
                }
            }
        }
    }

    /// Back-propagates from the scalar `root`; afterwards [`Tape::grad`]
    /// returns d root / d v for every `v` recorded before `root`.
    pub fn backward(&mut self, root: Var) {
        assert_eq!(self.len_of(root), 1, "backward needs a scalar root");
        for g in &mut self.grads[..=root.0] {
            g.fill(0.0);
        }
        self.grads[root.0][0] = 1.0;
        for i in (0..=root.0).rev() {
            let (gb, grest) = self.grads.split_at_mut(i);
            let gout = &grest[0];
            let y = &self.vals[i];
            match &self.ops[i] {
                Op::Leaf => {}
                Op::Affine { x, params } => {
                    let gx = &mut gb[x.0];
                    for (k, g) in gx.iter_mut().enumerate() {
                        let row = &params.weights[k * params.outputs..(k + 1) * params.outputs];
                        *g += row.iter().zip(gout).map(|(w, d)| w * d).sum::<f64>();
                    }
                }
                Op::Act { x, act } => {
                    let z = &self.vals[x.0];
                    for (((g, &d), &zi), &yi) in gb[x.0].iter_mut().zip(gout).zip(z).zip(y) {
                        *g += d * act.derivative(zi, yi);
                    }
                }
                Op::Softmax { x } => {
                    let dot: f64 = gout.iter().zip(y).map(|(d, p)| d * p).sum();
                    for ((g, &d), &p) in gb[x.0].iter_mut().zip(gout).zip(y) {
                        *g += p * (d - dot);
                    }
                }
                Op::Mse { x, target } => {
                    let xv = &self.vals[x.0];
                    let c = 2.0 * gout[0] / xv.len() as f64;
                    for ((g, &a), &t) in gb[x.0].iter_mut().zip(xv).zip(target) {
                        *g += c * (a - t);
                    }
                }
                Op::SqNorm { x } => {
                    let c = 2.0 * gout[0];
                    for (g, &a) in gb[x.0].iter_mut().zip(&self.vals[x.0]) {
                        *g += c * a;
                    }
                }
                Op::Add { a, b } => {
                    for (g, &d) in gb[a.0].iter_mut().zip(gout) {
                        *g += d;
                    }
                    for (g, &d) in gb[b.0].iter_mut().zip(gout) {
                        *g += d;
                    }
                }
                Op::Scale { x, c } => {
                    for (g, &d) in gb[x.0].iter_mut().zip(gout) {
                        *g += c * d;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_one_one_matches_closed_form() {
        let (w, x, t) = (1.5, 0.7, 2.0);
        let mut tape = Tape::new();
        let xv = tape.leaf(&[x]);
        let y = tape.affine(
            xv,
            Affine {
                inputs: 1,
                outputs: 1,
                weights: vec![w].into(),
                bias: None,
            },
        );
        let l = tape.mse(y, &[t]);
        tape.forward();
        tape.backward(l);
        assert!((tape.grad(xv)[0] - 2.0 * w * (w * x - t)).abs() < 1e-12);
    }

    #[test]
    fn softmax_and_norm_match_finite_differences() {
        let x0 = [0.3, -0.2, 0.9];
        let build = |tape: &mut Tape| {
            let x = tape.leaf(&x0);
            let s = tape.out_fn(x, OutputFn::Softmax);
            let m = tape.mse(s, &[0.0, 1.0, 0.0]);
            let n = tape.sq_norm(x);
            let n = tape.scale(n, 0.1);
            let l = tape.add(m, n);
            (x, l)
        };
        let mut tape = Tape::new();
        let (x, l) = build(&mut tape);
        tape.forward();
        tape.backward(l);
        let g = tape.grad(x).to_vec();
        let h = 1e-5;
        for i in 0..3 {
            let mut f = |d: f64| {
                let mut v = x0;
                v[i] += d;
                tape.set(x, &v);
                tape.forward();
                tape.scalar(l)
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8, "{fd} vs {}", g[i]);
        }
    }
}
