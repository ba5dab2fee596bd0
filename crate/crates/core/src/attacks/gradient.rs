//! Input-space reconstruction by gradient descent on
//! `L = mean((out(M(q')) - out)^2) + lambda * ||q'||^2`.

use rand::Rng;

use super::autodiff::{Affine, Tape, Var};
use super::optim::Optimizer;
use super::{AttackConfig, AttackError, AttackResult};
use crate::model::{Model, Trace};
use crate::separation::separation_profile;

/// Loss `mean((f(a) - target)^2) + lambda * ||a||^2`, where `f` runs the
/// model from the post-activation of `start_layer` to the output.
pub struct LossGraph {
    tape: Tape,
    x: Var,
    output: Var,
    loss: Var,
}

impl LossGraph {
    pub fn new(model: &Model, start_layer: usize, target: &[f64], apply_out_fn: bool, l2_lambda: f64) -> Self {
        let arch = model.architecture();
        let mut tape = Tape::new();
        let x = tape.leaf(&vec![0.0; arch.width(start_layer)]);
        let mut h = x;
        for l in start_layer + 1..=arch.depth() {
            let z = tape.affine(h, Affine::from(model.layer(l)));
            h = tape.act(z, arch.activation(l));
        }
        let output = if apply_out_fn { tape.out_fn(h, arch.out_fn()) } else { h };
        let mut loss = tape.mse(output, target);
        if l2_lambda > 0.0 {
            let n = tape.sq_norm(x);
            let n = tape.scale(n, l2_lambda);
            loss = tape.add(loss, n);
        }
        Self { tape, x, output, loss }
    }

    /// Loss at `x`; the gradient is then available from [`LossGraph::grad`].
    pub fn eval(&mut self, x: &[f64]) -> f64 {
        self.tape.set(self.x, x);
        self.tape.forward();
        self.tape.backward(self.loss);
        self.tape.scalar(self.loss)
    }

    /// Loss at `x` without the backward pass.
    pub fn loss(&mut self, x: &[f64]) -> f64 {
        self.tape.set(self.x, x);
        self.tape.forward();
        self.tape.scalar(self.loss)
    }

    pub fn grad(&self) -> &[f64] {
        self.tape.grad(self.x)
    }

    pub fn output(&self) -> &[f64] {
        self.tape.value(self.output)
    }
}

/// Loss and gradient with respect to the model input; `target` is compared
/// after the output function.
pub fn backprop_input_grad(model: &Model, x: &[f64], target: &[f64], l2_lambda: f64) -> (f64, Vec<f64>) {
    let mut g = LossGraph::new(model, 0, target, true, l2_lambda);
    let loss = g.eval(x);
    (loss, g.grad().to_vec())
}

/// Loss and gradient with respect to an activation injected at `layer`.
pub fn backprop_activation_grad(
    model: &Model,
    layer: usize,
    a: &[f64],
    target: &[f64],
    apply_out_fn: bool,
    l2_lambda: f64,
) -> (f64, Vec<f64>) {
    let mut g = LossGraph::new(model, layer, target, apply_out_fn, l2_lambda);
    let loss = g.eval(a);
    (loss, g.grad().to_vec())
}

/// Threshold used for the `converged` flag when early stopping is disabled.
pub const DEFAULT_CONVERGENCE: f64 = 1e-4;

pub(crate) fn uniform_init<R: Rng>(n: usize, rng: &mut R) -> Vec<f32> {
    (0..n).map(|_| rng.random::<f32>()).collect()
}

pub(crate) struct Descent {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub final_loss: f64,
    pub diverged: bool,
}

/// Runs the configured optimiser on `graph` from `x`.
pub(crate) fn descend(graph: &mut LossGraph, mut x: Vec<f64>, cfg: &AttackConfig, mask: Option<&[bool]>) -> Descent {
    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, x.len());
    let mut iterations = 0;
    let mut loss = f64::NAN;
    while iterations < cfg.max_iters {
        loss = graph.eval(&x);
        if !loss.is_finite() {
            return Descent {
                x,
                iterations,
                final_loss: loss,
                diverged: true,
            };
        }
        if cfg.convergence_loss > 0.0 && loss <= cfg.convergence_loss {
            break;
        }
        opt.step(&mut x, graph.grad(), mask);
        iterations += 1;
    }
    if iterations == cfg.max_iters {
        loss = graph.loss(&x);
    }
    let diverged = !loss.is_finite() || x.iter().any(|v| !v.is_finite());
    Descent {
        x,
        iterations,
        final_loss: loss,
        diverged,
    }
}

/// Searches for `q'` with `out(M(q')) = out(honest)` starting from `init`;
/// the forged trace is `M`'s genuine trace on `q'`. Separations use the
/// output function at the last layer.
pub fn grad_reconstruct(model: &Model, honest: &Trace, init: &[f32], cfg: &AttackConfig) -> Result<AttackResult, AttackError> {
    cfg.validate()?;
    let arch = model.architecture();
    let target: Vec<f64> = honest.output(arch)?.iter().map(|&v| f64::from(v)).collect();
    let mut graph = LossGraph::new(model, 0, &target, true, cfg.l2_lambda);
    let x0 = init.iter().map(|&v| f64::from(v)).collect();
    let d = descend(&mut graph, x0, cfg, None);
    let converged = d.final_loss <= cfg.convergence_loss.max(DEFAULT_CONVERGENCE);
    if d.diverged {
        let forged = Trace::from_layers(arch, &arch.widths().iter().map(|&w| vec![0.0; w]).collect::<Vec<_>>())?;
        let seps = vec![Vec::new(); arch.depth()];
        return Ok(AttackResult::from_separations(forged, &seps, d.iterations, d.final_loss, false, true));
    }
    let q: Vec<f32> = d.x.iter().map(|&v| v as f32).collect();
    let forged = model.eval_trace(&q)?;
    let seps = separation_profile(model, honest, &forged, true).expect("traces shaped for the model");
    Ok(AttackResult::from_separations(forged, &seps, d.iterations, d.final_loss, converged, false))
}
