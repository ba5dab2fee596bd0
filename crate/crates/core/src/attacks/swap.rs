//! Logit-swap forgery in activation space.
//!
//! The target output exchanges the largest and smallest logits. An activation
//! tensor is injected after the input layer and optimised so the rest of the
//! network maps it onto that target, while the input layer stays honest.

use rand::Rng;

use super::gradient::{descend, LossGraph, DEFAULT_CONVERGENCE};
use super::{AttackConfig, AttackError, AttackResult};
use crate::model::{Model, Trace};
use crate::path_test::{derive_paths, Challenge};
use crate::separation::{recompute_layer, separation_profile};

/// Copy of `v` with its argmax and argmin entries exchanged (first
/// occurrence of each).
pub fn swap_extremes(v: &[f32]) -> Vec<f32> {
    let mut out = v.to_vec();
    if v.is_empty() {
        return out;
    }
    let (mut hi, mut lo) = (0, 0);
    for (i, &x) in v.iter().enumerate() {
        if x > v[hi] {
            hi = i;
        }
        if x < v[lo] {
            lo = i;
        }
    }
    out.swap(hi, lo);
    out
}

/// Runs the model from a post-activation vector at `layer` to the output,
/// with the same arithmetic as [`Model::eval_trace`].
pub fn trace_from_layer(model: &Model, qry: &[f32], layer: usize, activation: &[f32]) -> Result<Trace, AttackError> {
    let arch = model.architecture();
    let honest = model.eval_trace(qry)?;
    let mut layers: Vec<Vec<f32>> = (0..layer).map(|l| honest.layer(l).to_vec()).collect();
    layers.push(activation.to_vec());
    for l in layer + 1..=arch.depth() {
        let next = recompute_layer(model, &layers[l - 1], l).into_iter().map(|v| v as f32).collect();
        layers.push(next);
    }
    Ok(Trace::from_layers(arch, &layers)?)
}

/// One swap-attack round. The injected tensor starts at the honest first
/// hidden layer plus uniform noise of half-width `cfg.init_noise`; a path is
/// drawn from `rng` to report the path separation.
pub fn swap_attack<R: Rng>(model: &Model, qry: &[f32], cfg: &AttackConfig, rng: &mut R) -> Result<AttackResult, AttackError> {
    swap_attack_masked(model, qry, cfg, None, rng)
}

/// As [`swap_attack`], updating only the coordinates where `mask` is true.
pub fn swap_attack_masked<R: Rng>(
    model: &Model,
    qry: &[f32],
    cfg: &AttackConfig,
    mask: Option<&[bool]>,
    rng: &mut R,
) -> Result<AttackResult, AttackError> {
    cfg.validate()?;
    let arch = model.architecture();
    if arch.depth() < 2 {
        return Err(AttackError::Config("swap attack needs a hidden layer".into()));
    }
    if let Some(m) = mask {
        if m.len() != arch.width(1) {
            return Err(AttackError::Config(format!("mask has {} entries, layer 1 has {}", m.len(), arch.width(1))));
        }
    }
    let honest = model.eval_trace(qry)?;
    let depth = arch.depth();
    let target: Vec<f64> = swap_extremes(honest.layer(depth)).iter().map(|&v| f64::from(v)).collect();
    let mut graph = LossGraph::new(model, 1, &target, false, cfg.l2_lambda);
    let x0: Vec<f64> = honest
        .layer(1)
        .iter()
        .map(|&a| {
            let noise = if cfg.init_noise > 0.0 {
                rng.random_range(-cfg.init_noise..cfg.init_noise)
            } else {
                0.0
            };
            f64::from(a) + noise
        })
        .collect();
    let rho = Challenge::random(rng);
    let d = descend(&mut graph, x0, cfg, mask);
    let converged = !d.diverged && d.final_loss <= cfg.convergence_loss.max(DEFAULT_CONVERGENCE);
    if d.diverged {
        let forged = Trace::from_layers(arch, &arch.widths().iter().map(|&w| vec![0.0; w]).collect::<Vec<_>>())?;
        return Ok(AttackResult::from_separations(forged, &vec![Vec::new(); depth], d.iterations, d.final_loss, false, true));
    }
    let a1: Vec<f32> = d.x.iter().map(|&v| v as f32).collect();
    let forged = trace_from_layer(model, qry, 1, &a1)?;
    let seps = separation_profile(model, &honest, &forged, false).expect("traces shaped for the model");
    let path = &derive_paths(arch, &rho.rho, 1)[0];
    let path_sep = (1..=depth).map(|l| seps[l - 1][path.nodes[l]]).sum::<f64>() / depth as f64;
    let mut res = AttackResult::from_separations(forged, &seps, d.iterations, d.final_loss, converged, false);
    res.path_separation = Some(path_sep);
    Ok(res)
}
