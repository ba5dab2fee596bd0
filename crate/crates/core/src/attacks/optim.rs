//! First-order optimisers.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    PlainGd,
    Adam,
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum Optimizer {
    PlainGd { lr: f64 },
    Adam { lr: f64, m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, dim: usize) -> Self {
        match kind {
            OptimizerKind::PlainGd => Optimizer::PlainGd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                m: vec![0.0; dim],
                v: vec![0.0; dim],
                t: 0,
            },
        }
    }

    /// Applies one update. Coordinates with `mask[i] == false` stay put.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], mask: Option<&[bool]>) {
        let on = |i: usize| mask.is_none_or(|m| m[i]);
        match self {
            Optimizer::PlainGd { lr } => {
                for (i, (p, g)) in params.iter_mut().zip(grad).enumerate() {
                    if on(i) {
                        *p -= *lr * g;
                    }
                }
            }
            Optimizer::Adam { lr, m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                for (i, (p, &g)) in params.iter_mut().zip(grad).enumerate() {
                    if !on(i) {
                        continue;
                    }
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let mh = m[i] / c1;
                    let vh = v[i] / c2;
                    *p -= *lr * mh / (vh.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}
