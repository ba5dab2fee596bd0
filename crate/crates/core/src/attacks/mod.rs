//! Trace-forgery attacks against the path test.
//!
//! Three families are provided:
//! * [`grad_reconstruct`] searches input space for a query whose output
//!   matches the honest one, then submits that query's genuine trace.
//! * [`inverse_transform_attack`] back-solves each layer from the output with
//!   a pseudo-inverse of the weight matrix.
//! * [`swap_attack`] injects an optimisable activation after the input layer
//!   and pushes the output toward a logit-swapped target.
//!
//! Each produces an [`AttackResult`] with per-layer separation summaries, and
//! [`pass_rate_table`] aggregates them into the usual threshold table.

pub mod autodiff;
pub mod gradient;
pub mod inverse;
pub mod linalg;
pub mod optim;
pub mod swap;

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Model, ModelError, Trace};
use crate::separation::Summary;

pub use gradient::{backprop_activation_grad, backprop_input_grad, grad_reconstruct, LossGraph};
pub use inverse::{invert_output, inverse_transform_attack, InverseMethod, SIGMOID_CLAMP};
pub use linalg::{pinv_normal, pinv_svd, svd_small, LinalgError, Matrix, Svd};
pub use optim::{Optimizer, OptimizerKind};
pub use swap::{swap_attack, swap_extremes};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("invalid attack config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("layer {layer}: {source}")]
    Linalg {
        layer: usize,
        #[source]
        source: LinalgError,
    },
    #[error("no attack results")]
    Empty,
    #[error("method {0:?} is not handled by this entry point")]
    Method(AttackMethod),
    #[error("config file {path}: {message}")]
    ConfigFile { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AttackMethod {
    #[default]
    GradDescent,
    InversePinv,
    InverseSvd,
    InverseRegularized,
    Swap,
}

impl AttackMethod {
    pub fn inverse(self) -> Option<InverseMethod> {
        match self {
            AttackMethod::InversePinv => Some(InverseMethod::Pinv),
            AttackMethod::InverseSvd => Some(InverseMethod::Svd),
            AttackMethod::InverseRegularized => Some(InverseMethod::Regularized),
            _ => None,
        }
    }
}

/// Attack hyper-parameters, loadable from JSON or `key = value` text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackConfig {
    pub method: AttackMethod,
    pub learning_rate: f64,
    pub max_iters: usize,
    /// Stop once the loss is at or below this value; `0` disables the check.
    pub convergence_loss: f64,
    /// Weight of the `||a||^2` penalty on the optimised tensor.
    pub l2_lambda: f64,
    pub rounds: usize,
    pub optimizer: OptimizerKind,
    /// Ridge term of the regularised inverse.
    pub ridge: f64,
    /// Half-width of the uniform noise added to the injected activation.
    pub init_noise: f64,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self::gradient_descent()
    }
}

impl AttackConfig {
    /// Plain gradient descent, lr 0.005, 10,000 epochs, 50 rounds per input.
    pub fn gradient_descent() -> Self {
        Self {
            method: AttackMethod::GradDescent,
            learning_rate: 0.005,
            max_iters: 10_000,
            convergence_loss: 0.0,
            l2_lambda: 0.0,
            rounds: 50,
            optimizer: OptimizerKind::PlainGd,
            ridge: 1e-4,
            init_noise: 0.0,
            seed: 0,
        }
    }

    pub fn inverse(method: InverseMethod) -> Self {
        Self {
            method: match method {
                InverseMethod::Pinv => AttackMethod::InversePinv,
                InverseMethod::Svd => AttackMethod::InverseSvd,
                InverseMethod::Regularized => AttackMethod::InverseRegularized,
            },
            rounds: 1,
            ..Self::gradient_descent()
        }
    }

    /// Adam lr 0.01, lambda 0.001, at most 5,000 iterations, stop at loss 1e-4.
    pub fn swap() -> Self {
        Self {
            method: AttackMethod::Swap,
            learning_rate: 0.01,
            max_iters: 5_000,
            convergence_loss: 1e-4,
            l2_lambda: 1e-3,
            rounds: 10,
            optimizer: OptimizerKind::Adam,
            ridge: 1e-4,
            init_noise: 0.01,
            seed: 0,
        }
    }

    pub fn preset(method: AttackMethod) -> Self {
        match method {
            AttackMethod::GradDescent => Self::gradient_descent(),
            AttackMethod::Swap => Self::swap(),
            m => Self::inverse(m.inverse().expect("inverse method")),
        }
    }

    pub fn validate(&self) -> Result<(), AttackError> {
        let bad = |m: &str| Err(AttackError::Config(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be > 0");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1");
        }
        if self.rounds == 0 {
            return bad("rounds must be >= 1");
        }
        if !(self.l2_lambda >= 0.0) || !(self.convergence_loss >= 0.0) || !(self.ridge >= 0.0) || !(self.init_noise >= 0.0) {
            return bad("l2_lambda, convergence_loss, ridge and init_noise must be >= 0");
        }
        Ok(())
    }

    /// Parses a JSON object or `key = value` lines (`#` starts a comment).
    /// Keys not given keep the preset of the chosen method.
    pub fn from_text(text: &str) -> Result<Self, String> {
        Self::from_text_or(text, AttackMethod::default())
    }

    /// As [`from_text`](Self::from_text), with `fallback` as the method when
    /// the text names none.
    pub fn from_text_or(text: &str, fallback: AttackMethod) -> Result<Self, String> {
        let trimmed = text.trim_start();
        let map: serde_json::Map<String, serde_json::Value> = if trimmed.starts_with('{') {
            serde_json::from_str(text).map_err(|e| e.to_string())?
        } else {
            let mut map = serde_json::Map::new();
            for (n, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", n + 1))?;
                let v = v.trim().trim_matches('"');
                let value = v
                    .parse::<f64>()
                    .ok()
                    .and_then(|f| {
                        if v.contains(['.', 'e', 'E']) {
                            serde_json::Number::from_f64(f).map(Into::into)
                        } else {
                            v.parse::<u64>().ok().map(Into::into)
                        }
                    })
                    .unwrap_or_else(|| serde_json::Value::String(v.to_string()));
                map.insert(k.trim().replace('-', "_"), value);
            }
            map
        };
        let method = match map.get("method") {
            Some(m) => serde_json::from_value(m.clone()).map_err(|e| format!("method: {e}"))?,
            None => fallback,
        };
        let base = Self::preset(method);
        let mut merged = match serde_json::to_value(base).map_err(|e| e.to_string())? {
            serde_json::Value::Object(o) => o,
            _ => unreachable!(),
        };
        for (k, v) in map {
            if !merged.contains_key(&k) {
                return Err(format!("unknown key `{k}`"));
            }
            merged.insert(k, v);
        }
        let cfg: Self = serde_json::from_value(serde_json::Value::Object(merged)).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self, AttackError> {
        Self::read_or(path, AttackMethod::default())
    }

    pub fn read_or(path: &Path, fallback: AttackMethod) -> Result<Self, AttackError> {
        let err = |message: String| AttackError::ConfigFile {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        Self::from_text_or(&text, fallback).map_err(err)
    }

    /// Deterministic RNG for one (input, round) pair.
    pub fn round_rng(&self, input_id: usize, round: usize) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream((input_id as u64) << 32 | round as u64);
        rng
    }
}

/// Outcome of one attack round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackResult {
    pub input_id: usize,
    pub round: usize,
    /// Separation summary for computed layers `1..=L`.
    pub layers: Vec<Summary>,
    /// All zeros when the attack diverged.
    #[serde(skip)]
    pub forged: Trace,
    pub converged: bool,
    pub diverged: bool,
    pub iterations: usize,
    pub final_loss: f64,
    /// Mean separation over the non-input nodes of a sampled path, when the
    /// attack samples one.
    pub path_separation: Option<f64>,
}

impl AttackResult {
    pub(crate) fn from_separations(
        forged: Trace,
        separations: &[Vec<f64>],
        iterations: usize,
        final_loss: f64,
        converged: bool,
        diverged: bool,
    ) -> Self {
        let layers = if diverged {
            let inf = f64::INFINITY;
            vec![Summary { min: inf, mean: inf, max: inf }; separations.len()]
        } else {
            separations.iter().map(|s| Summary::of(s)).collect()
        };
        Self {
            input_id: 0,
            round: 0,
            layers,
            forged,
            converged: converged && !diverged,
            diverged,
            iterations,
            final_loss,
            path_separation: None,
        }
    }
}

/// Runs `cfg.rounds` rounds of `cfg.method` on every query.
pub fn run_attack(model: &Model, queries: &[Vec<f32>], cfg: &AttackConfig) -> Result<Vec<AttackResult>, AttackError> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..queries.len()).flat_map(|i| (0..cfg.rounds).map(move |r| (i, r))).collect();
    jobs.par_iter()
        .map(|&(i, r)| {
            let mut rng = cfg.round_rng(i, r);
            let honest = model.eval_trace(&queries[i])?;
            let mut res = match cfg.method {
                AttackMethod::GradDescent => {
                    let init = gradient::uniform_init(model.architecture().input_width(), &mut rng);
                    grad_reconstruct(model, &honest, &init, cfg)?
                }
                AttackMethod::Swap => swap_attack(model, &queries[i], cfg, &mut rng)?,
                m => inverse_transform_attack(model, &honest, m.inverse().expect("inverse"), cfg.ridge)?,
            };
            res.input_id = i;
            res.round = r;
            Ok(res)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Min,
    Mean,
    Max,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Min, Metric::Mean, Metric::Max];

    pub fn of(self, s: &Summary) -> f64 {
        match self {
            Metric::Min => s.min,
            Metric::Mean => s.mean,
            Metric::Max => s.max,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Min => "min",
            Metric::Mean => "mean",
            Metric::Max => "max",
        }
    }
}

pub const TABLE1_THRESHOLDS: [f64; 4] = [1e-6, 6.7e-5, 4.6e-3, 0.308];
pub const TABLE2_THRESHOLDS: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRateRow {
    pub metric: Metric,
    /// Computed layer (1-based); `None` is the all-layers row.
    pub layer: Option<usize>,
    /// Percentage per threshold.
    pub rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRateTable {
    pub thresholds: Vec<f64>,
    pub samples: usize,
    pub rows: Vec<PassRateRow>,
}

impl PassRateTable {
    pub fn rate(&self, metric: Metric, layer: Option<usize>, threshold: f64) -> Option<f64> {
        let t = self.thresholds.iter().position(|&x| x == threshold)?;
        self.rows.iter().find(|r| r.metric == metric && r.layer == layer).map(|r| r.rates[t])
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<8}{:<12}", "metric", "layer");
        for t in &self.thresholds {
            let _ = write!(s, "{:>12}", format!("{t:e}"));
        }
        s.push('\n');
        for row in &self.rows {
            let layer = row.layer.map_or("All Layers".to_string(), |l| format!("L{l}"));
            let _ = write!(s, "{:<8}{:<12}", row.metric.name(), layer);
            for r in &row.rates {
                let _ = write!(s, "{:>11.1}%", r);
            }
            s.push('\n');
        }
        let _ = writeln!(s, "({} samples)", self.samples);
        s
    }
}

/// Percentage of results whose layer statistic is at or below each threshold;
/// the all-layers row needs every layer to pass at once.
pub fn pass_rate_table(results: &[AttackResult], thresholds: &[f64], metrics: &[Metric]) -> Result<PassRateTable, AttackError> {
    let first = results.first().ok_or(AttackError::Empty)?;
    let depth = first.layers.len();
    let n = results.len() as f64;
    let mut rows = Vec::new();
    for &metric in metrics {
        let pass = |r: &AttackResult, l: usize, t: f64| metric.of(&r.layers[l]) <= t;
        for l in 0..depth {
            let rates = thresholds
                .iter()
                .map(|&t| 100.0 * results.iter().filter(|r| pass(r, l, t)).count() as f64 / n)
                .collect();
            rows.push(PassRateRow {
                metric,
                layer: Some(l + 1),
                rates,
            });
        }
        let rates = thresholds
            .iter()
            .map(|&t| 100.0 * results.iter().filter(|r| (0..depth).all(|l| pass(r, l, t))).count() as f64 / n)
            .collect();
        rows.push(PassRateRow { metric, layer: None, rates });
    }
    Ok(PassRateTable {
        thresholds: thresholds.to_vec(),
        samples: results.len(),
        rows,
    })
}

/// CSV with one row per (input, round, layer).
pub fn write_report_csv<W: Write>(results: &[AttackResult], w: W) -> csv::Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["input_id", "round", "layer", "min", "mean", "max"])?;
    for r in results {
        for (l, s) in r.layers.iter().enumerate() {
            wr.write_record([
                r.input_id.to_string(),
                r.round.to_string(),
                (l + 1).to_string(),
                format!("{:e}", s.min),
                format!("{:e}", s.mean),
                format!("{:e}", s.max),
            ])?;
        }
    }
    wr.flush()?;
    Ok(())
}
