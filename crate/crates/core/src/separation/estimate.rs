//! Dataset construction, candidate generation, test-error estimation and
//! parameter selection.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{d_out, js_per_layer, layer_mad, LayerFilter, SeparationError, DEFAULT_BINS, DELTA_NOISE};
use crate::model::{Model, Trace};
use crate::path_test::{rand_path_test_with, Challenge, PathSampling, DEFAULT_TOL};

/// Smallest `|S_x|` for which a candidate is still computed.
pub const MIN_SUPPORT: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationRecord {
    pub query_id: usize,
    /// Which adversarial model produced the record.
    #[serde(default)]
    pub model_id: usize,
    pub d_out: f64,
    pub d_trc: f64,
    /// Mean absolute difference per layer, all layers including the input.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<f64>,
}

/// Stored traces backing one record.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSample {
    pub qry: Vec<f32>,
    pub honest: Trace,
    pub adversarial: Trace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SeparationRecord>,
    /// Parallel to `records`.
    pub samples: Vec<TraceSample>,
    pub filter: LayerFilter,
}

impl Dataset {
    /// Assembles a dataset from precomputed traces, computing every metric.
    pub fn from_samples(model_ids: &[usize], samples: Vec<TraceSample>, filter: LayerFilter, honest: &Model) -> Result<Self, SeparationError> {
        if filter.valid.is_empty() {
            return Err(SeparationError::EmptyFilter);
        }
        let arch = honest.architecture();
        let records = samples
            .iter()
            .enumerate()
            .map(|(j, s)| {
                let y = s.honest.output(arch)?;
                let y_adv = s.adversarial.output(arch)?;
                let layers: Vec<f64> = (0..s.honest.num_layers())
                    .map(|l| layer_mad(s.honest.layer(l), s.adversarial.layer(l)).unwrap_or(f64::NAN))
                    .collect();
                let d_trc = filter.valid.iter().map(|&l| layers[l]).sum::<f64>() / filter.valid.len() as f64;
                Ok(SeparationRecord {
                    query_id: j,
                    model_id: model_ids.get(j).copied().unwrap_or(0),
                    d_out: d_out(&y, &y_adv),
                    d_trc,
                    layers,
                })
            })
            .collect::<Result<Vec<_>, SeparationError>>()?;
        Ok(Self { records, samples, filter })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Evaluates honest and adversarial models on a query set.
#[derive(Debug, Clone)]
pub struct DatasetBuilder {
    pub bins: usize,
    /// Overrides the divergence filter when set.
    pub layers: Option<Vec<usize>>,
}

impl Default for DatasetBuilder {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            layers: None,
        }
    }
}

impl DatasetBuilder {
    pub fn build(&self, honest: &Model, adversaries: &[Model], queries: &[Vec<f32>]) -> Result<Dataset, SeparationError> {
        let jobs: Vec<(usize, &Vec<f32>)> = (0..adversaries.len()).flat_map(|m| queries.iter().map(move |q| (m, q))).collect();
        let samples = jobs
            .par_iter()
            .map(|&(m, q)| {
                Ok(TraceSample {
                    qry: q.clone(),
                    honest: honest.eval_trace(q)?,
                    adversarial: adversaries[m].eval_trace(q)?,
                })
            })
            .collect::<Result<Vec<_>, SeparationError>>()?;
        let ids: Vec<usize> = jobs.iter().map(|&(m, _)| m).collect();
        let filter = match &self.layers {
            Some(valid) => LayerFilter {
                js: Vec::new(),
                valid: valid.clone(),
            },
            None => {
                let h: Vec<Trace> = samples.iter().map(|s| s.honest.clone()).collect();
                let a: Vec<Trace> = samples.iter().map(|s| s.adversarial.clone()).collect();
                js_per_layer(&h, &a, self.bins)?
            }
        };
        Dataset::from_samples(&ids, samples, filter, honest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCandidate {
    pub delta_out: f64,
    pub delta_trace: f64,
    pub support: usize,
}

/// Nearest-rank quantile of an ascending slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Candidate `(delta_out, delta_trace)` pairs: for each distinct output
/// distance `x`, the `eps_sep`-quantile of trace distances among records with
/// `d_out >= x`.
pub fn gen_candidates(records: &[SeparationRecord], eps_sep: f64, delta_noise: f64) -> Result<Vec<ThresholdCandidate>, SeparationError> {
    gen_candidates_with(records, eps_sep, delta_noise, MIN_SUPPORT)
}

pub fn gen_candidates_with(
    records: &[SeparationRecord],
    eps_sep: f64,
    delta_noise: f64,
    min_support: usize,
) -> Result<Vec<ThresholdCandidate>, SeparationError> {
    if records.is_empty() {
        return Err(SeparationError::EmptyDataset);
    }
    let mut sorted: Vec<(f64, f64)> = records.iter().map(|r| (r.d_out, r.d_trc)).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i].0;
        let support = sorted.len() - i;
        if support < min_support {
            break;
        }
        let mut trc: Vec<f64> = sorted[i..].iter().map(|p| p.1).collect();
        trc.sort_by(f64::total_cmp);
        let q = quantile_sorted(&trc, eps_sep);
        if q > delta_noise {
            out.push(ThresholdCandidate {
                delta_out: x,
                delta_trace: q,
                support,
            });
        }
        while i < sorted.len() && sorted[i].0 == x {
            i += 1;
        }
    }
    Ok(out)
}

/// How the path test is run while estimating its error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub repetitions: usize,
    pub num_paths: usize,
    pub tol: f64,
    pub sampling: PathSampling,
    pub seed: u64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            repetitions: 50,
            num_paths: 1,
            tol: DEFAULT_TOL,
            sampling: PathSampling::Independent,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsTstEstimate {
    pub eps_tst: f64,
    pub count_valid: usize,
}

/// Mean acceptance frequency of the path test, against the honest model's
/// weights, over adversarial traces whose trace distance is at least `delta`.
pub fn estimate_eps_tst(model: &Model, dataset: &Dataset, delta: f64, cfg: &TestConfig) -> Result<EpsTstEstimate, SeparationError> {
    let valid: Vec<usize> = (0..dataset.len()).filter(|&j| dataset.records[j].d_trc >= delta).collect();
    if valid.is_empty() {
        return Err(SeparationError::NoQualifying { delta });
    }
    let sum: f64 = valid
        .par_iter()
        .map(|&j| {
            let s = &dataset.samples[j];
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
            rng.set_stream(j as u64);
            let accepted = (0..cfg.repetitions)
                .filter(|_| {
                    let rho = Challenge::random(&mut rng);
                    rand_path_test_with(model, &s.adversarial, &s.qry, &rho.rho, cfg.num_paths, cfg.sampling, cfg.tol).accept
                })
                .count();
            accepted as f64 / cfg.repetitions as f64
        })
        .sum();
    Ok(EpsTstEstimate {
        eps_tst: sum / valid.len() as f64,
        count_valid: valid.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectedParams {
    pub delta_out: f64,
    pub delta_trace: f64,
    pub eps_sep: f64,
    pub eps_tst: f64,
    /// `eps_sep + eps_tst`.
    pub soundness: f64,
    pub count_valid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Selection {
    Selected(SelectedParams),
    NoSelection { candidates_tried: usize },
}

impl Selection {
    pub fn params(&self) -> Option<&SelectedParams> {
        match self {
            Selection::Selected(p) => Some(p),
            Selection::NoSelection { .. } => None,
        }
    }
}

/// Walks candidates by increasing `delta_out` and returns the first whose
/// estimated test error is within `eps_target`.
pub fn select_params(
    model: &Model,
    candidates: &[ThresholdCandidate],
    dataset: &Dataset,
    eps_sep: f64,
    eps_target: f64,
    cfg: &TestConfig,
) -> Selection {
    let mut ordered = candidates.to_vec();
    ordered.sort_by(|a, b| a.delta_out.total_cmp(&b.delta_out));
    for c in &ordered {
        let Ok(est) = estimate_eps_tst(model, dataset, c.delta_trace, cfg) else {
            continue;
        };
        if est.eps_tst <= eps_target {
            return Selection::Selected(SelectedParams {
                delta_out: c.delta_out,
                delta_trace: c.delta_trace,
                eps_sep,
                eps_tst: est.eps_tst,
                soundness: eps_sep + est.eps_tst,
                count_valid: est.count_valid,
            });
        }
    }
    Selection::NoSelection {
        candidates_tried: ordered.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyResult {
    pub per_model: Vec<Selection>,
    /// Coordinatewise minimum thresholds over the models that produced a
    /// selection, with the largest test error among them.
    pub combined: Option<SelectedParams>,
}

/// Runs the full pipeline separately against each adversarial model.
pub fn run_family(
    model: &Model,
    adversaries: &[Model],
    queries: &[Vec<f32>],
    builder: &DatasetBuilder,
    eps_sep: f64,
    eps_target: f64,
    cfg: &TestConfig,
) -> Result<FamilyResult, SeparationError> {
    let mut per_model = Vec::with_capacity(adversaries.len());
    for adv in adversaries {
        let ds = builder.build(model, std::slice::from_ref(adv), queries)?;
        let cands = gen_candidates(&ds.records, eps_sep, DELTA_NOISE)?;
        per_model.push(select_params(model, &cands, &ds, eps_sep, eps_target, cfg));
    }
    let chosen: Vec<&SelectedParams> = per_model.iter().filter_map(Selection::params).collect();
    let combined = (!chosen.is_empty()).then(|| {
        let eps_tst = chosen.iter().map(|p| p.eps_tst).fold(0.0, f64::max);
        SelectedParams {
            delta_out: chosen.iter().map(|p| p.delta_out).fold(f64::INFINITY, f64::min),
            delta_trace: chosen.iter().map(|p| p.delta_trace).fold(f64::INFINITY, f64::min),
            eps_sep,
            eps_tst,
            soundness: eps_sep + eps_tst,
            count_valid: chosen.iter().map(|p| p.count_valid).min().unwrap_or(0),
        }
    });
    Ok(FamilyResult { per_model, combined })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(d_out: f64, d_trc: f64) -> SeparationRecord {
        SeparationRecord {
            query_id: 0,
            model_id: 0,
            d_out,
            d_trc,
            layers: Vec::new(),
        }
    }

    #[test]
    fn quantile_is_nearest_rank() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.0), 1.0);
        assert_eq!(quantile_sorted(&v, 0.25), 1.0);
        assert_eq!(quantile_sorted(&v, 0.26), 2.0);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }

    #[test]
    fn zero_trace_distance_gives_no_candidates() {
        let recs: Vec<_> = (0..100).map(|i| rec(i as f64, 0.0)).collect();
        assert!(gen_candidates(&recs, 0.01, DELTA_NOISE).unwrap().is_empty());
    }

    #[test]
    fn small_dataset_gives_no_candidates() {
        assert!(gen_candidates(&[rec(1.0, 1.0)], 0.01, DELTA_NOISE).unwrap().is_empty());
        assert_eq!(gen_candidates(&[], 0.01, DELTA_NOISE).unwrap_err(), SeparationError::EmptyDataset);
    }

    #[test]
    fn candidates_stop_at_min_support() {
        let recs: Vec<_> = (1..=40).map(|i| rec(i as f64, i as f64)).collect();
        let c = gen_candidates(&recs, 0.01, DELTA_NOISE).unwrap();
        assert_eq!(c.len(), 11);
        assert_eq!(c[0].delta_out, 1.0);
        assert_eq!(c.last().unwrap().support, 30);
        assert!(c.iter().all(|c| c.delta_trace == c.delta_out));
    }

    #[test]
    fn duplicate_output_distances_collapse() {
        let recs: Vec<_> = (0..60).map(|i| rec((i / 2) as f64, 1.0)).collect();
        let c = gen_candidates(&recs, 0.01, DELTA_NOISE).unwrap();
        assert_eq!(c.len(), 16);
    }
}
