//! The three-message verifiable inference protocol.
//!
//! 1. The prover evaluates the model, commits to the flat trace and sends the
//!    claimed output with the trace commitment ([`prove1`]).
//! 2. The verifier replies with a 32-byte challenge.
//! 3. The prover opens every weight vector and activation the path test reads,
//!    plus the output slice ([`prove2`]).
//!
//! [`verify`] only ever reads weights and activations through openings that
//! it has authenticated against the model and trace commitments.

pub mod codec;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::merkle::{
    model_leaf_index, model_leaves, trace_leaves, verify_opening, Commitment, Hash, MerkleTree, OpeningProof,
    VcError, VcParams,
};
use crate::model::{output_from_last, Architecture, FanIn, Model, ModelError, Trace};
use crate::path_test::{
    check_paths_anchored, derive_paths_with, Challenge, FailureKind, ModelOracle, OracleError, Path, PathSampling,
    TraceOracle, DEFAULT_TOL,
};

pub use codec::Transcript;

/// Challenge length in bytes.
pub const CHALLENGE_BYTES: usize = 32;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Commitment(#[from] VcError),
    #[error("invalid parameters: {0}")]
    Params(String),
}

/// Verifier-facing configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub num_paths: usize,
    pub tol: f64,
    #[serde(default)]
    pub sampling: PathSampling,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            num_paths: 1,
            tol: DEFAULT_TOL,
            sampling: PathSampling::Independent,
        }
    }
}

impl ProtocolConfig {
    /// Bit-exact local checks.
    pub fn strict() -> Self {
        Self {
            tol: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublicParams {
    pub lambda: u32,
    pub vc: VcParams,
    pub num_paths: usize,
    pub tol: f64,
    pub sampling: PathSampling,
}

impl PublicParams {
    pub fn challenge_len(&self) -> usize {
        CHALLENGE_BYTES
    }

    pub fn config(&self) -> ProtocolConfig {
        ProtocolConfig {
            num_paths: self.num_paths,
            tol: self.tol,
            sampling: self.sampling,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(41);
        out.extend_from_slice(&self.lambda.to_le_bytes());
        out.extend_from_slice(&(self.vc.max_len as u64).to_le_bytes());
        out.extend_from_slice(&(self.num_paths as u64).to_le_bytes());
        out.extend_from_slice(&self.tol.to_le_bytes());
        out.push(match self.sampling {
            PathSampling::Independent => 0,
            PathSampling::OutputCoverage => 1,
        });
        out
    }

    /// Hash that binds a transcript to these parameters.
    pub fn digest(&self) -> Hash {
        let mut h = Sha256::new();
        h.update(b"vinf-pp");
        h.update(self.to_bytes());
        h.finalize().into()
    }
}

/// Deterministic setup.
pub fn gen_params(lambda: u32, config: ProtocolConfig) -> Result<PublicParams, ProtocolError> {
    if config.num_paths == 0 {
        return Err(ProtocolError::Params("num_paths must be at least 1".into()));
    }
    if !(config.tol >= 0.0) || !config.tol.is_finite() {
        return Err(ProtocolError::Params(format!("tol must be a finite non-negative number, got {}", config.tol)));
    }
    Ok(PublicParams {
        lambda,
        vc: VcParams::default(),
        num_paths: config.num_paths,
        tol: config.tol,
        sampling: config.sampling,
    })
}

/// Public commitment to a model: its architecture and a vector commitment
/// over per-node fan-in weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelCommitment {
    pub arch: Architecture,
    pub weights: Commitment,
}

impl ModelCommitment {
    pub fn digest(&self) -> Hash {
        let mut h = Sha256::new();
        h.update(b"vinf-model");
        h.update(codec::arch_bytes(&self.arch));
        h.update(self.weights.to_bytes());
        h.finalize().into()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.digest())
    }
}

pub fn commit_model(pp: &PublicParams, model: &Model) -> Result<ModelCommitment, ProtocolError> {
    Ok(ModelCommitment {
        arch: model.architecture().clone(),
        weights: crate::merkle::commit_to_model(&pp.vc, model)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proof1 {
    pub claimed_output: Vec<f32>,
    pub trace_commitment: Commitment,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Proof2 {
    /// Fan-in openings keyed by `(layer, node)`.
    pub weights: BTreeMap<(usize, usize), OpeningProof>,
    /// Activation openings keyed by flat trace index.
    pub activations: BTreeMap<usize, OpeningProof>,
}

impl Proof2 {
    pub fn num_openings(&self) -> usize {
        self.weights.len() + self.activations.len()
    }

    /// Encoded size in bytes.
    pub fn byte_len(&self) -> usize {
        codec::proof2_bytes(self).len()
    }

    /// Bytes spent on sibling hashes.
    pub fn hash_bytes(&self) -> usize {
        self.weights
            .values()
            .chain(self.activations.values())
            .map(|p| 32 * p.siblings.len())
            .sum()
    }
}

/// Positions the verifier will read for a given set of paths.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Demand {
    pub weights: BTreeSet<(usize, usize)>,
    pub activations: BTreeSet<usize>,
}

pub fn demand_set(arch: &Architecture, paths: &[Path]) -> Demand {
    let mut d = Demand::default();
    for path in paths {
        for (layer, node) in path.output_to_input() {
            if layer == 0 {
                d.activations.insert(node);
                continue;
            }
            d.weights.insert((layer, node));
            d.activations.insert(arch.node_index(layer, node));
            let start = arch.layer_offset(layer - 1);
            d.activations.extend(start..start + arch.width(layer - 1));
        }
    }
    d.activations.extend(arch.output_indices());
    d
}

/// Everything the prover keeps between the two messages.
pub struct ProverState {
    pp: PublicParams,
    model: Model,
    trace: Trace,
    trace_tree: MerkleTree,
    model_tree: MerkleTree,
    model_leaves: Vec<Vec<u8>>,
}

impl ProverState {
    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    /// Replaces the committed trace; used to model provers who commit to
    /// something other than the honest evaluation.
    pub fn with_trace(mut self, trace: Trace) -> Result<(Self, Proof1), ProtocolError> {
        let arch = self.model.architecture();
        if !trace.is_shaped_for(arch) {
            return Err(ModelError::ShapeMismatch {
                layer: arch.depth(),
                expected: arch.total_nodes(),
                found: trace.len(),
            }
            .into());
        }
        let claimed_output = trace.output(arch)?;
        self.trace_tree = MerkleTree::build(&trace_leaves(trace.values()))?;
        self.trace = trace;
        let proof1 = Proof1 {
            claimed_output,
            trace_commitment: self.trace_tree.commitment(),
        };
        Ok((self, proof1))
    }
}

/// First prover message.
pub fn prove1(pp: &PublicParams, model: &Model, qry: &[f32]) -> Result<(Proof1, ProverState), ProtocolError> {
    let trace = model.eval_trace(qry)?;
    let claimed_output = trace.output(model.architecture())?;
    let trace_tree = MerkleTree::build(&trace_leaves(trace.values()))?;
    let leaves = model_leaves(model);
    let model_tree = MerkleTree::build(&leaves)?;
    let proof1 = Proof1 {
        claimed_output,
        trace_commitment: trace_tree.commitment(),
    };
    Ok((
        proof1,
        ProverState {
            pp: *pp,
            model: model.clone(),
            trace,
            trace_tree,
            model_tree,
            model_leaves: leaves,
        },
    ))
}

/// Second prover message: openings for every position the paths derived
/// from `rho` touch, plus the output slice.
pub fn prove2(state: &ProverState, rho: &Challenge) -> Result<Proof2, ProtocolError> {
    let arch = state.model.architecture();
    let paths = derive_paths_with(arch, &rho.rho, state.pp.num_paths, state.pp.sampling);
    let demand = demand_set(arch, &paths);
    let mut proof = Proof2::default();
    for &(layer, node) in &demand.weights {
        let leaf = model_leaf_index(arch, layer, node);
        proof
            .weights
            .insert((layer, node), state.model_tree.open(leaf, &state.model_leaves[leaf])?);
    }
    for &idx in &demand.activations {
        let value = state.trace.values()[idx].to_le_bytes();
        proof.activations.insert(idx, state.trace_tree.open(idx, &value)?);
    }
    Ok(proof)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    BadOpening,
    MissingOpening,
    PathInconsistent,
    OutputMismatch,
    InputMismatch,
}

impl RejectReason {
    pub fn as_str(self) -> &'static str {
        match self {
            RejectReason::BadOpening => "bad-opening",
            RejectReason::MissingOpening => "missing-opening",
            RejectReason::PathInconsistent => "path-inconsistent",
            RejectReason::OutputMismatch => "output-mismatch",
            RejectReason::InputMismatch => "input-mismatch",
        }
    }
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub accept: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<RejectReason>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl Verdict {
    fn accept() -> Self {
        Self {
            accept: true,
            reason: None,
            detail: String::new(),
        }
    }

    fn reject(reason: RejectReason, detail: impl Into<String>) -> Self {
        Self {
            accept: false,
            reason: Some(reason),
            detail: detail.into(),
        }
    }
}

struct OpenedModel<'a> {
    arch: &'a Architecture,
    fan_ins: BTreeMap<(usize, usize), FanIn>,
}

impl ModelOracle for OpenedModel<'_> {
    fn architecture(&self) -> &Architecture {
        self.arch
    }

    fn fan_in(&self, layer: usize, node: usize) -> Result<FanIn, OracleError> {
        self.fan_ins
            .get(&(layer, node))
            .cloned()
            .ok_or(OracleError::MissingWeights { layer, node })
    }
}

struct OpenedTrace(BTreeMap<usize, f32>);

impl TraceOracle for OpenedTrace {
    fn activation(&self, index: usize) -> Result<f32, OracleError> {
        self.0.get(&index).copied().ok_or(OracleError::MissingActivation { index })
    }
}

fn values_match(a: f32, b: f32, tol: f64) -> bool {
    if tol == 0.0 {
        a.to_bits() == b.to_bits()
    } else {
        (f64::from(a) - f64::from(b)).abs() <= tol
    }
}

/// Decides whether to accept `y` as the model's output on `qry`.
pub fn verify(
    pp: &PublicParams,
    cm: &ModelCommitment,
    qry: &[f32],
    y: &[f32],
    proof1: &Proof1,
    rho: &Challenge,
    proof2: &Proof2,
) -> Verdict {
    use RejectReason::*;
    let arch = &cm.arch;
    let tcm = &proof1.trace_commitment;

    if tcm.length != arch.total_nodes() {
        return Verdict::reject(BadOpening, format!("trace commitment covers {} values, expected {}", tcm.length, arch.total_nodes()));
    }
    if cm.weights.length != arch.computed_nodes() {
        return Verdict::reject(BadOpening, "model commitment length does not match its architecture");
    }

    // 1. Authenticate every opening and decode its payload.
    let mut fan_ins = BTreeMap::new();
    for (&(layer, node), proof) in &proof2.weights {
        if layer == 0 || layer > arch.depth() || node >= arch.width(layer) {
            return Verdict::reject(BadOpening, format!("weight opening for nonexistent node ({layer}, {node})"));
        }
        let leaf = model_leaf_index(arch, layer, node);
        if !verify_opening(&pp.vc, &cm.weights, leaf, &proof.value, proof) {
            return Verdict::reject(BadOpening, format!("weight opening for node ({layer}, {node}) does not verify"));
        }
        match FanIn::from_bytes(&proof.value, arch.width(layer - 1), arch.has_bias()) {
            Some(f) => fan_ins.insert((layer, node), f),
            None => return Verdict::reject(BadOpening, format!("weight opening for node ({layer}, {node}) has the wrong size")),
        };
    }
    let mut acts = BTreeMap::new();
    for (&idx, proof) in &proof2.activations {
        if !verify_opening(&pp.vc, tcm, idx, &proof.value, proof) {
            return Verdict::reject(BadOpening, format!("activation opening at index {idx} does not verify"));
        }
        let Ok(bytes) = <[u8; 4]>::try_from(proof.value.as_slice()) else {
            return Verdict::reject(BadOpening, format!("activation opening at index {idx} is not a 32-bit float"));
        };
        acts.insert(idx, f32::from_le_bytes(bytes));
    }

    // 2. Every demanded position must be present.
    let paths = derive_paths_with(arch, &rho.rho, pp.num_paths, pp.sampling);
    let demand = demand_set(arch, &paths);
    if let Some(&(l, n)) = demand.weights.iter().find(|k| !fan_ins.contains_key(k)) {
        return Verdict::reject(MissingOpening, format!("no weight opening for node ({l}, {n})"));
    }
    if let Some(idx) = demand.activations.iter().find(|k| !acts.contains_key(k)) {
        return Verdict::reject(MissingOpening, format!("no activation opening at index {idx}"));
    }

    // 3. Local consistency along each path.
    let model = OpenedModel { arch, fan_ins };
    let trace = OpenedTrace(acts);
    let report = check_paths_anchored(&model, &trace, None, &paths, pp.tol);
    if let Some(f) = report.failure {
        return match f.kind {
            FailureKind::Inconsistent { residual } => Verdict::reject(
                PathInconsistent,
                format!("path {} node ({}, {}) residual {residual:e}", f.path, f.layer, f.node),
            ),
            FailureKind::Oracle { message } => Verdict::reject(MissingOpening, message),
            FailureKind::InputMismatch { .. } => Verdict::reject(InputMismatch, "input anchor"),
        };
    }

    // 4. Claimed output against the opened output slice.
    let last: Vec<f32> = arch.output_indices().map(|i| trace.0[&i]).collect();
    let expected = output_from_last(arch.out_fn(), &last);
    if y.len() != expected.len() || proof1.claimed_output.len() != expected.len() {
        return Verdict::reject(OutputMismatch, format!("claimed output has length {}, expected {}", y.len(), expected.len()));
    }
    for (i, ((&yi, &ci), &ei)) in y.iter().zip(&proof1.claimed_output).zip(&expected).enumerate() {
        if yi.to_bits() != ci.to_bits() || !values_match(yi, ei, pp.tol) {
            return Verdict::reject(OutputMismatch, format!("output coordinate {i}: claimed {yi}, trace gives {ei}"));
        }
    }

    // 5. Input anchor on every opened input-layer value.
    if qry.len() != arch.input_width() {
        return Verdict::reject(InputMismatch, format!("query has length {}, model expects {}", qry.len(), arch.input_width()));
    }
    for (&idx, &v) in trace.0.range(..arch.input_width()) {
        if v.to_bits() != qry[idx].to_bits() {
            return Verdict::reject(InputMismatch, format!("input {idx}: committed {v}, query {}", qry[idx]));
        }
    }
    Verdict::accept()
}

/// Runs all three messages honestly and verifies.
pub fn self_play(pp: &PublicParams, model: &Model, qry: &[f32], rho: &Challenge) -> Result<(Transcript, Verdict), ProtocolError> {
    let cm = commit_model(pp, model)?;
    let (proof1, state) = prove1(pp, model, qry)?;
    let proof2 = prove2(&state, rho)?;
    let verdict = verify(pp, &cm, qry, &proof1.claimed_output, &proof1, rho, &proof2);
    let transcript = Transcript {
        pp_hash: pp.digest(),
        cm,
        qry: qry.to_vec(),
        proof1,
        rho: Some(*rho),
        proof2: Some(proof2),
    };
    Ok((transcript, verdict))
}
