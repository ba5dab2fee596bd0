//! Commitment benchmark on a synthetic transformer-sized trace.
//!
//! The default shape is 32 blocks of 6 tensors, each 64 x 4096 `f32`
//! (192 tensors, about 201 MB), committed row-wise.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::merkle::hybrid::{commit_trace_hybrid, HybridLayer, LayerKind, Tensor};
use crate::merkle::{verify_opening, VcError, VcParams};
use crate::model::{Activation, Architecture, Model, OutputFn};
use crate::path_test::Challenge;
use crate::protocol::{gen_params, self_play, verify, ProtocolConfig, ProtocolError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Commitment(#[from] VcError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("thread pool: {0}")]
    Pool(String),
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error("opening of row {0} failed to verify")]
    Opening(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub blocks: usize,
    pub tensors_per_block: usize,
    pub rows: usize,
    pub cols: usize,
    pub seed: u64,
    /// Thread counts to time the commitment with.
    pub threads: Vec<usize>,
    /// Width of the dense network used for the transcript-verification timing.
    pub verify_width: usize,
}

impl BenchConfig {
    pub fn llama_synthetic() -> Self {
        Self {
            blocks: 32,
            tensors_per_block: 6,
            rows: 64,
            cols: 4096,
            seed: 0,
            threads: vec![1, 8],
            verify_width: 64,
        }
    }

    pub fn tensors(&self) -> usize {
        self.blocks * self.tensors_per_block
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitTiming {
    pub threads: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub tensors: usize,
    pub rows: usize,
    pub cols: usize,
    pub total_bytes: usize,
    pub leaves: usize,
    pub proof_depth: usize,
    pub available_cores: usize,
    pub commit: Vec<CommitTiming>,
    pub root: String,
    pub open_row_seconds: f64,
    pub verify_row_seconds: f64,
    /// Encoded size of one row opening, row payload included.
    pub row_proof_bytes: usize,
    /// One row opening per tensor along a path through every block.
    pub path_openings: usize,
    /// Bytes of those openings excluding the row payloads.
    pub path_merkle_overhead_bytes: usize,
    pub path_verify_seconds: f64,
    pub transcript_bytes: usize,
    pub transcript_verify_seconds: f64,
}

/// Deterministic synthetic tensors with entries in `[-1, 1)`.
pub fn synthetic_tensors(cfg: &BenchConfig) -> Vec<Tensor> {
    (0..cfg.tensors())
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            let data = (0..cfg.rows * cfg.cols)
                .map(|_| (rng.next_u32() >> 8) as f32 * (2.0 / (1u32 << 24) as f32) - 1.0)
                .collect();
            Tensor::new(cfg.rows, cfg.cols, data)
        })
        .collect()
}

fn layers(tensors: &[Tensor]) -> Vec<HybridLayer<'_>> {
    tensors
        .iter()
        .map(|t| HybridLayer {
            kind: LayerKind::Elementwise,
            input: t,
            output: t,
        })
        .collect()
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    if cfg.tensors() == 0 || cfg.rows == 0 || cfg.cols == 0 || cfg.threads.is_empty() || cfg.verify_width == 0 {
        return Err(BenchError::Config("every dimension and the thread list must be non-empty".into()));
    }
    let tensors = synthetic_tensors(cfg);
    let layers = layers(&tensors);

    let mut commit = Vec::new();
    let mut hc = None;
    for &threads in &cfg.threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| BenchError::Pool(e.to_string()))?;
        let start = Instant::now();
        let c = pool.install(|| commit_trace_hybrid(&layers))?;
        commit.push(CommitTiming {
            threads,
            seconds: start.elapsed().as_secs_f64(),
        });
        hc = Some(c);
    }
    let hc = hc.expect("at least one timing");
    let cm = hc.commitment;
    let vc = VcParams::default();

    let leaf = hc.leaf_of(cfg.tensors() / 2, cfg.rows / 2).expect("row exists");
    let start = Instant::now();
    let proof = hc.open(&layers, leaf)?;
    let open_row_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    if !verify_opening(&vc, &cm, leaf, &proof.value, &proof) {
        return Err(BenchError::Opening(leaf));
    }
    let verify_row_seconds = start.elapsed().as_secs_f64();

    // A path visits one row of every tensor.
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9a7);
    let mut proofs = Vec::with_capacity(cfg.tensors());
    for t in 0..cfg.tensors() {
        let row = (rng.next_u32() as usize) % cfg.rows;
        let leaf = t * cfg.rows + row;
        proofs.push((leaf, hc.open(&layers, leaf)?));
    }
    let path_merkle_overhead_bytes = proofs.iter().map(|(_, p)| p.encoded_len() - p.value.len()).sum();
    let start = Instant::now();
    for (leaf, p) in &proofs {
        if !verify_opening(&vc, &cm, *leaf, &p.value, p) {
            return Err(BenchError::Opening(*leaf));
        }
    }
    let path_verify_seconds = start.elapsed().as_secs_f64();

    // Full protocol transcript on a dense net with one layer per block.
    let widths = vec![cfg.verify_width; cfg.blocks + 1];
    let arch = Architecture::dense(&widths, Activation::Relu, OutputFn::Identity).map_err(ProtocolError::from)?;
    let model = Model::random(&arch, cfg.seed);
    let pp = gen_params(128, ProtocolConfig {
        num_paths: cfg.blocks,
        ..ProtocolConfig::default()
    })?;
    let qry: Vec<f32> = (0..cfg.verify_width).map(|i| (i as f32 / cfg.verify_width as f32) - 0.5).collect();
    let (t, _) = self_play(&pp, &model, &qry, &Challenge::new([cfg.seed as u8; 32]))?;
    let bytes = t.to_bytes();
    let start = Instant::now();
    let parsed = crate::protocol::codec::Transcript::from_bytes(&bytes).map_err(|e| BenchError::Config(e.to_string()))?;
    let verdict = verify(
        &pp,
        &parsed.cm,
        &parsed.qry,
        &parsed.proof1.claimed_output,
        &parsed.proof1,
        parsed.rho.as_ref().expect("full transcript"),
        parsed.proof2.as_ref().expect("full transcript"),
    );
    let transcript_verify_seconds = start.elapsed().as_secs_f64();
    if !verdict.accept {
        return Err(BenchError::Config(format!("honest transcript rejected: {}", verdict.detail)));
    }

    Ok(BenchReport {
        tensors: cfg.tensors(),
        rows: cfg.rows,
        cols: cfg.cols,
        total_bytes: tensors.iter().map(Tensor::byte_len).sum(),
        leaves: cm.length,
        proof_depth: crate::merkle::proof_depth(cm.length),
        available_cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
        commit,
        root: cm.to_hex(),
        open_row_seconds,
        verify_row_seconds,
        row_proof_bytes: proof.encoded_len(),
        path_openings: proofs.len(),
        path_merkle_overhead_bytes,
        path_verify_seconds,
        transcript_bytes: bytes.len(),
        transcript_verify_seconds,
    })
}
