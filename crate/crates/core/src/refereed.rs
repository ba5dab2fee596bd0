//! Refereed delegation: two provers disagree about a model's output and a
//! referee bisects their committed hashed traces to a single node.
//!
//! Each prover commits to entries `(a_k, h_k)` where `h_0 = H("")` and
//! `h_k = H(h_{k-1} | a_{k-1})`, so equal entries at `k` mean equal
//! prefixes. Traces are padded with zero activations to `n + 1` entries with
//! `n` a power of two; the referee keeps `k < l` with the entries equal at
//! `k` and different at `l`, halving `l - k` every round.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::merkle::{model_leaf_index, model_leaves, verify_opening, Commitment, Hash, MerkleTree, OpeningProof, VcParams};
use crate::model::{check_node, Architecture, FanIn, Model, ModelError};
use crate::protocol::ModelCommitment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HashedEntry {
    pub value: f32,
    #[serde(with = "hex::serde")]
    pub prefix: Hash,
}

impl HashedEntry {
    pub fn to_bytes(&self) -> [u8; 36] {
        let mut out = [0u8; 36];
        out[..4].copy_from_slice(&self.value.to_le_bytes());
        out[4..].copy_from_slice(&self.prefix);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Option<Self> {
        if bytes.len() != 36 {
            return None;
        }
        let value = f32::from_le_bytes(bytes[..4].try_into().ok()?);
        let prefix = bytes[4..].try_into().ok()?;
        Some(Self { value, prefix })
    }

    /// Bitwise equality, so `-0.0` and `0.0` count as different claims.
    pub fn same_as(&self, other: &Self) -> bool {
        self.value.to_bits() == other.value.to_bits() && self.prefix == other.prefix
    }
}

pub fn empty_prefix() -> Hash {
    Sha256::digest([]).into()
}

pub fn chain(prev: &Hash, value: f32) -> Hash {
    let mut h = Sha256::new();
    h.update(prev);
    h.update(value.to_le_bytes());
    h.finalize().into()
}

/// Index of the last entry once a trace of `real_len` values is padded.
pub fn padded_last(real_len: usize) -> usize {
    real_len.saturating_sub(1).max(1).next_power_of_two()
}

/// Chains `values` and pads them with zero activations to `padded_last + 1`
/// entries.
pub fn hashed_entries(values: &[f32]) -> Vec<HashedEntry> {
    let n = padded_last(values.len());
    let mut out = Vec::with_capacity(n + 1);
    let mut prefix = empty_prefix();
    for k in 0..=n {
        let value = values.get(k).copied().unwrap_or(0.0);
        out.push(HashedEntry { value, prefix });
        prefix = chain(&prefix, value);
    }
    out
}

/// Committed hashed trace.
#[derive(Debug, Clone)]
pub struct HashedTrace {
    pub entries: Vec<HashedEntry>,
    tree: MerkleTree,
}

impl HashedTrace {
    pub fn new(entries: Vec<HashedEntry>) -> Self {
        let leaves: Vec<[u8; 36]> = entries.iter().map(HashedEntry::to_bytes).collect();
        let tree = MerkleTree::build(&leaves).expect("hashed traces are never empty");
        Self { entries, tree }
    }

    pub fn from_values(values: &[f32]) -> Self {
        Self::new(hashed_entries(values))
    }

    pub fn commitment(&self) -> Commitment {
        self.tree.commitment()
    }

    pub fn open(&self, index: usize) -> Option<EntryOpening> {
        let entry = *self.entries.get(index)?;
        let proof = self.tree.open(index, &entry.to_bytes()).ok()?;
        Some(EntryOpening { entry, proof })
    }
}

/// Builds the hashed trace of `values` and its commitment.
pub fn build_hashed_trace(values: &[f32]) -> (Vec<HashedEntry>, Commitment) {
    let t = HashedTrace::from_values(values);
    let c = t.commitment();
    (t.entries, c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryOpening {
    pub entry: HashedEntry,
    pub proof: OpeningProof,
}

/// A participant in the bisection game. Adversarial strategies implement
/// this trait directly or wrap [`TraceParty`].
pub trait Party {
    /// Commitment to the party's hashed trace.
    fn propose(&mut self) -> Commitment;
    /// Opens one committed entry.
    fn open_at(&mut self, index: usize) -> Option<EntryOpening>;
    /// Opens the fan-in weights of computed node `(layer, node)` against the
    /// model commitment.
    fn final_open(&mut self, layer: usize, node: usize) -> Option<OpeningProof>;
}

/// A party that commits to a fixed trace and answers every request truthfully
/// with respect to that commitment.
pub struct TraceParty {
    trace: HashedTrace,
    model_tree: MerkleTree,
    model_leaves: Vec<Vec<u8>>,
    arch: Architecture,
}

impl TraceParty {
    /// The honest prover: evaluates `model` on `qry`.
    pub fn honest(model: &Model, qry: &[f32]) -> Result<Self, ModelError> {
        let trace = model.eval_trace(qry)?;
        Ok(Self::with_values(model, trace.values()))
    }

    /// Commits to arbitrary activation values with a correct hash chain.
    pub fn with_values(model: &Model, values: &[f32]) -> Self {
        Self::with_entries(model, hashed_entries(values))
    }

    /// Commits to arbitrary entries, including ones with a broken chain.
    pub fn with_entries(model: &Model, entries: Vec<HashedEntry>) -> Self {
        let leaves = model_leaves(model);
        Self {
            trace: HashedTrace::new(entries),
            model_tree: MerkleTree::build(&leaves).expect("models have computed nodes"),
            model_leaves: leaves,
            arch: model.architecture().clone(),
        }
    }

    pub fn entries(&self) -> &[HashedEntry] {
        &self.trace.entries
    }
}

impl Party for TraceParty {
    fn propose(&mut self) -> Commitment {
        self.trace.commitment()
    }

    fn open_at(&mut self, index: usize) -> Option<EntryOpening> {
        self.trace.open(index)
    }

    fn final_open(&mut self, layer: usize, node: usize) -> Option<OpeningProof> {
        if layer == 0 || layer > self.arch.depth() || node >= self.arch.width(layer) {
            return None;
        }
        let leaf = model_leaf_index(&self.arch, layer, node);
        self.model_tree.open(leaf, &self.model_leaves[leaf]).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Winner {
    P1,
    P2,
    BothRejected,
    /// Both parties passed the final check; only possible with a positive
    /// tolerance when the claims differ by less than it.
    Undecided,
}

impl Winner {
    fn from_flags(p1_ok: bool, p2_ok: bool) -> Self {
        match (p1_ok, p2_ok) {
            (true, false) => Winner::P1,
            (false, true) => Winner::P2,
            (false, false) => Winner::BothRejected,
            (true, true) => Winner::Undecided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub winner: Winner,
    /// Index at which the game was decided.
    pub failing_index: usize,
    pub rounds: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub round: usize,
    pub u: usize,
    pub a1: Option<f32>,
    pub a2: Option<f32>,
    pub decision: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RefereeError {
    #[error("query has length {found}, model expects {expected}")]
    QueryLength { expected: usize, found: usize },
    #[error("the parties agree on the final entry; there is nothing to referee")]
    NoDispute,
}

pub struct Referee {
    pub vc: VcParams,
    pub cm: ModelCommitment,
    pub tol: f64,
    pub log: Vec<LogRecord>,
}

enum Opened {
    Ok(HashedEntry),
    Bad,
}

impl Referee {
    pub fn new(cm: ModelCommitment) -> Self {
        Self {
            vc: VcParams::default(),
            cm,
            tol: 0.0,
            log: Vec::new(),
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn real_len(&self) -> usize {
        self.cm.arch.total_nodes()
    }

    fn open(&self, party: &mut dyn Party, cm: &Commitment, index: usize) -> Opened {
        match party.open_at(index) {
            Some(o) if o.proof.index == index && verify_opening(&self.vc, cm, index, &o.proof.value, &o.proof) => {
                match HashedEntry::from_bytes(&o.proof.value) {
                    Some(e) if e == o.entry || e.same_as(&o.entry) => Opened::Ok(e),
                    _ => Opened::Bad,
                }
            }
            _ => Opened::Bad,
        }
    }

    /// Input-layer entries must carry the query; padding entries must be zero.
    fn entry_admissible(&self, qry: &[f32], index: usize, e: &HashedEntry) -> bool {
        if index < qry.len() {
            e.value.to_bits() == qry[index].to_bits()
        } else if index >= self.real_len() {
            e.value.to_bits() == 0f32.to_bits()
        } else {
            true
        }
    }

    /// Recomputes computed node `index` from the party's own parent entries
    /// and its opened fan-in weights.
    pub fn verify_step(
        &self,
        party: &mut dyn Party,
        cm_trace: &Commitment,
        qry: &[f32],
        prev: &HashedEntry,
        index: usize,
        claimed: &HashedEntry,
    ) -> Result<Vec<HashedEntry>, ()> {
        if chain(&prev.prefix, prev.value) != claimed.prefix {
            return Err(());
        }
        if !self.entry_admissible(qry, index, claimed) {
            return Err(());
        }
        let arch = &self.cm.arch;
        if index < arch.input_width() || index >= self.real_len() {
            return Ok(Vec::new());
        }
        let (layer, node) = arch.locate(index).ok_or(())?;
        let proof = party.final_open(layer, node).ok_or(())?;
        let leaf = model_leaf_index(arch, layer, node);
        if proof.index != leaf || !verify_opening(&self.vc, &self.cm.weights, leaf, &proof.value, &proof) {
            return Err(());
        }
        let fan_in = FanIn::from_bytes(&proof.value, arch.width(layer - 1), arch.has_bias()).ok_or(())?;
        let start = arch.layer_offset(layer - 1);
        let mut parents = Vec::with_capacity(arch.width(layer - 1));
        for j in start..start + arch.width(layer - 1) {
            match self.open(party, cm_trace, j) {
                Opened::Ok(e) if self.entry_admissible(qry, j, &e) => parents.push(e),
                _ => return Err(()),
            }
        }
        let values: Vec<f32> = parents.iter().map(|e| e.value).collect();
        let check = check_node(&fan_in, &values, claimed.value, arch.activation(layer), self.tol);
        if check.pass {
            Ok(parents)
        } else {
            Err(())
        }
    }

    fn record(&mut self, round: usize, u: usize, a1: Option<f32>, a2: Option<f32>, decision: impl Into<String>) {
        self.log.push(LogRecord {
            round,
            u,
            a1,
            a2,
            decision: decision.into(),
        });
    }

    /// Writes the session log as one JSON object per line.
    pub fn write_log<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for r in &self.log {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn finish(winner: Winner, index: usize, rounds: usize, reason: impl Into<String>) -> Verdict {
    Verdict {
        winner,
        failing_index: index,
        rounds,
        reason: reason.into(),
    }
}

/// Plays the bisection game between `p1` and `p2` on `qry`.
///
/// A party whose opening fails to verify, or whose opened input entry
/// differs from the query, forfeits immediately. When the two parties'
/// parent entries at the final node disagree (a party committed to values
/// inconsistent with its own hash chain) the game continues on the prefix
/// before the first disagreeing parent.
pub fn run_bisection(p1: &mut dyn Party, p2: &mut dyn Party, referee: &mut Referee, qry: &[f32]) -> Result<Verdict, RefereeError> {
    let arch = referee.cm.arch.clone();
    if qry.len() != arch.input_width() {
        return Err(RefereeError::QueryLength {
            expected: arch.input_width(),
            found: qry.len(),
        });
    }
    let c1 = p1.propose();
    let c2 = p2.propose();
    let n = padded_last(referee.real_len());
    let mut rounds = 0;

    // Opens index `u` from both parties and settles forfeits.
    let open_both = |referee: &mut Referee, p1: &mut dyn Party, p2: &mut dyn Party, round: usize, u: usize| {
        let o1 = referee.open(p1, &c1, u);
        let o2 = referee.open(p2, &c2, u);
        let ok = |o: &Opened| matches!(o, Opened::Ok(e) if referee.entry_admissible(qry, u, e));
        let (ok1, ok2) = (ok(&o1), ok(&o2));
        let val = |o: &Opened| match o {
            Opened::Ok(e) => Some(e.value),
            Opened::Bad => None,
        };
        let (a1, a2) = (val(&o1), val(&o2));
        if !(ok1 && ok2) {
            let w = Winner::from_flags(ok1, ok2);
            referee.record(round, u, a1, a2, format!("forfeit:{}", serde_json::to_value(w).unwrap().as_str().unwrap()));
            return Err(finish(w, u, round, "opening failed verification or broke the input anchor"));
        }
        let (Opened::Ok(e1), Opened::Ok(e2)) = (o1, o2) else { unreachable!() };
        Ok((e1, e2))
    };

    let (top1, top2) = match open_both(referee, p1, p2, 0, n) {
        Ok(v) => v,
        Err(v) => return Ok(v),
    };
    if top1.same_as(&top2) {
        return Err(RefereeError::NoDispute);
    }
    let mut lo = 0usize;
    let mut hi = n;
    loop {
        // Establish agreement at `lo`.
        let (b1, b2) = match open_both(referee, p1, p2, rounds, lo) {
            Ok(v) => v,
            Err(v) => return Ok(v),
        };
        if !b1.same_as(&b2) {
            // Only reachable at index 0 (both anchored entries differ in
            // their prefix) or after a restart; both parties are bound to
            // the same empty prefix and the query, so the one deviating
            // from that loses.
            let ok1 = b1.prefix == empty_prefix() || lo > 0;
            let ok2 = b2.prefix == empty_prefix() || lo > 0;
            referee.record(rounds, lo, Some(b1.value), Some(b2.value), "base-mismatch");
            return Ok(finish(Winner::from_flags(ok1, ok2), lo, rounds, "entries differ at the agreed base"));
        }
        while hi > lo + 1 {
            rounds += 1;
            let u = lo + (hi - lo) / 2;
            let (e1, e2) = match open_both(referee, p1, p2, rounds, u) {
                Ok(v) => v,
                Err(v) => return Ok(v),
            };
            if e1.same_as(&e2) {
                lo = u;
                referee.record(rounds, u, Some(e1.value), Some(e2.value), "agree:k=u");
            } else {
                hi = u;
                referee.record(rounds, u, Some(e1.value), Some(e2.value), "differ:l=u");
            }
        }

        // Final step at adjacent (lo, hi).
        let (b1, b2) = match open_both(referee, p1, p2, rounds, lo) {
            Ok(v) => v,
            Err(v) => return Ok(v),
        };
        let (e1, e2) = match open_both(referee, p1, p2, rounds, hi) {
            Ok(v) => v,
            Err(v) => return Ok(v),
        };
        let r1 = referee.verify_step(p1, &c1, qry, &b1, hi, &e1);
        let r2 = referee.verify_step(p2, &c2, qry, &b2, hi, &e2);
        if let (Ok(par1), Ok(par2)) = (&r1, &r2) {
            // Both steps check out locally; if they used different parents,
            // one of them committed values its hash chain does not cover.
            if let Some(pos) = par1.iter().zip(par2).position(|(x, y)| !x.same_as(y)) {
                let j = arch.layer_offset(arch.locate(hi).unwrap().0 - 1) + pos;
                referee.record(rounds, j, Some(par1[pos].value), Some(par2[pos].value), "parents-differ:restart");
                hi = j;
                lo = 0;
                continue;
            }
        }
        let w = Winner::from_flags(r1.is_ok(), r2.is_ok());
        referee.record(rounds, hi, Some(e1.value), Some(e2.value), format!("final:{}", serde_json::to_value(w).unwrap().as_str().unwrap()));
        return Ok(finish(w, hi, rounds, "local check at the first divergent entry"));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merkle::VcParams;
    use crate::model::{Activation, OutputFn};
    use crate::protocol::ModelCommitment;

    fn setup() -> (Model, ModelCommitment, Vec<f32>) {
        let arch = Architecture::dense(&[2, 3, 2], Activation::Sigmoid, OutputFn::Identity).unwrap();
        let m = Model::random(&arch, 5);
        let cm = ModelCommitment {
            arch,
            weights: crate::merkle::commit_to_model(&VcParams::default(), &m).unwrap(),
        };
        (m, cm, vec![0.5, -0.25])
    }

    #[test]
    fn single_value_trace_entry() {
        let (entries, _) = build_hashed_trace(&[3.0]);
        assert_eq!(entries[0], HashedEntry { value: 3.0, prefix: empty_prefix() });
    }

    #[test]
    fn padding_and_chain() {
        let e = hashed_entries(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert_eq!(padded_last(7), 8);
        assert_eq!(e.len(), 9);
        assert_eq!(e[8].value, 0.0);
        for k in 1..e.len() {
            assert_eq!(e[k].prefix, chain(&e[k - 1].prefix, e[k - 1].value));
        }
    }

    #[test]
    fn honest_p1_beats_a_wrong_output() {
        let (m, cm, q) = setup();
        let mut p1 = TraceParty::honest(&m, &q).unwrap();
        let mut bad = m.eval_trace(&q).unwrap().values().to_vec();
        *bad.last_mut().unwrap() += 0.5;
        let mut p2 = TraceParty::with_values(&m, &bad);
        let mut referee = Referee::new(cm);
        let v = run_bisection(&mut p1, &mut p2, &mut referee, &q).unwrap();
        assert_eq!(v.winner, Winner::P1);
        assert_eq!(v.rounds, 3);
        assert_eq!(v.failing_index, 6);
    }

    #[test]
    fn input_corruption_loses_at_the_anchor() {
        let (m, cm, q) = setup();
        let mut bad = m.eval_trace(&q).unwrap().values().to_vec();
        bad[1] = 9.0;
        let mut p1 = TraceParty::with_values(&m, &bad);
        let mut p2 = TraceParty::honest(&m, &q).unwrap();
        let v = run_bisection(&mut p1, &mut p2, &mut Referee::new(cm), &q).unwrap();
        assert_eq!(v.winner, Winner::P2);
    }

    #[test]
    fn identical_claims_are_not_a_dispute() {
        let (m, cm, q) = setup();
        let mut p1 = TraceParty::honest(&m, &q).unwrap();
        let mut p2 = TraceParty::honest(&m, &q).unwrap();
        assert_eq!(
            run_bisection(&mut p1, &mut p2, &mut Referee::new(cm), &q).unwrap_err(),
            RefereeError::NoDispute
        );
    }

    #[test]
    fn log_has_one_record_per_round_and_serializes() {
        let (m, cm, q) = setup();
        let mut p1 = TraceParty::honest(&m, &q).unwrap();
        let mut bad = m.eval_trace(&q).unwrap().values().to_vec();
        bad[3] += 1.0;
        let mut p2 = TraceParty::with_values(&m, &bad);
        let mut referee = Referee::new(cm);
        let v = run_bisection(&mut p1, &mut p2, &mut referee, &q).unwrap();
        assert_eq!(v.winner, Winner::P1);
        let mut buf = Vec::new();
        referee.write_log(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), v.rounds + 1);
        assert!(text.lines().all(|l| serde_json::from_str::<LogRecord>(l).is_ok()));
    }
}
