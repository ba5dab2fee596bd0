//! Row-wise commitment for tensor traces.
//!
//! A matrix-multiplication layer contributes only its input activation matrix
//! (its output is determined by the input and the committed weights). An
//! element-wise layer contributes its output tensor. Every committed row is one
//! leaf; leaves are ordered layer-major then row-major.

use rayon::prelude::*;

use super::{leaf_hash, Commitment, MerkleTree, OpeningProof, VcError};

/// Dense row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor data does not match its shape");
        Self { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_bytes(&self, r: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.cols * 4);
        crate::codec::put_f32s(&mut out, self.row(r));
        out
    }

    pub fn byte_len(&self) -> usize {
        self.data.len() * 4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    MatMul,
    Elementwise,
}

/// One traced layer with its input and output activations.
#[derive(Debug, Clone, Copy)]
pub struct HybridLayer<'a> {
    pub kind: LayerKind,
    pub input: &'a Tensor,
    pub output: &'a Tensor,
}

impl<'a> HybridLayer<'a> {
    /// The tensor this layer contributes to the commitment.
    pub fn committed(&self) -> &'a Tensor {
        match self.kind {
            LayerKind::MatMul => self.input,
            LayerKind::Elementwise => self.output,
        }
    }
}

/// Which layer and row a leaf came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowLocation {
    pub layer: usize,
    pub row: usize,
}

#[derive(Debug, Clone)]
pub struct HybridCommitment {
    pub commitment: Commitment,
    pub rows: Vec<RowLocation>,
    tree: MerkleTree,
}

impl HybridCommitment {
    pub fn leaf_of(&self, layer: usize, row: usize) -> Option<usize> {
        self.rows.iter().position(|r| r.layer == layer && r.row == row)
    }

    /// Opens leaf `leaf`; `layers` must be the slice that was committed.
    pub fn open(&self, layers: &[HybridLayer<'_>], leaf: usize) -> Result<OpeningProof, VcError> {
        let loc = self.rows.get(leaf).ok_or(VcError::IndexOutOfRange {
            index: leaf,
            len: self.rows.len(),
        })?;
        let value = layers[loc.layer].committed().row_bytes(loc.row);
        self.tree.open(leaf, &value)
    }
}

pub fn commit_trace_hybrid(layers: &[HybridLayer<'_>]) -> Result<HybridCommitment, VcError> {
    if layers.is_empty() {
        return Err(VcError::Empty);
    }
    let mut rows = Vec::new();
    for (l, layer) in layers.iter().enumerate() {
        let t = layer.committed();
        if t.rows == 0 || t.cols == 0 {
            return Err(VcError::Empty);
        }
        rows.extend((0..t.rows).map(|row| RowLocation { layer: l, row }));
    }
    let leaves: Vec<_> = rows
        .par_iter()
        .enumerate()
        .map(|(i, loc)| leaf_hash(i, &layers[loc.layer].committed().row_bytes(loc.row)))
        .collect();
    let tree = MerkleTree::from_leaf_hashes(leaves)?;
    Ok(HybridCommitment {
        commitment: tree.commitment(),
        rows,
        tree,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{commit_vec, verify_opening, VcParams};
    use super::*;

    #[test]
    fn single_scalar_matches_commit_vec() {
        let t = Tensor::new(1, 1, vec![2.5]);
        let layer = HybridLayer {
            kind: LayerKind::Elementwise,
            input: &t,
            output: &t,
        };
        let hc = commit_trace_hybrid(&[layer]).unwrap();
        let flat = commit_vec(&VcParams::default(), &[2.5f32.to_le_bytes()]).unwrap();
        assert_eq!(hc.commitment, flat);
    }

    #[test]
    fn policy_selects_input_for_matmul_and_output_for_elementwise() {
        let x = Tensor::new(2, 3, vec![1.0; 6]);
        let y = Tensor::new(2, 3, vec![2.0; 6]);
        let mm = commit_trace_hybrid(&[HybridLayer {
            kind: LayerKind::MatMul,
            input: &x,
            output: &y,
        }])
        .unwrap();
        let ew = commit_trace_hybrid(&[HybridLayer {
            kind: LayerKind::Elementwise,
            input: &y,
            output: &x,
        }])
        .unwrap();
        assert_eq!(mm.commitment, ew.commitment);
    }

    #[test]
    fn rows_open_and_perturbation_changes_root() {
        let a = Tensor::new(3, 2, (0..6).map(|v| v as f32).collect());
        let b = Tensor::new(2, 2, vec![9.0; 4]);
        let layers = [
            HybridLayer {
                kind: LayerKind::MatMul,
                input: &a,
                output: &b,
            },
            HybridLayer {
                kind: LayerKind::Elementwise,
                input: &a,
                output: &b,
            },
        ];
        let hc = commit_trace_hybrid(&layers).unwrap();
        assert_eq!(hc.rows.len(), 5);
        assert_eq!(hc.leaf_of(1, 1), Some(4));
        let proof = hc.open(&layers, 4).unwrap();
        assert!(verify_opening(&VcParams::default(), &hc.commitment, 4, &b.row_bytes(1), &proof));

        let mut a2 = a.clone();
        a2.data[3] += 1e-3;
        let layers2 = [
            HybridLayer {
                kind: LayerKind::MatMul,
                input: &a2,
                output: &b,
            },
            layers[1],
        ];
        assert_ne!(commit_trace_hybrid(&layers2).unwrap().commitment, hc.commitment);
    }
}
