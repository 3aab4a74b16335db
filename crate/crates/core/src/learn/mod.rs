//! Dictionary learning: K-SVD, sparse agglomerative clustering (SAC) of the
//! atoms into blocks, and block K-SVD.

mod complexity;
mod driver;
mod sac;
mod update;

pub use complexity::{complexity_report, ComplexityReport};
pub use driver::{learn_dictionary, learn_round, DictionaryInit, LearnMethod, LearnOutcome, LearnParams};
pub use sac::sac_cluster;
pub use update::{bksvd_update, ksvd_update};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::linalg::frobenius;
use crate::sparse::SparseCode;
use crate::transforms::Dictionary;

/// Partition of the atom indices `0..K` into blocks of at most
/// `max_block_size` atoms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    block_of: Vec<usize>,
    blocks: Vec<Vec<usize>>,
    max_block_size: usize,
}

impl BlockStructure {
    /// Every atom in its own block.
    pub fn singletons(k: usize) -> Self {
        Self {
            block_of: (0..k).collect(),
            blocks: (0..k).map(|a| vec![a]).collect(),
            max_block_size: 1,
        }
    }

    pub fn from_blocks(k: usize, mut blocks: Vec<Vec<usize>>, max_block_size: usize) -> Result<Self> {
        if max_block_size == 0 {
            return arg_err("maximal block size must be at least 1");
        }
        let mut block_of = vec![usize::MAX; k];
        for (b, atoms) in blocks.iter_mut().enumerate() {
            atoms.sort_unstable();
            if atoms.is_empty() || atoms.len() > max_block_size {
                return arg_err(format!(
                    "block {b} has {} atoms, allowed 1..={max_block_size}",
                    atoms.len()
                ));
            }
            for &a in atoms.iter() {
                if a >= k || block_of[a] != usize::MAX {
                    return arg_err(format!("atom {a} is out of range or in two blocks"));
                }
                block_of[a] = b;
            }
        }
        if let Some(a) = block_of.iter().position(|&b| b == usize::MAX) {
            return arg_err(format!("atom {a} is not assigned to a block"));
        }
        Ok(Self {
            block_of,
            blocks,
            max_block_size,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.block_of.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, b: usize) -> &[usize] {
        &self.blocks[b]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn block_of(&self, atom: usize) -> usize {
        self.block_of[atom]
    }

    pub fn max_block_size(&self) -> usize {
        self.max_block_size
    }

    /// Number of distinct blocks touched by a support, `||x||_{0,d}`.
    pub fn block_sparsity(&self, support: &[usize]) -> usize {
        let mut seen: Vec<usize> = support.iter().map(|&a| self.block_of[a]).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }
}

/// Dictionary, code and representation error of a learning run.
#[derive(Debug, Clone)]
pub struct LearnState {
    pub dict: Dictionary,
    pub code: SparseCode,
    pub iteration: usize,
    /// `||Y - Phi X||_F`.
    pub objective: f64,
}

impl LearnState {
    pub fn new(dict: Dictionary, code: SparseCode, signals: &DMatrix<f64>) -> Self {
        let objective = representation_error(dict.atoms(), code.coeffs(), signals);
        Self {
            dict,
            code,
            iteration: 0,
            objective,
        }
    }
}

pub fn representation_error(atoms: &DMatrix<f64>, coeffs: &DMatrix<f64>, signals: &DMatrix<f64>) -> f64 {
    frobenius(&(signals - atoms * coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_validation() {
        assert!(BlockStructure::from_blocks(4, vec![vec![0, 2], vec![1, 3]], 2).is_ok());
        assert!(BlockStructure::from_blocks(4, vec![vec![0, 2], vec![1]], 2).is_err());
        assert!(BlockStructure::from_blocks(4, vec![vec![0, 2, 1], vec![3]], 2).is_err());
        assert!(BlockStructure::from_blocks(3, vec![vec![0, 1], vec![1, 2]], 2).is_err());
        let b = BlockStructure::from_blocks(4, vec![vec![2, 0], vec![1, 3]], 2).unwrap();
        assert_eq!(b.block(0), &[0, 2]);
        assert_eq!(b.block_sparsity(&[0, 2]), 1);
        assert_eq!(b.block_sparsity(&[0, 1]), 2);
    }
}
