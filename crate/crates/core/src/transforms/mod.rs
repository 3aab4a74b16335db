//! Fixed analysis/synthesis dictionaries.
//!
//! A [`Dictionary`] stores its atoms explicitly as the columns of an `N x K`
//! matrix; analysis is `Phi^T y` and synthesis `Phi a`. Images are handled by
//! [`Separable2d`], which applies one dictionary along rows and another along
//! columns of a row-major image.

mod dct;
mod dwt;
mod separable;
mod union;

pub use dct::{dct_basis, overcomplete_dct};
pub use dwt::{dwt_basis, full_levels, Wavelet};
pub use separable::{matrix_to_row_major, row_major_to_matrix, Separable2d};
pub use union::{TransformUnion, UnionDictionary};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Result};
use crate::learn::BlockStructure;

/// Linear analysis/synthesis pair acting on flat signals.
pub trait SignalTransform: Send + Sync {
    /// Length of the signals the transform acts on.
    fn signal_len(&self) -> usize;
    /// Number of coefficients produced by analysis.
    fn coeff_len(&self) -> usize;
    fn analyze(&self, signal: &[f64]) -> Result<Vec<f64>>;
    fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>>;
    /// True when synthesis inverts analysis exactly.
    fn is_orthonormal(&self) -> bool;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryKind {
    OrthonormalBasis,
    UnionOfBases,
    Overcomplete,
    Learned,
}

/// `N x K` matrix of unit-norm atoms (one per column).
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    atoms: DMatrix<f64>,
    kind: DictionaryKind,
    blocks: Option<BlockStructure>,
}

const NORM_TOL: f64 = 1e-10;

impl Dictionary {
    /// Wraps `atoms` after checking the invariants of `kind`.
    pub fn new(atoms: DMatrix<f64>, kind: DictionaryKind) -> Result<Self> {
        if atoms.nrows() == 0 || atoms.ncols() == 0 {
            return dim_err("dictionary must have at least one atom of positive length");
        }
        for (j, col) in atoms.column_iter().enumerate() {
            let n = col.norm();
            if (n - 1.0).abs() > NORM_TOL {
                return arg_err(format!("atom {j} has norm {n}, expected 1"));
            }
        }
        if kind == DictionaryKind::OrthonormalBasis {
            if atoms.nrows() != atoms.ncols() {
                return arg_err("an orthonormal basis must be square");
            }
            let gram = atoms.transpose() * &atoms;
            let err = (gram - DMatrix::identity(atoms.ncols(), atoms.ncols())).amax();
            if err > NORM_TOL {
                return arg_err(format!("atoms are not orthonormal (max deviation {err:e})"));
            }
        }
        if kind == DictionaryKind::UnionOfBases && atoms.ncols() % atoms.nrows() != 0 {
            return arg_err("a union of bases must have a multiple of N atoms");
        }
        Ok(Self {
            atoms,
            kind,
            blocks: None,
        })
    }

    /// Builds a learned dictionary, normalizing every column.
    pub fn learned(mut atoms: DMatrix<f64>) -> Result<Self> {
        for (j, mut col) in atoms.column_iter_mut().enumerate() {
            let n = col.norm();
            if n == 0.0 || !n.is_finite() {
                return arg_err(format!("atom {j} has zero or non-finite norm"));
            }
            col /= n;
        }
        Self::new(atoms, DictionaryKind::Learned)
    }

    /// Attaches a block partition of the atoms.
    pub fn with_blocks(mut self, blocks: BlockStructure) -> Result<Self> {
        if blocks.n_atoms() != self.n_atoms() {
            return dim_err(format!(
                "block structure covers {} atoms, dictionary has {}",
                blocks.n_atoms(),
                self.n_atoms()
            ));
        }
        self.blocks = Some(blocks);
        Ok(self)
    }

    pub(crate) fn from_parts_unchecked(atoms: DMatrix<f64>, kind: DictionaryKind) -> Self {
        Self {
            atoms,
            kind,
            blocks: None,
        }
    }

    pub fn atoms(&self) -> &DMatrix<f64> {
        &self.atoms
    }

    pub fn kind(&self) -> DictionaryKind {
        self.kind
    }

    pub fn blocks(&self) -> Option<&BlockStructure> {
        self.blocks.as_ref()
    }

    /// Signal dimension `N`.
    pub fn dim(&self) -> usize {
        self.atoms.nrows()
    }

    /// Atom count `K`.
    pub fn n_atoms(&self) -> usize {
        self.atoms.ncols()
    }

    pub fn atom(&self, k: usize) -> Vec<f64> {
        self.atoms.column(k).iter().cloned().collect()
    }

    /// `Phi^T y`.
    pub fn analyze(&self, signal: &[f64]) -> Result<Vec<f64>> {
        if signal.len() != self.dim() {
            return dim_err(format!(
                "signal length {} does not match dictionary dimension {}",
                signal.len(),
                self.dim()
            ));
        }
        let y = DVector::from_column_slice(signal);
        Ok((self.atoms.tr_mul(&y)).as_slice().to_vec())
    }

    /// `Phi a`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.n_atoms() {
            return dim_err(format!(
                "coefficient length {} does not match atom count {}",
                coeffs.len(),
                self.n_atoms()
            ));
        }
        let a = DVector::from_column_slice(coeffs);
        Ok((&self.atoms * a).as_slice().to_vec())
    }
}

impl SignalTransform for Dictionary {
    fn signal_len(&self) -> usize {
        self.dim()
    }

    fn coeff_len(&self) -> usize {
        self.n_atoms()
    }

    fn analyze(&self, signal: &[f64]) -> Result<Vec<f64>> {
        Dictionary::analyze(self, signal)
    }

    fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        Dictionary::synthesize(self, coeffs)
    }

    fn is_orthonormal(&self) -> bool {
        self.kind == DictionaryKind::OrthonormalBasis
    }
}

/// Identity basis of size `n` (Dirac atoms).
pub fn identity_basis(n: usize) -> Result<Dictionary> {
    Dictionary::new(DMatrix::identity(n, n), DictionaryKind::OrthonormalBasis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_orthonormal(n: usize, seed: u64) -> Dictionary {
        let mut r = rng(seed);
        let m = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut r));
        let q = m.qr().q();
        Dictionary::new(q, DictionaryKind::OrthonormalBasis).unwrap()
    }

    #[test]
    fn analyze_atom_gives_unit_coordinate() {
        let d = dct_basis(8);
        let a = d.analyze(&d.atom(3)).unwrap();
        for (k, x) in a.iter().enumerate() {
            let want = if k == 3 { 1.0 } else { 0.0 };
            assert!((x - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_coefficients_synthesize_zero() {
        let d = overcomplete_dct(16, 32).unwrap();
        assert!(d.synthesize(&vec![0.0; 32]).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn random_basis_round_trip() {
        let d = random_orthonormal(12, 4);
        let mut r = rng(8);
        let y: Vec<f64> = (0..12).map(|_| StandardNormal.sample(&mut r)).collect();
        let back = d.synthesize(&d.analyze(&y).unwrap()).unwrap();
        let err: f64 = y.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err < 1e-10);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let d = dct_basis(4);
        assert!(d.analyze(&[1.0; 3]).is_err());
        assert!(d.synthesize(&[1.0; 5]).is_err());
    }

    #[test]
    fn constructor_checks_invariants() {
        let bad = DMatrix::from_element(2, 2, 1.0);
        assert!(Dictionary::new(bad, DictionaryKind::Overcomplete).is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[1.0, 0.6, 0.0, 0.8]);
        assert!(Dictionary::new(skew.clone(), DictionaryKind::Overcomplete).is_ok());
        assert!(Dictionary::new(skew, DictionaryKind::OrthonormalBasis).is_err());
    }
}
