use std::ops::Range;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Dictionary, DictionaryKind, SignalTransform};
use crate::error::{arg_err, dim_err, Result};

/// Concatenation of orthonormal bases sharing one signal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct UnionDictionary {
    members: Vec<Dictionary>,
    offsets: Vec<Range<usize>>,
}

impl UnionDictionary {
    pub fn new(members: Vec<Dictionary>) -> Result<Self> {
        if members.len() < 2 {
            return arg_err("a union needs at least two member bases");
        }
        let n = members[0].dim();
        let mut offsets = Vec::with_capacity(members.len());
        let mut start = 0;
        for (i, m) in members.iter().enumerate() {
            if m.kind() != DictionaryKind::OrthonormalBasis {
                return arg_err(format!("member {i} is not an orthonormal basis"));
            }
            if m.dim() != n {
                return dim_err(format!("member {i} has dimension {}, expected {n}", m.dim()));
            }
            offsets.push(start..start + m.n_atoms());
            start += m.n_atoms();
        }
        Ok(Self { members, offsets })
    }

    pub fn members(&self) -> &[Dictionary] {
        &self.members
    }

    /// Atom-index range of each member.
    pub fn offsets(&self) -> &[Range<usize>] {
        &self.offsets
    }

    /// The concatenated `N x (D N)` dictionary.
    pub fn to_dictionary(&self) -> Dictionary {
        let n = self.members[0].dim();
        let k = self.offsets.last().map_or(0, |r| r.end);
        let mut atoms = DMatrix::zeros(n, k);
        for (m, r) in self.members.iter().zip(&self.offsets) {
            atoms.columns_mut(r.start, r.len()).copy_from(m.atoms());
        }
        Dictionary::from_parts_unchecked(atoms, DictionaryKind::UnionOfBases)
    }
}

impl SignalTransform for UnionDictionary {
    fn signal_len(&self) -> usize {
        self.members[0].dim()
    }

    fn coeff_len(&self) -> usize {
        self.offsets.last().map_or(0, |r| r.end)
    }

    fn analyze(&self, signal: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.coeff_len());
        for m in &self.members {
            out.extend(m.analyze(signal)?);
        }
        Ok(out)
    }

    fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.coeff_len() {
            return dim_err(format!(
                "coefficient length {} does not match union size {}",
                coeffs.len(),
                self.coeff_len()
            ));
        }
        let mut out = vec![0.0; self.signal_len()];
        for (m, r) in self.members.iter().zip(&self.offsets) {
            for (o, v) in out.iter_mut().zip(m.synthesize(&coeffs[r.clone()])?) {
                *o += v;
            }
        }
        Ok(out)
    }

    fn is_orthonormal(&self) -> bool {
        false
    }
}

/// Concatenation of arbitrary transforms acting on one signal length:
/// analysis stacks the member coefficients, synthesis sums the member
/// syntheses. The operator counterpart of [`UnionDictionary`].
#[derive(Clone)]
pub struct TransformUnion {
    members: Vec<Arc<dyn SignalTransform>>,
    offsets: Vec<Range<usize>>,
}

impl TransformUnion {
    pub fn new(members: Vec<Arc<dyn SignalTransform>>) -> Result<Self> {
        if members.len() < 2 {
            return arg_err("a union needs at least two members");
        }
        let n = members[0].signal_len();
        let mut offsets = Vec::with_capacity(members.len());
        let mut start = 0;
        for (i, m) in members.iter().enumerate() {
            if m.signal_len() != n {
                return dim_err(format!("member {i} acts on length {}, expected {n}", m.signal_len()));
            }
            offsets.push(start..start + m.coeff_len());
            start += m.coeff_len();
        }
        Ok(Self { members, offsets })
    }

    pub fn offsets(&self) -> &[Range<usize>] {
        &self.offsets
    }
}

impl SignalTransform for TransformUnion {
    fn signal_len(&self) -> usize {
        self.members[0].signal_len()
    }

    fn coeff_len(&self) -> usize {
        self.offsets.last().map_or(0, |r| r.end)
    }

    fn analyze(&self, signal: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.coeff_len());
        for m in &self.members {
            out.extend(m.analyze(signal)?);
        }
        Ok(out)
    }

    fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        if coeffs.len() != self.coeff_len() {
            return dim_err(format!(
                "coefficient length {} does not match union size {}",
                coeffs.len(),
                self.coeff_len()
            ));
        }
        let mut out = vec![0.0; self.signal_len()];
        for (m, r) in self.members.iter().zip(&self.offsets) {
            for (o, v) in out.iter_mut().zip(m.synthesize(&coeffs[r.clone()])?) {
                *o += v;
            }
        }
        Ok(out)
    }

    fn is_orthonormal(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::{dct_basis, dwt_basis, identity_basis, Wavelet};

    #[test]
    fn analysis_is_blockwise_concatenation() {
        let members = vec![
            dct_basis(8),
            dwt_basis(8, Wavelet::Haar, 3).unwrap(),
            identity_basis(8).unwrap(),
        ];
        let u = UnionDictionary::new(members.clone()).unwrap();
        let y: Vec<f64> = (0..8).map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64).collect();
        let a = u.analyze(&y).unwrap();
        assert_eq!(a.len(), 24);
        for (m, r) in members.iter().zip(u.offsets()) {
            assert_eq!(&a[r.clone()], m.analyze(&y).unwrap().as_slice());
        }
        let d = u.to_dictionary();
        assert_eq!(d.kind(), DictionaryKind::UnionOfBases);
        assert_eq!(d.analyze(&y).unwrap().len(), 24);
    }

    #[test]
    fn needs_two_matching_members() {
        assert!(UnionDictionary::new(vec![dct_basis(4)]).is_err());
        assert!(UnionDictionary::new(vec![dct_basis(4), dct_basis(8)]).is_err());
    }

    #[test]
    fn operator_union_matches_the_dense_union() {
        let members = vec![dct_basis(16), dwt_basis(16, Wavelet::Haar, 4).unwrap()];
        let dense = UnionDictionary::new(members.clone()).unwrap();
        let ops = TransformUnion::new(members.into_iter().map(|m| Arc::new(m) as Arc<dyn SignalTransform>).collect()).unwrap();
        let y: Vec<f64> = (0..16).map(|i| (i as f64 * 1.3).cos()).collect();
        let c: Vec<f64> = (0..32).map(|i| (i as f64 * 0.4).sin()).collect();
        assert_eq!(ops.coeff_len(), 32);
        assert_eq!(ops.analyze(&y).unwrap(), dense.analyze(&y).unwrap());
        assert_eq!(ops.synthesize(&c).unwrap(), dense.synthesize(&c).unwrap());
        assert!(ops.synthesize(&c[..31]).is_err());
        let short: Vec<Arc<dyn SignalTransform>> = vec![Arc::new(dct_basis(16)), Arc::new(dct_basis(8))];
        assert!(TransformUnion::new(short).is_err());
    }
}
