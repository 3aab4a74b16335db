//! Greedy pursuits: orthogonal matching pursuit over atoms and over blocks.
//!
//! Both share one engine. Each round picks the group (a single atom, or a
//! block of atoms) whose correlations with the residual have the largest
//! energy, lowest index on ties, then refits all selected atoms by least
//! squares through an incrementally built QR factorization.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::code::{SparseCode, SparseColumn};
use crate::error::{arg_err, dim_err, Error, Result};
use crate::learn::BlockStructure;
use crate::transforms::Dictionary;

/// Stopping rule for [`omp`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmpStop {
    MaxAtoms(usize),
    ResidualNorm(f64),
}

/// Limits shared by the atom and block pursuits: at most `max_groups`
/// selections, stopping early once the residual norm reaches
/// `residual_norm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PursuitLimits {
    pub max_groups: usize,
    pub residual_norm: Option<f64>,
}

impl PursuitLimits {
    pub fn sparsity(k: usize) -> Self {
        Self {
            max_groups: k,
            residual_norm: None,
        }
    }
}

enum Groups<'a> {
    Atoms(usize),
    Blocks(&'a BlockStructure),
}

impl Groups<'_> {
    fn count(&self) -> usize {
        match self {
            Groups::Atoms(k) => *k,
            Groups::Blocks(b) => b.n_blocks(),
        }
    }

    fn members(&self, g: usize) -> GroupIter<'_> {
        match self {
            Groups::Atoms(_) => GroupIter::One(Some(g)),
            Groups::Blocks(b) => GroupIter::Many(b.block(g).iter()),
        }
    }
}

enum GroupIter<'a> {
    One(Option<usize>),
    Many(std::slice::Iter<'a, usize>),
}

impl Iterator for GroupIter<'_> {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        match self {
            GroupIter::One(x) => x.take(),
            GroupIter::Many(it) => it.next().copied(),
        }
    }
}

const RANK_TOL: f64 = 1e-10;

fn greedy(atoms: &DMatrix<f64>, groups: Groups<'_>, y: &[f64], limits: PursuitLimits) -> Result<SparseColumn> {
    let n = atoms.nrows();
    if y.len() != n {
        return dim_err(format!("signal length {} does not match dictionary dimension {n}", y.len()));
    }
    let yv = DVector::from_column_slice(y);
    let ynorm = yv.norm();
    let target = limits.residual_norm.unwrap_or(0.0);
    if ynorm == 0.0 || ynorm <= target || limits.max_groups == 0 {
        return Ok(SparseColumn::default());
    }

    let mut q: Vec<DVector<f64>> = Vec::new();
    // R stored column by column (upper triangular).
    let mut r_cols: Vec<Vec<f64>> = Vec::new();
    let mut z: Vec<f64> = Vec::new();
    let mut selected_atoms: Vec<usize> = Vec::new();
    let mut chosen = vec![false; groups.count()];
    let mut residual = yv.clone();
    let stall = (1e-14 * ynorm).powi(2);

    for _ in 0..limits.max_groups {
        let corr = atoms.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for g in 0..groups.count() {
            if chosen[g] {
                continue;
            }
            let score: f64 = groups.members(g).map(|a| corr[a] * corr[a]).sum();
            if best.map_or(true, |(_, s)| score > s) {
                best = Some((g, score));
            }
        }
        let Some((g, score)) = best else { break };
        if score <= stall {
            break;
        }
        chosen[g] = true;
        for a in groups.members(g) {
            let atom = atoms.column(a).into_owned();
            let anorm = atom.norm();
            let mut v = atom.clone();
            let mut rcol = vec![0.0; q.len() + 1];
            // two Gram-Schmidt passes
            for _ in 0..2 {
                for (i, qi) in q.iter().enumerate() {
                    let c = qi.dot(&v);
                    rcol[i] += c;
                    v.axpy(-c, qi, 1.0);
                }
            }
            let vn = v.norm();
            if !(vn > RANK_TOL * anorm.max(f64::MIN_POSITIVE)) {
                let mut bad = selected_atoms.clone();
                bad.push(a);
                return Err(Error::RankDeficientSupport { atoms: bad });
            }
            v /= vn;
            rcol[q.len()] = vn;
            let zi = v.dot(&yv);
            residual.axpy(-zi, &v, 1.0);
            z.push(zi);
            q.push(v);
            r_cols.push(rcol);
            selected_atoms.push(a);
        }
        if residual.norm() <= target {
            break;
        }
    }

    // back substitution R c = z
    let s = selected_atoms.len();
    let mut c = vec![0.0; s];
    for i in (0..s).rev() {
        let mut acc = z[i];
        for j in i + 1..s {
            acc -= r_cols[j][i] * c[j];
        }
        c[i] = acc / r_cols[i][i];
    }
    let mut pairs: Vec<(usize, f64)> = selected_atoms.into_iter().zip(c).collect();
    pairs.sort_by_key(|p| p.0);
    Ok(SparseColumn {
        support: pairs.iter().map(|p| p.0).collect(),
        values: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Orthogonal matching pursuit over the atoms of `atoms`.
pub fn omp_with(atoms: &DMatrix<f64>, y: &[f64], limits: PursuitLimits) -> Result<SparseColumn> {
    let limits = PursuitLimits {
        max_groups: limits.max_groups.min(atoms.ncols()),
        ..limits
    };
    greedy(atoms, Groups::Atoms(atoms.ncols()), y, limits)
}

/// Block orthogonal matching pursuit: selects whole blocks of `blocks`.
pub fn block_omp_with(
    atoms: &DMatrix<f64>,
    blocks: &BlockStructure,
    y: &[f64],
    limits: PursuitLimits,
) -> Result<SparseColumn> {
    if blocks.n_atoms() != atoms.ncols() {
        return dim_err(format!(
            "block structure covers {} atoms, dictionary has {}",
            blocks.n_atoms(),
            atoms.ncols()
        ));
    }
    greedy(atoms, Groups::Blocks(blocks), y, limits)
}

/// OMP with either an atom budget or a residual-norm target.
pub fn omp(dict: &Dictionary, y: &[f64], stop: OmpStop) -> Result<SparseColumn> {
    let limits = match stop {
        OmpStop::MaxAtoms(k) => PursuitLimits::sparsity(k),
        OmpStop::ResidualNorm(eps) => {
            if !(eps >= 0.0) {
                return arg_err(format!("residual target must be nonnegative, got {eps}"));
            }
            PursuitLimits {
                max_groups: dict.dim().min(dict.n_atoms()),
                residual_norm: Some(eps),
            }
        }
    };
    omp_with(dict.atoms(), y, limits)
}

/// Block OMP over the dictionary's attached block structure, keeping at most
/// `k_blocks` blocks active.
pub fn block_omp(dict: &Dictionary, y: &[f64], k_blocks: usize) -> Result<SparseColumn> {
    let Some(blocks) = dict.blocks() else {
        return arg_err("block OMP needs a dictionary with a block structure");
    };
    if k_blocks == 0 {
        return arg_err("k_blocks must be at least 1");
    }
    block_omp_with(dict.atoms(), blocks, y, PursuitLimits::sparsity(k_blocks))
}

/// Codes every column of `signals` (in parallel); with `blocks` the block
/// pursuit is used.
pub fn sparse_code(
    atoms: &DMatrix<f64>,
    blocks: Option<&BlockStructure>,
    signals: &DMatrix<f64>,
    limits: PursuitLimits,
) -> Result<SparseCode> {
    let cols: Vec<SparseColumn> = (0..signals.ncols())
        .into_par_iter()
        .map(|j| {
            let y: Vec<f64> = signals.column(j).iter().cloned().collect();
            match blocks {
                Some(b) => block_omp_with(atoms, b, &y, limits),
                None => omp_with(atoms, &y, limits),
            }
        })
        .collect::<Result<_>>()?;
    SparseCode::from_columns(atoms.ncols(), &cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::rng;
    use crate::transforms::{dct_basis, Dictionary};
    use rand_distr::{Distribution, StandardNormal};

    fn random_dict(n: usize, k: usize, seed: u64) -> Dictionary {
        let mut r = rng(seed);
        Dictionary::learned(DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut r))).unwrap()
    }

    fn residual(d: &DMatrix<f64>, y: &[f64], c: &SparseColumn) -> DVector<f64> {
        let x = DVector::from_vec(c.to_dense(d.ncols()));
        DVector::from_column_slice(y) - d * x
    }

    #[test]
    fn scaled_basis_atom() {
        let d = dct_basis(8);
        let y: Vec<f64> = d.atom(5).iter().map(|v| 2.0 * v).collect();
        let c = omp(&d, &y, OmpStop::MaxAtoms(1)).unwrap();
        assert_eq!(c.support, vec![5]);
        assert!((c.values[0] - 2.0).abs() < 1e-12);
        assert!(residual(d.atoms(), &y, &c).norm() < 1e-12);
    }

    #[test]
    fn zero_signal_has_empty_support() {
        let d = random_dict(8, 12, 1);
        assert!(omp(&d, &[0.0; 8], OmpStop::MaxAtoms(3)).unwrap().is_empty());
    }

    #[test]
    fn residual_is_orthogonal_to_selection() {
        let d = random_dict(8, 12, 2);
        let y: Vec<f64> = (0..8).map(|i| (i as f64).cos()).collect();
        let c = omp(&d, &y, OmpStop::MaxAtoms(4)).unwrap();
        let r = residual(d.atoms(), &y, &c);
        for &a in &c.support {
            assert!(d.atoms().column(a).dot(&r).abs() < 1e-8);
        }
    }

    #[test]
    fn residual_target_stops_early() {
        let d = random_dict(8, 12, 3);
        let y: Vec<f64> = (0..8).map(|i| (i as f64 * 0.3).sin()).collect();
        let yn = DVector::from_column_slice(&y).norm();
        let c = omp(&d, &y, OmpStop::ResidualNorm(0.5 * yn)).unwrap();
        assert!(residual(d.atoms(), &y, &c).norm() <= 0.5 * yn + 1e-12);
        let c_all = omp(&d, &y, OmpStop::MaxAtoms(8)).unwrap();
        assert!(c.len() <= c_all.len());
    }

    #[test]
    fn duplicate_atom_in_block_is_rank_deficient() {
        let mut m = random_dict(6, 4, 4).atoms().clone();
        let c0 = m.column(0).into_owned();
        m.set_column(1, &c0);
        let blocks = BlockStructure::from_blocks(4, vec![vec![0, 1], vec![2], vec![3]], 2).unwrap();
        let y: Vec<f64> = c0.iter().cloned().collect();
        match block_omp_with(&m, &blocks, &y, PursuitLimits::sparsity(1)) {
            Err(Error::RankDeficientSupport { atoms }) => assert_eq!(atoms, vec![0, 1]),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn block_spanned_signal_selects_that_block() {
        let d = random_dict(8, 12, 5);
        let blocks = BlockStructure::from_blocks(
            12,
            vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8], vec![9, 10, 11]],
            3,
        )
        .unwrap();
        let y: Vec<f64> = (0..8)
            .map(|i| 1.5 * d.atoms()[(i, 6)] - 0.7 * d.atoms()[(i, 7)] + 0.2 * d.atoms()[(i, 8)])
            .collect();
        let c = block_omp_with(d.atoms(), &blocks, &y, PursuitLimits::sparsity(1)).unwrap();
        assert_eq!(c.support, vec![6, 7, 8]);
        assert!(residual(d.atoms(), &y, &c).norm() < 1e-10);
        let dict = d.clone().with_blocks(blocks).unwrap();
        assert_eq!(block_omp(&dict, &y, 1).unwrap(), c);
    }
}
