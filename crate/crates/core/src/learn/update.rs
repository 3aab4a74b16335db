use nalgebra::DMatrix;

use super::{representation_error, BlockStructure, LearnState};
use crate::error::{dim_err, Result};
use crate::linalg::top_singular;
use crate::sparse::SparseCode;
use crate::transforms::Dictionary;

/// Minimum pairwise |cosine| a replacement atom may have with the others.
const DUPLICATE_COS: f64 = 0.999;

/// K-SVD dictionary update: one rank-1 SVD per atom, sweeping in order and
/// always using the coefficients produced by the preceding steps.
pub fn ksvd_update(state: &LearnState, signals: &DMatrix<f64>) -> Result<LearnState> {
    bksvd_update(state, signals, &BlockStructure::singletons(state.dict.n_atoms()))
}

/// Block K-SVD update: every block is replaced by the leading `|d_j|` left
/// singular vectors of the residual restricted to the signals that use it.
///
/// With all-singleton blocks this is exactly [`ksvd_update`].
pub fn bksvd_update(state: &LearnState, signals: &DMatrix<f64>, blocks: &BlockStructure) -> Result<LearnState> {
    let mut atoms = state.dict.atoms().clone();
    let mut code = state.code.clone();
    if signals.nrows() != atoms.nrows() || signals.ncols() != code.n_signals() {
        return dim_err("signals do not match the dictionary and code");
    }
    if blocks.n_atoms() != atoms.ncols() || code.n_atoms() != atoms.ncols() {
        return dim_err("block structure, code and dictionary disagree on the atom count");
    }
    let mut residual = signals - &atoms * code.coeffs();
    let signal_scale = signals.norm().max(f64::MIN_POSITIVE);
    let mut used_for_replacement = vec![false; signals.ncols()];

    for b in 0..blocks.n_blocks() {
        let block = blocks.block(b);
        let omega = block_support(&code, block);
        if omega.is_empty() {
            replace_unused(&mut atoms, block, &residual, signal_scale, &mut used_for_replacement);
            continue;
        }
        // restricted residual with the block's own contribution added back
        let mut restricted = DMatrix::zeros(atoms.nrows(), omega.len());
        for (c, &j) in omega.iter().enumerate() {
            let mut col = residual.column(j).into_owned();
            for &a in block {
                let x = code.coeffs()[(a, j)];
                if x != 0.0 {
                    col.axpy(x, &atoms.column(a), 1.0);
                }
            }
            restricted.set_column(c, &col);
        }
        let (u, sigma, v) = top_singular(&restricted, block.len());
        for (i, &a) in block.iter().enumerate() {
            let row: Vec<f64> = if i < sigma.len() {
                atoms.set_column(a, &u.column(i));
                (0..omega.len()).map(|c| sigma[i] * v[(c, i)]).collect()
            } else {
                vec![0.0; omega.len()]
            };
            code.set_row_on(a, &omega, &row);
        }
        for (c, &j) in omega.iter().enumerate() {
            let mut col = restricted.column(c).into_owned();
            for &a in block {
                let x = code.coeffs()[(a, j)];
                if x != 0.0 {
                    col.axpy(-x, &atoms.column(a), 1.0);
                }
            }
            residual.set_column(j, &col);
        }
    }

    let dict = Dictionary::learned(atoms)?;
    let objective = representation_error(dict.atoms(), code.coeffs(), signals);
    Ok(LearnState {
        dict,
        code,
        iteration: state.iteration,
        objective,
    })
}

fn block_support(code: &SparseCode, block: &[usize]) -> Vec<usize> {
    let c = code.coeffs();
    (0..code.n_signals())
        .filter(|&j| block.iter().any(|&a| c[(a, j)] != 0.0))
        .collect()
}

/// Replaces unused atoms with the worst-represented signals (normalized),
/// skipping candidates that would duplicate an existing atom.
fn replace_unused(
    atoms: &mut DMatrix<f64>,
    block: &[usize],
    residual: &DMatrix<f64>,
    signal_scale: f64,
    used: &mut [bool],
) {
    let mut order: Vec<(usize, f64)> = residual
        .column_iter()
        .enumerate()
        .map(|(j, c)| (j, c.norm_squared()))
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut cursor = 0;
    for &a in block {
        while cursor < order.len() {
            let (j, e) = order[cursor];
            cursor += 1;
            if used[j] || e.sqrt() <= 1e-12 * signal_scale {
                continue;
            }
            let cand = residual.column(j) / e.sqrt();
            let duplicate = (0..atoms.ncols())
                .filter(|&i| i != a)
                .any(|i| atoms.column(i).dot(&cand).abs() >= DUPLICATE_COS);
            if duplicate {
                continue;
            }
            atoms.set_column(a, &cand);
            used[j] = true;
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::rng;
    use crate::sparse::{sparse_code, PursuitLimits, SparseColumn};
    use rand_distr::{Distribution, StandardNormal};

    fn random_dict(n: usize, k: usize, seed: u64) -> Dictionary {
        let mut r = rng(seed);
        Dictionary::learned(DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut r))).unwrap()
    }

    #[test]
    fn single_atom_signal_is_a_fixed_point() {
        let d = random_dict(6, 4, 1);
        let y = d.atoms().columns(2, 1).into_owned() * 3.0;
        let code = SparseCode::from_columns(
            4,
            &[SparseColumn {
                support: vec![2],
                values: vec![3.0],
            }],
        )
        .unwrap();
        let s = LearnState::new(d.clone(), code, &y);
        let out = ksvd_update(&s, &y).unwrap();
        let before = d.atoms().column(2);
        let after = out.dict.atoms().column(2);
        assert!((before.dot(&after).abs() - 1.0).abs() < 1e-12);
        assert!(out.objective < 1e-12);
    }

    #[test]
    fn rank_one_restricted_residual_is_fit_exactly() {
        // signals that use atom 0 lie on one direction, so the update is exact
        let d = random_dict(5, 3, 2);
        let dir: Vec<f64> = vec![0.3, -0.2, 0.9, 0.1, 0.2];
        let y = DMatrix::from_fn(5, 4, |i, j| dir[i] * (j as f64 + 1.0));
        let cols: Vec<SparseColumn> = (0..4)
            .map(|j| SparseColumn {
                support: vec![0],
                values: vec![0.5 * j as f64 + 0.1],
            })
            .collect();
        let s = LearnState::new(d, SparseCode::from_columns(3, &cols).unwrap(), &y);
        let out = ksvd_update(&s, &y).unwrap();
        assert!(out.objective < 1e-10);
    }

    #[test]
    fn block_update_on_rank_s_residual_is_exact() {
        let d = random_dict(6, 6, 3);
        let mut r = rng(4);
        let basis = DMatrix::<f64>::from_fn(6, 2, |_, _| StandardNormal.sample(&mut r));
        let mix = DMatrix::<f64>::from_fn(2, 10, |_, _| StandardNormal.sample(&mut r));
        let y = &basis * mix;
        let blocks = BlockStructure::from_blocks(6, vec![vec![0, 1], vec![2, 3], vec![4, 5]], 2).unwrap();
        let code = sparse_code(d.atoms(), Some(&blocks), &y, PursuitLimits::sparsity(1)).unwrap();
        // force every signal onto block 0
        let mut dense = DMatrix::zeros(6, 10);
        for j in 0..10 {
            dense[(0, j)] = 1.0 + j as f64 * 0.1;
            dense[(1, j)] = 0.5 - j as f64 * 0.2;
        }
        let _ = code;
        let s = LearnState::new(d, SparseCode::from_dense(dense), &y);
        let out = bksvd_update(&s, &y, &blocks).unwrap();
        assert!(out.objective < 1e-9, "objective {}", out.objective);
    }

    #[test]
    fn updates_never_increase_the_objective() {
        for seed in 0..10 {
            let d = random_dict(8, 12, seed);
            let mut r = rng(100 + seed);
            let y = DMatrix::from_fn(8, 40, |_, _| StandardNormal.sample(&mut r));
            let blocks = BlockStructure::from_blocks(
                12,
                (0..4).map(|b| vec![3 * b, 3 * b + 1, 3 * b + 2]).collect(),
                3,
            )
            .unwrap();
            let code = sparse_code(d.atoms(), None, &y, PursuitLimits::sparsity(2)).unwrap();
            let s = LearnState::new(d.clone(), code, &y);
            let k = ksvd_update(&s, &y).unwrap();
            assert!(k.objective <= s.objective + 1e-10);
            let bcode = sparse_code(d.atoms(), Some(&blocks), &y, PursuitLimits::sparsity(1)).unwrap();
            let bs = LearnState::new(d, bcode, &y);
            let b = bksvd_update(&bs, &y, &blocks).unwrap();
            assert!(b.objective <= bs.objective + 1e-10);
            for c in b.dict.atoms().column_iter() {
                assert!((c.norm() - 1.0).abs() < 1e-10);
            }
            assert!(b.code.is_consistent());
        }
    }

    #[test]
    fn unused_atoms_are_replaced_without_duplicates() {
        let d = random_dict(6, 8, 9);
        let mut r = rng(10);
        let y = DMatrix::from_fn(6, 30, |_, _| StandardNormal.sample(&mut r));
        // only atoms 0 and 1 are used
        let mut dense = DMatrix::zeros(8, 30);
        for j in 0..30 {
            dense[(j % 2, j)] = 0.1;
        }
        let s = LearnState::new(d.clone(), SparseCode::from_dense(dense), &y);
        let out = ksvd_update(&s, &y).unwrap();
        assert!(out.objective <= s.objective + 1e-12);
        for a in 2..8 {
            assert_ne!(out.dict.atoms().column(a), d.atoms().column(a));
        }
        let g = out.dict.atoms().transpose() * out.dict.atoms();
        for i in 0..8 {
            for j in 0..i {
                assert!(g[(i, j)].abs() < DUPLICATE_COS);
            }
        }
    }
}
