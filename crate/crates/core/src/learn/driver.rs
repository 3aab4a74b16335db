use nalgebra::DMatrix;
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bksvd_update, sac_cluster, BlockStructure, LearnState};
use crate::error::{arg_err, dim_err, Result};
use crate::mixing::rng;
use crate::sparse::{sparse_code, PursuitLimits, SparseCode};
use crate::transforms::{overcomplete_dct, Dictionary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LearnMethod {
    #[default]
    Ksvd,
    SacBksvd,
}

/// Starting dictionary for [`learn_dictionary`].
#[derive(Debug, Clone, Default)]
pub enum DictionaryInit {
    #[default]
    OvercompleteDct,
    /// `K` distinct nonzero training columns, normalized.
    TrainingColumns { seed: u64 },
    Given(Dictionary),
}

#[derive(Debug, Clone)]
pub struct LearnParams {
    pub n_atoms: usize,
    /// Atoms per signal for K-SVD, blocks per signal for block K-SVD.
    pub sparsity: usize,
    pub block_size: usize,
    pub iterations: usize,
    /// Per-signal residual norm at which pursuit may stop early.
    pub residual_target: Option<f64>,
    pub init: DictionaryInit,
}

impl LearnParams {
    pub fn new(n_atoms: usize, sparsity: usize, block_size: usize, iterations: usize) -> Self {
        Self {
            n_atoms,
            sparsity,
            block_size,
            iterations,
            residual_target: None,
            init: DictionaryInit::default(),
        }
    }

    pub(crate) fn limits(&self) -> PursuitLimits {
        PursuitLimits {
            max_groups: self.sparsity,
            residual_norm: self.residual_target,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub state: LearnState,
    pub blocks: BlockStructure,
    /// Objective of the initial code, then one entry per round.
    pub trace: Vec<f64>,
}

/// Alternates sparse coding and dictionary updates for `params.iterations`
/// rounds, starting from the OMP code of the initial dictionary.
pub fn learn_dictionary(signals: &DMatrix<f64>, method: LearnMethod, params: &LearnParams) -> Result<LearnOutcome> {
    let n = signals.nrows();
    if params.iterations == 0 {
        return arg_err("iterations must be at least 1");
    }
    if params.n_atoms < n {
        return arg_err(format!("dictionary size {} is below the signal dimension {n}", params.n_atoms));
    }
    if params.sparsity == 0 || params.block_size == 0 {
        return arg_err("sparsity and block size must be at least 1");
    }
    let dict = initial_dictionary(signals, params)?;
    let code = sparse_code(dict.atoms(), None, signals, params.limits())?;
    let mut state = LearnState::new(dict, code, signals);
    let mut trace = vec![state.objective];
    let mut blocks = BlockStructure::singletons(params.n_atoms);
    for _ in 0..params.iterations {
        let (next, b) = learn_round(&state, signals, method, params.block_size, params.limits())?;
        state = next;
        blocks = b;
        trace.push(state.objective);
    }
    Ok(LearnOutcome { state, blocks, trace })
}

fn initial_dictionary(signals: &DMatrix<f64>, params: &LearnParams) -> Result<Dictionary> {
    let (n, l) = signals.shape();
    let dict = match &params.init {
        DictionaryInit::OvercompleteDct => {
            let d = overcomplete_dct(n, params.n_atoms)?;
            Dictionary::learned(d.atoms().clone())?
        }
        DictionaryInit::TrainingColumns { seed } => {
            let candidates: Vec<usize> = (0..l).filter(|&j| signals.column(j).norm() > 0.0).collect();
            if candidates.len() < params.n_atoms {
                return arg_err(format!(
                    "{} nonzero training columns cannot seed {} atoms",
                    candidates.len(),
                    params.n_atoms
                ));
            }
            let picks = sample(&mut rng(*seed), candidates.len(), params.n_atoms);
            let mut atoms = DMatrix::zeros(n, params.n_atoms);
            for (a, p) in picks.iter().enumerate() {
                atoms.set_column(a, &signals.column(candidates[p]));
            }
            Dictionary::learned(atoms)?
        }
        DictionaryInit::Given(d) => {
            if d.dim() != n || d.n_atoms() != params.n_atoms {
                return dim_err("initial dictionary does not match the signals and atom count");
            }
            Dictionary::learned(d.atoms().clone())?
        }
    };
    Ok(dict)
}

/// One coding plus update round. Returns the new state and the block
/// structure used for it.
///
/// A signal keeps its previous coefficients when they still satisfy the
/// sparsity limit and fit better than the fresh pursuit, so the objective
/// never increases for K-SVD.
pub fn learn_round(
    state: &LearnState,
    signals: &DMatrix<f64>,
    method: LearnMethod,
    block_size: usize,
    limits: PursuitLimits,
) -> Result<(LearnState, BlockStructure)> {
    let k = state.dict.n_atoms();
    let blocks = match method {
        LearnMethod::Ksvd => BlockStructure::singletons(k),
        LearnMethod::SacBksvd => sac_cluster(&state.code, block_size)?,
    };
    let singletons = blocks.n_blocks() == k;
    let fresh = sparse_code(
        state.dict.atoms(),
        if singletons { None } else { Some(&blocks) },
        signals,
        limits,
    )?;
    let code = keep_better(state.dict.atoms(), &blocks, signals, &state.code, fresh, limits.max_groups);
    let coded = LearnState {
        dict: state.dict.clone(),
        code,
        iteration: state.iteration + 1,
        objective: f64::NAN,
    };
    Ok((bksvd_update(&coded, signals, &blocks)?, blocks))
}

fn keep_better(
    atoms: &DMatrix<f64>,
    blocks: &BlockStructure,
    signals: &DMatrix<f64>,
    old: &SparseCode,
    fresh: SparseCode,
    max_groups: usize,
) -> SparseCode {
    let keep: Vec<bool> = (0..signals.ncols())
        .into_par_iter()
        .map(|j| {
            let support = &old.supports()[j];
            if blocks.block_sparsity(support) > max_groups {
                return false;
            }
            let y = signals.column(j);
            let r_old = (y - atoms * old.coeffs().column(j)).norm_squared();
            let r_new = (y - atoms * fresh.coeffs().column(j)).norm_squared();
            r_old < r_new
        })
        .collect();
    let mut code = fresh;
    for (j, _) in keep.iter().enumerate().filter(|(_, k)| **k) {
        code.set_column(j, &old.column(j)).expect("same dimensions");
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::ksvd_update;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn sparse_signals(n: usize, k_atoms: usize, l: usize, k: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
        let mut r = rng(seed);
        let truth = Dictionary::learned(DMatrix::from_fn(n, k_atoms, |_, _| StandardNormal.sample(&mut r)))
            .unwrap()
            .atoms()
            .clone();
        let mut x = DMatrix::zeros(k_atoms, l);
        for j in 0..l {
            for a in sample(&mut r, k_atoms, k).iter() {
                let v: f64 = StandardNormal.sample(&mut r);
                x[(a, j)] = v.signum() * (1.0 + v.abs());
            }
        }
        (&truth * x, truth)
    }

    #[test]
    fn zero_iterations_rejected() {
        let (y, _) = sparse_signals(4, 6, 20, 1, 0);
        assert!(learn_dictionary(&y, LearnMethod::Ksvd, &LearnParams::new(6, 1, 1, 0)).is_err());
        assert!(learn_dictionary(&y, LearnMethod::Ksvd, &LearnParams::new(3, 1, 1, 1)).is_err());
    }

    #[test]
    fn single_round_does_not_increase_the_objective() {
        let (y, _) = sparse_signals(16, 24, 100, 3, 1);
        let out = learn_dictionary(&y, LearnMethod::Ksvd, &LearnParams::new(24, 3, 1, 1)).unwrap();
        assert_eq!(out.trace.len(), 2);
        assert!(out.trace[1] <= out.trace[0] + 1e-12);
    }

    #[test]
    fn ksvd_trace_is_monotone() {
        let (y, _) = sparse_signals(16, 24, 150, 3, 2);
        let out = learn_dictionary(&y, LearnMethod::Ksvd, &LearnParams::new(24, 3, 1, 12)).unwrap();
        for w in out.trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", out.trace);
        }
    }

    #[test]
    fn block_size_one_reproduces_ksvd() {
        let (y, _) = sparse_signals(16, 20, 120, 2, 3);
        let p = LearnParams::new(20, 2, 1, 6);
        let a = learn_dictionary(&y, LearnMethod::Ksvd, &p).unwrap();
        let b = learn_dictionary(&y, LearnMethod::SacBksvd, &p).unwrap();
        for (x, z) in a.trace.iter().zip(&b.trace) {
            assert!((x - z).abs() <= 1e-9);
        }
        assert_eq!(a.state.dict.atoms(), b.state.dict.atoms());
    }

    #[test]
    fn ksvd_update_matches_round_update() {
        let (y, _) = sparse_signals(9, 12, 60, 2, 4);
        let d = Dictionary::learned(overcomplete_dct(9, 12).unwrap().atoms().clone()).unwrap();
        let code = sparse_code(d.atoms(), None, &y, PursuitLimits::sparsity(2)).unwrap();
        let s = LearnState::new(d, code, &y);
        let direct = ksvd_update(&s, &y).unwrap();
        let (round, _) = learn_round(&s, &y, LearnMethod::Ksvd, 1, PursuitLimits::sparsity(2)).unwrap();
        assert_eq!(direct.dict.atoms(), round.dict.atoms());
    }

    #[test]
    fn training_column_init_rejects_too_few_columns() {
        let y = DMatrix::from_fn(4, 3, |i, j| (i + j) as f64);
        let mut p = LearnParams::new(5, 1, 1, 1);
        p.init = DictionaryInit::TrainingColumns { seed: 0 };
        assert!(learn_dictionary(&y, LearnMethod::Ksvd, &p).is_err());
        let _ = rng(0).gen::<u8>();
    }
}
