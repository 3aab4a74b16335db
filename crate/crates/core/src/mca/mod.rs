//! Block-coordinate relaxation solvers: MCA on a single observation, and the
//! multichannel MMCA, GMCA and FastGMCA separators.

mod decompose;
mod fast_gmca;
mod gmca;
mod mmca;

pub use decompose::{mca_decompose, McaDecomposition, McaProblem};
pub use fast_gmca::fast_gmca_separate;
pub use gmca::gmca_separate;
pub use mmca::mmca_separate;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::linalg::{mad_sigma, pinv};
use crate::mixing::{random_mixing_matrix, MixingMatrix, MixtureSet, SourceSet};
use crate::sparse::{ThresholdKind, ThresholdSchedule};
use crate::transforms::SignalTransform;

/// Shared handle to a transform; solvers only need analysis and synthesis.
pub type Transform = Arc<dyn SignalTransform>;

/// Multichannel separation problem `X = A S + N`.
#[derive(Clone)]
pub struct BssProblem {
    pub mixtures: MixtureSet,
    pub n_sources: usize,
    /// One transform per source for MMCA; the shared component list for
    /// GMCA and FastGMCA.
    pub dictionaries: Vec<Transform>,
    pub schedule: ThresholdSchedule,
    /// Noise covariance `Gamma` (`m x m`); identity when absent.
    pub noise_cov: Option<DMatrix<f64>>,
    /// Thresholding rule; `None` selects the solver default (soft, except
    /// hard for FastGMCA).
    pub threshold: Option<ThresholdKind>,
    /// Thresholds never drop below `floor_mad_factor` times the MAD noise
    /// estimate of the coefficients being thresholded. Zero disables.
    pub floor_mad_factor: f64,
    pub seed: u64,
    /// Starting mixing matrix; random column-normalized when absent.
    pub initial_mixing: Option<DMatrix<f64>>,
}

impl BssProblem {
    pub fn new(mixtures: MixtureSet, n_sources: usize, dictionaries: Vec<Transform>, schedule: ThresholdSchedule) -> Self {
        Self {
            mixtures,
            n_sources,
            dictionaries,
            schedule,
            noise_cov: None,
            threshold: None,
            floor_mad_factor: 3.0,
            seed: 0,
            initial_mixing: None,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let (m, t) = self.mixtures.data.shape();
        if self.n_sources == 0 || self.n_sources > m {
            return arg_err(format!("need 1..={m} sources, got {}", self.n_sources));
        }
        if self.dictionaries.is_empty() {
            return arg_err("at least one dictionary is required");
        }
        if let Some(d) = self.dictionaries.iter().find(|d| d.signal_len() != t) {
            return dim_err(format!(
                "dictionary acts on length {}, mixtures have {t} samples",
                d.signal_len()
            ));
        }
        if !(self.floor_mad_factor >= 0.0) {
            return arg_err("floor factor must be nonnegative");
        }
        if let Some(a) = &self.initial_mixing {
            if a.shape() != (m, self.n_sources) {
                return dim_err("initial mixing matrix has the wrong shape");
            }
        }
        Ok(())
    }

    pub(crate) fn initial_a(&self) -> Result<DMatrix<f64>> {
        let (m, n) = (self.mixtures.n_channels(), self.n_sources);
        match &self.initial_mixing {
            Some(a) => Ok(MixingMatrix::normalized(a.clone())?.data().clone()),
            None => Ok(random_mixing_matrix(m, n, self.seed)?.data().clone()),
        }
    }

    /// `Gamma^{-1}`, checked symmetric positive definite.
    pub(crate) fn noise_precision(&self) -> Result<Option<DMatrix<f64>>> {
        let Some(g) = &self.noise_cov else { return Ok(None) };
        let m = self.mixtures.n_channels();
        if g.shape() != (m, m) {
            return dim_err("noise covariance must be m x m");
        }
        let scale = g.amax().max(f64::MIN_POSITIVE);
        if (g - g.transpose()).amax() > 1e-10 * scale {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = g.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(Some(chol.inverse()))
    }
}

/// Per-iteration solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Scheduled threshold.
    pub delta: f64,
    /// `||X - A S||_F`.
    pub residual: f64,
    /// `0.5 ||X - A S||_F^2 + delta * sum ||coefficients||_1`.
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct SeparationResult {
    pub a_hat: MixingMatrix,
    pub s_hat: SourceSet,
    pub trace: Vec<TraceEntry>,
    pub iterations_run: usize,
    /// Iterations whose mixing update was skipped because the source Gram
    /// matrix was singular; the previous mixing matrix was kept.
    pub skipped_updates: Vec<usize>,
}

/// Largest absolute analysis coefficient of any mixture channel under any of
/// the transforms; a natural first threshold.
pub fn max_abs_coefficient(mixtures: &MixtureSet, dictionaries: &[Transform]) -> Result<f64> {
    let mut best: f64 = 0.0;
    for row in mixtures.data.row_iter() {
        let v: Vec<f64> = row.iter().copied().collect();
        for d in dictionaries {
            best = d.analyze(&v)?.iter().fold(best, |b, x| b.max(x.abs()));
        }
    }
    Ok(best)
}

/// Linear schedule from the largest mixture coefficient down over `l_max`
/// iterations.
pub fn auto_schedule(mixtures: &MixtureSet, dictionaries: &[Transform], l_max: usize) -> Result<ThresholdSchedule> {
    let start = max_abs_coefficient(mixtures, dictionaries)?;
    if start == 0.0 {
        return ThresholdSchedule::starting_at(1.0, l_max);
    }
    ThresholdSchedule::starting_at(start, l_max)
}

/// `(a^T G X) / (a^T G a)` with `G = Gamma^{-1}` (identity when `None`).
pub(crate) fn project(a: &DVector<f64>, precision: Option<&DMatrix<f64>>, x: &DMatrix<f64>) -> Vec<f64> {
    let w = match precision {
        Some(g) => g * a,
        None => a.clone(),
    };
    let denom = a.dot(&w);
    (x.tr_mul(&w) / denom).iter().copied().collect()
}

/// Thresholds `coeffs` at `max(delta, factor * mad_sigma)`; returns the
/// threshold used.
pub(crate) fn threshold_with_floor(coeffs: &mut [f64], kind: ThresholdKind, delta: f64, factor: f64) -> f64 {
    let thr = if factor > 0.0 && delta < factor * mad_upper_bound(coeffs) {
        delta.max(factor * mad_sigma(coeffs))
    } else {
        delta
    };
    kind.apply_in_place(coeffs, thr);
    thr
}

/// Cheap upper bound on [`mad_sigma`]. At least half the samples deviate
/// from the median by the MAD or more, and the median lies within one
/// standard deviation of the mean, so `MAD <= 2 std`.
fn mad_upper_bound(v: &[f64]) -> f64 {
    let n = v.len().max(1) as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    // slack covers rounding in the two sums
    2.0 * var.sqrt() / 0.6745 * (1.0 + 1e-9)
}

pub(crate) fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub(crate) fn row_vec(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

pub(crate) fn set_row(m: &mut DMatrix<f64>, i: usize, v: &[f64]) {
    for (j, x) in v.iter().enumerate() {
        m[(i, j)] = *x;
    }
}

pub(crate) fn trace_entry(iteration: usize, delta: f64, residual: &DMatrix<f64>, l1_total: f64) -> TraceEntry {
    let r = residual.norm();
    TraceEntry {
        iteration,
        delta,
        residual: r,
        objective: 0.5 * r * r + delta * l1_total,
    }
}

/// Tolerance below which a source counts as having no energy.
pub const DEAD_ENERGY: f64 = 1e-12;

/// Leading left singular vector of `e` after projecting out every column
/// of `a` except `skip`, so a restarted column cannot duplicate another.
pub(crate) fn dominant_direction(e: &DMatrix<f64>, a: &DMatrix<f64>, skip: usize) -> Result<Option<DVector<f64>>> {
    let others: Vec<usize> = (0..a.ncols()).filter(|&k| k != skip).collect();
    let mut e = e.clone();
    if !others.is_empty() {
        let b = a.select_columns(&others);
        e -= &b * (pinv(&b)? * &e);
    }
    let eig = (&e * e.transpose()).symmetric_eigen();
    let top = eig.eigenvalues.imax();
    Ok((eig.eigenvalues[top] > 0.0).then(|| eig.eigenvectors.column(top).into_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transforms::dct_basis;

    #[test]
    fn projection_with_identity_precision_matches_plain() {
        let a = DVector::from_vec(vec![0.6, 0.8]);
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let plain = project(&a, None, &x);
        let eye = DMatrix::identity(2, 2);
        assert_eq!(plain, project(&a, Some(&eye), &x));
        assert!((plain[0] - (0.6 + 3.2)).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_spd_noise() {
        let x = MixtureSet::new(DMatrix::from_element(2, 8, 1.0));
        let mut p = BssProblem::new(
            x,
            1,
            vec![Arc::new(dct_basis(8))],
            ThresholdSchedule::starting_at(1.0, 4).unwrap(),
        );
        p.noise_cov = Some(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]));
        assert!(matches!(p.noise_precision(), Err(Error::NotPositiveDefinite)));
        p.noise_cov = Some(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]));
        assert!(matches!(p.noise_precision(), Err(Error::NotPositiveDefinite)));
        p.noise_cov = Some(DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]));
        assert!(p.noise_precision().unwrap().is_some());
    }
}
