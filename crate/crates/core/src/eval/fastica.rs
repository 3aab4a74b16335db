use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::mca::SeparationResult;
use crate::mixing::{rng, whiten_reduced, MixingMatrix, MixtureSet, SourceSet};

/// Contrast derivative `g` used in the fixed-point update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Nonlinearity {
    #[default]
    Tanh,
    Cube,
}

impl Nonlinearity {
    /// `(g(u), g'(u))`.
    fn eval(self, u: f64) -> (f64, f64) {
        match self {
            Nonlinearity::Tanh => {
                let t = u.tanh();
                (t, 1.0 - t * t)
            }
            Nonlinearity::Cube => (u * u * u, 3.0 * u * u),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FastIcaConfig {
    pub nonlinearity: Nonlinearity,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for FastIcaConfig {
    fn default() -> Self {
        Self {
            nonlinearity: Nonlinearity::Tanh,
            seed: 0,
            max_iter: 1000,
            tol: 1e-8,
        }
    }
}

/// One-unit FastICA with deflation on whitened data `z` (`n x t`).
///
/// Returns `W` (`n x n`) with orthonormal rows; each row converges once
/// `|<w_new, w_old>| > 1 - tol`.
pub fn fastica_whitened(z: &DMatrix<f64>, cfg: &FastIcaConfig) -> Result<(DMatrix<f64>, usize)> {
    let (n, t) = z.shape();
    if !(cfg.tol > 0.0) || cfg.max_iter == 0 {
        return arg_err("FastICA needs a positive tolerance and at least one iteration");
    }
    let mut r = rng(cfg.seed);
    let mut w_rows: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut total_iters = 0;
    let tf = t as f64;
    for unit in 0..n {
        let mut w = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
        decorrelate(&mut w, &w_rows);
        w.normalize_mut();
        let mut converged = false;
        let mut delta = f64::INFINITY;
        for _ in 0..cfg.max_iter {
            total_iters += 1;
            let proj = z.tr_mul(&w);
            let mut gz = DVector::zeros(t);
            let mut dg_mean = 0.0;
            for (k, &u) in proj.iter().enumerate() {
                let (g, dg) = cfg.nonlinearity.eval(u);
                gz[k] = g;
                dg_mean += dg;
            }
            let mut next = z * gz / tf - w.clone() * (dg_mean / tf);
            decorrelate(&mut next, &w_rows);
            let norm = next.norm();
            if norm == 0.0 || !norm.is_finite() {
                break;
            }
            next /= norm;
            delta = 1.0 - next.dot(&w).abs();
            w = next;
            if delta < cfg.tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NotConverged {
                unit,
                iterations: cfg.max_iter,
                delta,
            });
        }
        w_rows.push(w);
    }
    let w = DMatrix::from_fn(n, n, |i, j| w_rows[i][j]);
    Ok((w, total_iters))
}

/// Gram-Schmidt step against the rows already found.
fn decorrelate(w: &mut DVector<f64>, found: &[DVector<f64>]) {
    for v in found {
        let c = w.dot(v);
        w.axpy(-c, v, 1.0);
    }
}

/// FastICA baseline: centers, whitens onto the `n` leading principal
/// directions, runs deflation FastICA and maps the unmixing back to an
/// estimated mixing matrix with unit-norm columns.
pub fn fastica(x: &MixtureSet, n: usize, cfg: &FastIcaConfig) -> Result<SeparationResult> {
    let (z, white) = whiten_reduced(x, n)?;
    let (w, iterations) = fastica_whitened(&z.data, cfg)?;
    let mut s = &w * &z.data;
    let mut a = white.dewhitening() * w.transpose();
    for j in 0..n {
        let norm = a.column(j).norm();
        if norm > 0.0 {
            a.column_mut(j).scale_mut(1.0 / norm);
            s.row_mut(j).scale_mut(norm);
        }
    }
    Ok(SeparationResult {
        a_hat: MixingMatrix::normalized(a)?,
        s_hat: SourceSet::new(s)?,
        trace: Vec::new(),
        iterations_run: iterations,
        skipped_updates: Vec::new(),
    })
}
