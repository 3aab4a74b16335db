use nalgebra::{DMatrix, DVector};

use super::{l1, row_vec, set_row, threshold_with_floor, BssProblem, SeparationResult, TraceEntry};
use crate::error::{arg_err, Result};
use crate::linalg::pinv;
use crate::mixing::{MixingMatrix, SourceSet};
use crate::sparse::ThresholdKind;

/// Reciprocal condition number below which a Gram matrix counts as
/// singular.
const GRAM_RCOND: f64 = 1e-12;

/// GMCA carried out entirely in the coefficient domain of one orthonormal
/// transform: `Theta_S = threshold(A^+ Theta_X)` and
/// `A = Theta_X Theta_S^T (Theta_S Theta_S^T)^{-1}`.
///
/// Only sources with nonzero coefficients take part in the mixing update,
/// and only as many of them (largest first) as keep the Gram matrix
/// nonsingular; the others keep their previous mixing columns.
pub fn fast_gmca_separate(p: &BssProblem) -> Result<SeparationResult> {
    p.validate()?;
    if p.dictionaries.len() != 1 || !p.dictionaries[0].is_orthonormal() {
        return arg_err("FastGMCA needs exactly one orthonormal transform");
    }
    let phi = &p.dictionaries[0];
    let kind = p.threshold.unwrap_or(ThresholdKind::Hard);
    let x = &p.mixtures.data;
    let (m, n) = (x.nrows(), p.n_sources);
    let tc = phi.coeff_len();
    // coefficients are stored transposed (one column per channel or source)
    // so that every per-source pass runs over contiguous memory
    let mut tx = DMatrix::zeros(tc, m);
    for c in 0..m {
        tx.set_column(c, &DVector::from_vec(phi.analyze(&row_vec(x, c))?));
    }
    let tx_energy = tx.norm_squared();
    // channel coefficients at one position are contiguous here
    let txt = tx.transpose();
    let mut a = p.initial_a()?;
    let mut ts = DMatrix::zeros(tc, n);
    let l_max = p.schedule.l_max();
    let mut trace = Vec::with_capacity(l_max);
    let mut skipped_updates = Vec::new();

    for it in 0..l_max {
        let delta = p.schedule.value(it);
        let mut next = &tx * pinv(&a)?.transpose();
        for mut col in next.column_iter_mut() {
            threshold_with_floor(col.as_mut_slice(), kind, delta, p.floor_mad_factor);
        }
        let (mut gram, mut cross) = sparse_products(&txt, &next);
        let active = independent_sources(&gram);
        let n_nonzero = (0..n).filter(|&i| gram[(i, i)] > 0.0).count();
        if active.len() < n_nonzero {
            skipped_updates.push(it);
        }
        if !active.is_empty() {
            let g = gram.select_rows(&active).select_columns(&active);
            if let Some(chol) = g.cholesky() {
                let fit = cross.select_columns(&active) * chol.inverse();
                for (c, &i) in active.iter().enumerate() {
                    let col = fit.column(c);
                    let norm = col.norm();
                    if norm > 0.0 && norm.is_finite() {
                        a.set_column(i, &(col / norm));
                        next.column_mut(i).scale_mut(norm);
                        cross.column_mut(i).scale_mut(norm);
                        gram.row_mut(i).scale_mut(norm);
                        gram.column_mut(i).scale_mut(norm);
                    }
                }
            }
        }
        ts = next;
        // ||Tx - Ts A^T||^2 = ||Tx||^2 - 2 <A, cross> + <A^T A, gram>
        let fit_term = a.dot(&cross);
        let model_term = (a.tr_mul(&a)).dot(&gram);
        let r = (tx_energy - 2.0 * fit_term + model_term).max(0.0).sqrt();
        trace.push(TraceEntry {
            iteration: it,
            delta,
            residual: r,
            objective: 0.5 * r * r + delta * l1(ts.as_slice()),
        });
    }

    let t = x.ncols();
    let mut s = DMatrix::zeros(n, t);
    for i in 0..n {
        set_row(&mut s, i, &phi.synthesize(ts.column(i).as_slice())?);
    }
    Ok(SeparationResult {
        a_hat: MixingMatrix::normalized(a)?,
        s_hat: SourceSet::new(s)?,
        trace,
        iterations_run: l_max,
        skipped_updates,
    })
}

/// Source Gram matrix `Theta_S^T Theta_S` and channel cross products
/// `Theta_X^T Theta_S` (`m x n`), summed over the nonzero source
/// coefficients only; after thresholding most of them are zero.
fn sparse_products(txt: &DMatrix<f64>, ts: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = ts.ncols();
    let mut gram = DMatrix::zeros(n, n);
    let mut cross = DMatrix::zeros(txt.nrows(), n);
    for i in 0..n {
        let col = ts.column(i);
        for (k, &v) in col.iter().enumerate().filter(|(_, v)| **v != 0.0) {
            for j in i..n {
                gram[(i, j)] += v * ts[(k, j)];
            }
            cross.column_mut(i).axpy(v, &txt.column(k), 1.0);
        }
        for j in i + 1..n {
            gram[(j, i)] = gram[(i, j)];
        }
    }
    (gram, cross)
}

/// Greedy subset of sources with nonzero coefficients, by decreasing
/// energy, whose Gram submatrix stays well conditioned.
fn independent_sources(gram: &DMatrix<f64>) -> Vec<usize> {
    let mut order: Vec<(usize, f64)> = (0..gram.nrows())
        .map(|i| (i, gram[(i, i)]))
        .filter(|&(_, e)| e > 0.0)
        .collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut chosen: Vec<usize> = Vec::new();
    for (i, _) in order {
        chosen.push(i);
        let eig = gram.select_rows(&chosen).select_columns(&chosen).symmetric_eigenvalues();
        let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
        if !(lo > GRAM_RCOND * hi) {
            chosen.pop();
        }
    }
    chosen.sort_unstable();
    chosen
}
