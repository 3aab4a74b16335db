use nalgebra::{DMatrix, DVector};

use super::{dominant_direction, 
    l1, project, row_vec, set_row, threshold_with_floor, trace_entry, BssProblem, SeparationResult, DEAD_ENERGY,
};
use crate::error::{arg_err, Error, Result};
use crate::mixing::{MixingMatrix, SourceSet};
use crate::sparse::ThresholdKind;

/// Multichannel MCA with one transform per source.
///
/// Per source `k`: project `D_k = X - sum_{l != k} a_l s_l` onto `a_k`,
/// threshold its analysis coefficients, resynthesize `s_k`, then refit
/// `a_k = D_k s_k^T / ||s_k||^2` and renormalize it, moving the scale into
/// `s_k`.
///
/// A source with no energy keeps its mixing column; after half the schedule
/// the column restarts from the leading left singular vector of `D_k`.
pub fn mmca_separate(p: &BssProblem) -> Result<SeparationResult> {
    p.validate()?;
    let n = p.n_sources;
    if p.dictionaries.len() != n {
        return arg_err(format!("MMCA needs one dictionary per source: {} for {n}", p.dictionaries.len()));
    }
    let precision = p.noise_precision()?;
    let kind = p.threshold.unwrap_or(ThresholdKind::Soft);
    let x = &p.mixtures.data;
    let t = x.ncols();
    let x_energy = x.norm_squared();
    let mut a = p.initial_a()?;
    let mut s = DMatrix::zeros(n, t);
    let mut residual = x.clone();
    let mut dead_since: Vec<Option<usize>> = vec![None; n];
    let mut trace = Vec::with_capacity(p.schedule.l_max());
    let l_max = p.schedule.l_max();

    for it in 0..l_max {
        let delta = p.schedule.value(it);
        let mut l1_total = 0.0;
        for k in 0..n {
            let ak: DVector<f64> = a.column(k).into_owned();
            let sk = DMatrix::from_row_slice(1, t, &row_vec(&s, k));
            let d = &residual + &ak * &sk;
            let s_proj = project(&ak, precision.as_ref(), &d);
            let mut coeffs = p.dictionaries[k].analyze(&s_proj)?;
            threshold_with_floor(&mut coeffs, kind, delta, p.floor_mad_factor);
            let mut s_new = p.dictionaries[k].synthesize(&coeffs)?;
            let energy: f64 = s_new.iter().map(|v| v * v).sum();
            let mut a_new = ak.clone();
            let mut alive = energy > DEAD_ENERGY * x_energy;
            if alive {
                let sv = DVector::from_column_slice(&s_new);
                let fit = &d * sv / energy;
                let norm = fit.norm();
                if norm > 0.0 && norm.is_finite() {
                    a_new = fit / norm;
                    s_new.iter_mut().for_each(|v| *v *= norm);
                    coeffs.iter_mut().for_each(|v| *v *= norm);
                } else {
                    alive = false;
                }
            }
            if alive {
                dead_since[k] = None;
                l1_total += l1(&coeffs);
            } else {
                s_new.iter_mut().for_each(|v| *v = 0.0);
                dead_since[k].get_or_insert(it);
                if 2 * it >= l_max {
                    if let Some(dir) = dominant_direction(&d, &a, k)? {
                        a_new = dir;
                    }
                }
            }
            a.set_column(k, &a_new);
            set_row(&mut s, k, &s_new);
            let snew = DMatrix::from_row_slice(1, t, &s_new);
            residual = d - &a_new * snew;
        }
        trace.push(trace_entry(it, delta, &residual, l1_total));
    }

    if x_energy > 0.0 {
        if let Some((index, iteration)) = dead_since.iter().enumerate().find_map(|(k, d)| d.map(|i| (k, i))) {
            return Err(Error::DeadSource { index, iteration });
        }
    }
    Ok(SeparationResult {
        a_hat: MixingMatrix::normalized(a)?,
        s_hat: SourceSet::new(s)?,
        trace,
        iterations_run: l_max,
        skipped_updates: Vec::new(),
    })
}
