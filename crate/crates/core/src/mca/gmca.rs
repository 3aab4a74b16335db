use nalgebra::{DMatrix, DVector};

use super::{dominant_direction, 
    l1, project, row_vec, set_row, threshold_with_floor, trace_entry, BssProblem, SeparationResult, DEAD_ENERGY,
};
use crate::error::{Error, Result};
use crate::mixing::{MixingMatrix, SourceSet};
use crate::sparse::ThresholdKind;

/// Generalized MCA: every source is a sum of morphological components, one
/// per shared transform.
///
/// The residual for component `(i, k)` is the single-channel projection
/// `a_i^T (X - sum_{(p,q) != (i,k)} a_p phi_pq)`; after all components of
/// source `i` are refreshed its mixing column is refit by least squares and
/// renormalized.
pub fn gmca_separate(p: &BssProblem) -> Result<SeparationResult> {
    p.validate()?;
    let n = p.n_sources;
    let n_comp = p.dictionaries.len();
    let precision = p.noise_precision()?;
    let kind = p.threshold.unwrap_or(ThresholdKind::Soft);
    let x = &p.mixtures.data;
    let t = x.ncols();
    let x_energy = x.norm_squared();
    let mut a = p.initial_a()?;
    // phi[i][k]: component k of source i
    let mut phi = vec![vec![vec![0.0; t]; n_comp]; n];
    let mut s = DMatrix::zeros(n, t);
    let mut residual = x.clone();
    let mut dead_since: Vec<Option<usize>> = vec![None; n];
    let l_max = p.schedule.l_max();
    let mut trace = Vec::with_capacity(l_max);

    for it in 0..l_max {
        let delta = p.schedule.value(it);
        let mut l1_total = 0.0;
        for i in 0..n {
            let ai: DVector<f64> = a.column(i).into_owned();
            // projected residual, kept current as components change
            let mut r_proj = project(&ai, precision.as_ref(), &residual);
            let mut source_l1 = 0.0;
            for k in 0..n_comp {
                let target: Vec<f64> = r_proj
                    .iter()
                    .zip(&phi[i][k])
                    .map(|(r, f)| r + f)
                    .collect();
                let mut coeffs = p.dictionaries[k].analyze(&target)?;
                threshold_with_floor(&mut coeffs, kind, delta, p.floor_mad_factor);
                source_l1 += l1(&coeffs);
                let next = p.dictionaries[k].synthesize(&coeffs)?;
                for ((r, old), new) in r_proj.iter_mut().zip(&phi[i][k]).zip(&next) {
                    *r += old - new;
                }
                phi[i][k] = next;
            }
            let s_new: Vec<f64> = (0..t).map(|j| phi[i].iter().map(|c| c[j]).sum()).collect();
            let s_old = DMatrix::from_row_slice(1, t, &row_vec(&s, i));
            let d = &residual + &ai * s_old;
            let energy: f64 = s_new.iter().map(|v| v * v).sum();
            let mut a_new = ai.clone();
            let mut scale = 1.0;
            let mut alive = energy > DEAD_ENERGY * x_energy;
            if alive {
                let fit = &d * DVector::from_column_slice(&s_new) / energy;
                let norm = fit.norm();
                if norm > 0.0 && norm.is_finite() {
                    a_new = fit / norm;
                    scale = norm;
                } else {
                    alive = false;
                }
            }
            if alive {
                dead_since[i] = None;
                l1_total += scale * source_l1;
            } else {
                scale = 0.0;
                dead_since[i].get_or_insert(it);
                if 2 * it >= l_max {
                    if let Some(dir) = dominant_direction(&d, &a, i)? {
                        a_new = dir;
                    }
                }
            }
            for c in phi[i].iter_mut() {
                c.iter_mut().for_each(|v| *v *= scale);
            }
            let s_scaled: Vec<f64> = s_new.iter().map(|v| v * scale).collect();
            a.set_column(i, &a_new);
            set_row(&mut s, i, &s_scaled);
            residual = d - &a_new * DMatrix::from_row_slice(1, t, &s_scaled);
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mca::Transform;
    use crate::mixing::MixtureSet;
    use crate::sparse::ThresholdSchedule;
    use crate::transforms::dct_basis;
    use std::sync::Arc;

    #[test]
    fn zero_mixtures_give_zero_sources_and_initial_mixing() {
        let x = MixtureSet::new(DMatrix::zeros(3, 16));
        let dicts: Vec<Transform> = vec![Arc::new(dct_basis(16))];
        let p = BssProblem::new(x, 2, dicts, ThresholdSchedule::starting_at(1.0, 10).unwrap());
        let r = gmca_separate(&p).unwrap();
        assert!(r.s_hat.data().iter().all(|&v| v == 0.0));
        assert!((r.a_hat.data() - p.initial_a().unwrap()).amax() < 1e-15);
    }
}
