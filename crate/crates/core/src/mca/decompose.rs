use super::Transform;
use crate::error::{arg_err, dim_err, Result};
use crate::sparse::{ThresholdKind, ThresholdSchedule};

/// Single-observation morphological component analysis.
#[derive(Clone)]
pub struct McaProblem {
    pub observation: Vec<f64>,
    /// One transform per morphological component (at least two).
    pub components: Vec<Transform>,
    pub schedule: ThresholdSchedule,
    pub threshold: ThresholdKind,
}

#[derive(Debug, Clone)]
pub struct McaDecomposition {
    pub components: Vec<Vec<f64>>,
    /// `||y - sum phi_i||_2` after each outer iteration.
    pub residual_trace: Vec<f64>,
}

/// Splits the observation into one component per transform by cyclic
/// thresholding of the partial residuals with a decreasing threshold.
pub fn mca_decompose(p: &McaProblem) -> Result<McaDecomposition> {
    let n = p.observation.len();
    if p.components.len() < 2 {
        return arg_err("MCA needs at least two components");
    }
    if let Some(c) = p.components.iter().find(|c| c.signal_len() != n) {
        return dim_err(format!(
            "component transform acts on length {}, observation has {n}",
            c.signal_len()
        ));
    }
    let y = &p.observation;
    let mut parts = vec![vec![0.0; n]; p.components.len()];
    // residual y - sum_i phi_i
    let mut r = y.clone();
    let mut residual_trace = Vec::with_capacity(p.schedule.l_max());
    for delta in p.schedule.values() {
        for (i, t) in p.components.iter().enumerate() {
            let partial: Vec<f64> = parts[i].iter().zip(&r).map(|(a, b)| a + b).collect();
            let mut coeffs = t.analyze(&partial)?;
            p.threshold.apply_in_place(&mut coeffs, delta);
            let next = t.synthesize(&coeffs)?;
            for ((ri, old), new) in r.iter_mut().zip(&parts[i]).zip(&next) {
                *ri += old - new;
            }
            parts[i] = next;
        }
        residual_trace.push(r.iter().map(|x| x * x).sum::<f64>().sqrt());
    }
    Ok(McaDecomposition {
        components: parts,
        residual_trace,
    })
}
