use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::hungarian;
use crate::error::{dim_err, Error, Result};
use crate::linalg::pinv;

/// Pearson correlation of two equal-length signals.
pub fn correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return dim_err(format!("correlation of lengths {} and {}", a.len(), b.len()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return dim_err(format!("mse of lengths {} and {}", a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64)
}

/// `10 log10(peak^2 / mse)` in dB; `+inf` when the signals are identical.
pub fn psnr(estimate: &[f64], truth: &[f64], peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return crate::error::arg_err(format!("peak must be positive, got {peak}"));
    }
    let e = mse(estimate, truth)?;
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / e).log10())
}

/// Matching of estimated rows to true sources: `estimate[permutation[j]]`
/// approximates `signs[j] * scales[j] * truth[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMap {
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub map: AlignmentMap,
    /// Estimates reordered, sign-corrected and rescaled onto the truth.
    pub aligned: DMatrix<f64>,
    /// Correlation of each true source with its matched estimate.
    pub correlations: Vec<f64>,
    /// Total assignment cost `sum (1 - |rho|)`.
    pub cost: f64,
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

/// Resolves the permutation, sign and scale ambiguity between estimated and
/// true sources (rows) by minimum-cost assignment on `1 - |rho|`.
pub fn align(estimate: &DMatrix<f64>, truth: &DMatrix<f64>) -> Result<Alignment> {
    if estimate.shape() != truth.shape() {
        return dim_err(format!("estimate {:?} vs truth {:?}", estimate.shape(), truth.shape()));
    }
    let n = truth.nrows();
    let est_rows: Vec<Vec<f64>> = (0..n).map(|i| row(estimate, i)).collect();
    let true_rows: Vec<Vec<f64>> = (0..n).map(|i| row(truth, i)).collect();
    let mut rho = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            rho[(j, i)] = correlation(&est_rows[i], &true_rows[j])?;
        }
    }
    let cost = rho.map(|r: f64| 1.0 - r.abs());
    let (permutation, total) = hungarian(&cost)?;
    let mut aligned = DMatrix::zeros(n, truth.ncols());
    let mut signs = Vec::with_capacity(n);
    let mut scales = Vec::with_capacity(n);
    let mut correlations = Vec::with_capacity(n);
    for (j, &i) in permutation.iter().enumerate() {
        let e = &est_rows[i];
        let ee: f64 = e.iter().map(|x| x * x).sum();
        let es: f64 = e.iter().zip(&true_rows[j]).map(|(x, y)| x * y).sum();
        let c = es / ee;
        let (sign, scale) = if c != 0.0 && c.is_finite() {
            (c.signum(), 1.0 / c.abs())
        } else {
            (1.0, 1.0)
        };
        for (t, x) in e.iter().enumerate() {
            aligned[(j, t)] = x / (sign * scale);
        }
        signs.push(sign);
        scales.push(scale);
        correlations.push(rho[(j, i)]);
    }
    Ok(Alignment {
        map: AlignmentMap {
            permutation,
            signs,
            scales,
        },
        aligned,
        correlations,
        cost: total,
    })
}

/// `||I - P D A_hat^+ A||_F` minimized over permutations `P` with `D`
/// chosen so the diagonal of `P D A_hat^+ A` is one. Zero exactly when
/// `A_hat` equals `A` up to column order and scale.
pub fn mixing_criterion(a: &DMatrix<f64>, a_hat: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != a_hat.shape() {
        return dim_err(format!("mixing shapes {:?} and {:?}", a.shape(), a_hat.shape()));
    }
    let m = pinv(a_hat)? * a;
    let n = m.nrows();
    // row r of M placed at position i costs ||M_r||^2 / M_ri^2 - 1
    let big = 1e30;
    let cost = DMatrix::from_fn(n, n, |r, i| {
        let mr = m[(r, i)];
        if mr == 0.0 {
            big
        } else {
            (m.row(r).norm_squared() / (mr * mr) - 1.0).min(big)
        }
    });
    let (assign, _) = hungarian(&cost)?;
    let mut pdm = DMatrix::zeros(n, n);
    for (r, &i) in assign.iter().enumerate() {
        let d = m[(r, i)];
        for c in 0..n {
            pdm[(i, c)] = m[(r, c)] / d;
        }
    }
    Ok((DMatrix::identity(n, n) - pdm).norm())
}

/// Separation quality of an estimate against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub correlations: Vec<f64>,
    pub mean_abs_correlation: f64,
    pub mixing_criterion: Option<f64>,
    pub mse: Vec<f64>,
    pub psnr_db: Vec<f64>,
}

/// Aligns `s_hat` to `s` and computes per-source metrics; `C_A` is included
/// when both mixing matrices are given. PSNR uses each true source's peak
/// absolute value.
pub fn metric_report(
    s_hat: &DMatrix<f64>,
    s: &DMatrix<f64>,
    mixing: Option<(&DMatrix<f64>, &DMatrix<f64>)>,
) -> Result<MetricReport> {
    let al = align(s_hat, s)?;
    let mut mses = Vec::new();
    let mut psnrs = Vec::new();
    for j in 0..s.nrows() {
        let truth = row(s, j);
        let est = row(&al.aligned, j);
        mses.push(mse(&est, &truth)?);
        let peak = truth.iter().fold(0.0f64, |p, x| p.max(x.abs()));
        psnrs.push(psnr(&est, &truth, peak)?);
    }
    let mean_abs = al.correlations.iter().map(|r| r.abs()).sum::<f64>() / s.nrows() as f64;
    let c_a = match mixing {
        Some((a, a_hat)) => Some(mixing_criterion(a, a_hat)?),
        None => None,
    };
    Ok(MetricReport {
        correlations: al.correlations,
        mean_abs_correlation: mean_abs,
        mixing_criterion: c_a,
        mse: mses,
        psnr_db: psnrs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::rng;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random(n: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng(seed);
        DMatrix::from_fn(n, m, |_, _| StandardNormal.sample(&mut r))
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn correlation_examples() {
        let s = vec![1.0, 3.0, -2.0, 0.5];
        assert!((correlation(&s, &s).unwrap() - 1.0).abs() < 1e-15);
        let neg: Vec<f64> = s.iter().map(|x| -x).collect();
        assert!((correlation(&s, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(correlation(&[1.0, 0.0, 1.0, 0.0], &[0.0, 1.0, 0.0, 1.0]).unwrap(), -1.0);
        assert!(matches!(correlation(&[1.0, 1.0], &[0.0, 1.0]), Err(Error::ZeroVariance)));
    }

    #[test]
    fn mse_and_psnr_examples() {
        let s = vec![1.0, 2.0, 3.0];
        assert_eq!(mse(&s, &s).unwrap(), 0.0);
        assert_eq!(psnr(&s, &s, 1.0).unwrap(), f64::INFINITY);
        assert!((mse(&[0.0; 4], &[1.5; 4]).unwrap() - 2.25).abs() < 1e-15);
        let p = psnr(&[25.5], &[0.0], 255.0).unwrap();
        assert!((p - 20.0).abs() < 1e-12);
    }

    #[test]
    fn align_reversed_rows() {
        let s = random(3, 50, 1);
        let rev = DMatrix::from_fn(3, 50, |i, j| s[(2 - i, j)]);
        let al = align(&rev, &s).unwrap();
        assert_eq!(al.map.permutation, vec![2, 1, 0]);
        assert_eq!(al.map.signs, vec![1.0; 3]);
        for sc in &al.map.scales {
            assert!((sc - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn align_negative_double() {
        let s = random(2, 40, 2);
        let est = &s * -2.0;
        let al = align(&est, &s).unwrap();
        assert_eq!(al.map.permutation, vec![0, 1]);
        assert_eq!(al.map.signs, vec![-1.0, -1.0]);
        for sc in &al.map.scales {
            assert!((sc - 2.0).abs() < 1e-12);
        }
        assert!((al.aligned - s).amax() < 1e-12);
    }

    #[test]
    fn align_cost_is_exhaustive_minimum() {
        for seed in 0..50 {
            let s = random(4, 30, seed);
            let est = random(4, 30, 1000 + seed) + &s * 0.5;
            let al = align(&est, &s).unwrap();
            let best = permutations(4)
                .iter()
                .map(|p| {
                    (0..4)
                        .map(|j| 1.0 - correlation(&row(&est, p[j]), &row(&s, j)).unwrap().abs())
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((al.cost - best).abs() < 1e-12);
        }
    }

    #[test]
    fn aligned_output_ignores_row_order() {
        let s = random(4, 30, 5);
        let est = random(4, 30, 6) * 0.3 + &s;
        let base = align(&est, &s).unwrap();
        let shuffled = DMatrix::from_fn(4, 30, |i, j| est[((i + 1) % 4, j)]);
        let other = align(&shuffled, &s).unwrap();
        assert!((base.aligned - other.aligned).amax() < 1e-12);
        for j in 0..4 {
            assert_eq!((other.map.permutation[j] + 1) % 4, base.map.permutation[j]);
        }
    }

    /// Direct evaluation of the criterion over every permutation.
    fn brute_force_criterion(a: &DMatrix<f64>, a_hat: &DMatrix<f64>) -> f64 {
        let m = pinv(a_hat).unwrap() * a;
        let n = m.nrows();
        permutations(n)
            .iter()
            .map(|p| {
                let mut pdm = DMatrix::zeros(n, n);
                for r in 0..n {
                    for c in 0..n {
                        pdm[(p[r], c)] = m[(r, c)] / m[(r, p[r])];
                    }
                }
                (DMatrix::identity(n, n) - pdm).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn criterion_examples() {
        let a = random(4, 3, 7);
        assert!(mixing_criterion(&a, &a).unwrap() < 1e-12);
        let swapped = DMatrix::from_fn(4, 3, |i, j| 3.0 * a[(i, [1, 0, 2][j])]);
        assert!(mixing_criterion(&a, &swapped).unwrap() < 1e-8);
        let mut r = rng(8);
        for n in 2..=5 {
            for _ in 0..20 {
                let a = random(n + 2, n, r.gen());
                let mut delta = random(n + 2, n, r.gen());
                delta *= 0.1 / delta.norm();
                let a_hat = &a + delta;
                let c = mixing_criterion(&a, &a_hat).unwrap();
                assert!(c > 0.0);
                assert!((c - brute_force_criterion(&a, &a_hat)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn criterion_invariant_under_signed_permutation_and_scaling() {
        let mut r = rng(9);
        for _ in 0..1000 {
            let n = r.gen_range(1..=6);
            let a = random(n + r.gen_range(0..3), n, r.gen());
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut r);
            let scale: Vec<f64> = (0..n)
                .map(|_| r.gen_range(0.1..10.0) * if r.gen_bool(0.5) { -1.0 } else { 1.0 })
                .collect();
            let a_hat = DMatrix::from_fn(a.nrows(), n, |i, j| a[(i, perm[j])] * scale[j]);
            assert!(mixing_criterion(&a, &a_hat).unwrap() < 1e-8);
        }
    }

    proptest! {
        #[test]
        fn correlation_is_bounded(v in proptest::collection::vec(-1e3f64..1e3, 2..50), seed in 0u64..100) {
            let w: Vec<f64> = random(1, v.len(), seed).iter().copied().collect();
            if let Ok(r) = correlation(&v, &w) {
                prop_assert!((-1.0..=1.0).contains(&r));
            }
        }
    }
}
