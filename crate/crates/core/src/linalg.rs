//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Flips `v` so that its largest-magnitude entry is positive (first one on ties).
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Scales every nonzero column of `m` to unit Euclidean norm and returns the
/// original norms.
pub fn normalize_columns(m: &mut DMatrix<f64>) -> Vec<f64> {
    let mut norms = Vec::with_capacity(m.ncols());
    for mut col in m.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
        norms.push(n);
    }
    norms
}

/// Moore-Penrose pseudo-inverse of a full-column-rank matrix.
pub fn pinv(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let tol = smax * 1e-12 * (a.nrows().max(a.ncols()) as f64);
    if smax == 0.0 || svd.singular_values.iter().any(|&s| s <= tol) {
        return Err(Error::RankDeficientMixing);
    }
    svd.pseudo_inverse(tol).map_err(|_| Error::RankDeficientMixing)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending.
pub fn sorted_symmetric_eigen(c: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(c.clone());
    let n = c.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Leading `r` singular triplets of `m`: (U_r, sigma_r, V_r).
///
/// Each left vector is sign-normalized with [`fix_sign`] and the matching
/// right vector flipped with it, so the product is unchanged.
pub fn top_singular(m: &DMatrix<f64>, r: usize) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v requested");
    let r = r.min(svd.singular_values.len());
    let mut uu = DMatrix::zeros(m.nrows(), r);
    let mut vv = DMatrix::zeros(m.ncols(), r);
    let mut sig = Vec::with_capacity(r);
    for i in 0..r {
        let mut ucol: Vec<f64> = u.column(i).iter().cloned().collect();
        let before = ucol.clone();
        fix_sign(&mut ucol);
        let flip = if ucol != before { -1.0 } else { 1.0 };
        for (row, x) in ucol.iter().enumerate() {
            uu[(row, i)] = *x;
        }
        for row in 0..m.ncols() {
            vv[(row, i)] = flip * v_t[(i, row)];
        }
        sig.push(svd.singular_values[i]);
    }
    (uu, sig, vv)
}

/// Median of a slice (average of the two middle values for even lengths).
pub fn median(values: &[f64]) -> f64 {
    median_in_place(&mut values.to_vec())
}

/// Median by selection; reorders `v`.
fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    if n == 0 {
        return 0.0;
    }
    let (lower, mid, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    let mid = *mid;
    if n % 2 == 1 {
        mid
    } else {
        // the lower partition holds the n/2 smallest values
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + mid)
    }
}

/// Robust Gaussian noise level: median absolute deviation scaled by 1/0.6745.
pub fn mad_sigma(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let med = median_in_place(&mut v);
    v.iter_mut().for_each(|x| *x = (*x - med).abs());
    median_in_place(&mut v) / 0.6745
}

/// Dot product with four independent accumulators, which lets the
/// compiler vectorize the loop.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot of unequal lengths");
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `a^T b` computed from contiguous column dot products; fast for tall,
/// thin operands.
pub fn cross_columns(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    assert_eq!(a.nrows(), b.nrows(), "operands must have equal row counts");
    DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| {
        dot(a.column(i).as_slice(), b.column(j).as_slice())
    })
}

pub fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}
