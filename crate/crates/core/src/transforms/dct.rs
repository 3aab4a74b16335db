use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::{Dictionary, DictionaryKind};
use crate::error::{arg_err, Result};

/// Orthonormal DCT-II basis; atom `k` is `c_k cos(pi (2n+1) k / 2N)`.
pub fn dct_basis(n: usize) -> Dictionary {
    assert!(n >= 1, "DCT size must be positive");
    let nf = n as f64;
    let atoms = DMatrix::from_fn(n, n, |i, k| {
        let c = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        c * (PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * nf)).cos()
    });
    Dictionary::from_parts_unchecked(atoms, DictionaryKind::OrthonormalBasis)
}

/// Sampled-cosine frame of `k` atoms in dimension `n`: atom `j` samples
/// `cos(pi j i / k)`, non-constant atoms have their mean removed, all are
/// normalized.
fn odct_1d(n: usize, k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, k, |i, j| (PI * (i * j) as f64 / k as f64).cos());
    for j in 0..k {
        let mut col = m.column_mut(j);
        if j > 0 {
            let mean = col.sum() / n as f64;
            col.add_scalar_mut(-mean);
        }
        let norm = col.norm();
        col /= norm;
    }
    m
}

fn exact_sqrt(x: usize) -> Option<usize> {
    let r = (x as f64).sqrt().round() as usize;
    (r * r == x).then_some(r)
}

/// Overcomplete DCT dictionary with `k >= n` unit-norm atoms.
///
/// When `n` is a square `p*p` (vectorized `p x p` patches) and `k` factors as
/// `k1 * k2` with both factors `>= p`, the dictionary is the Kronecker product
/// of two 1-D frames, picking the most balanced factor pair (64x256 uses
/// 16x16, 64x96 uses 8x12). Otherwise a 1-D frame is used.
pub fn overcomplete_dct(n: usize, k: usize) -> Result<Dictionary> {
    if n == 0 {
        return arg_err("dictionary dimension must be positive");
    }
    if k < n {
        return arg_err(format!("overcomplete DCT needs K >= N, got K={k}, N={n}"));
    }
    let atoms = match exact_sqrt(n).and_then(|p| balanced_factors(k, p).map(|f| (p, f))) {
        Some((p, (k1, k2))) => {
            let a = odct_1d(p, k1);
            let b = odct_1d(p, k2);
            // column-major patch vectors: index = row + p * col, so the
            // row-direction frame is the fast (right) Kronecker factor.
            b.kronecker(&a)
        }
        None => odct_1d(n, k),
    };
    let mut atoms = atoms;
    for mut col in atoms.column_iter_mut() {
        let norm = col.norm();
        col /= norm;
    }
    Dictionary::new(atoms, DictionaryKind::Overcomplete)
}

fn balanced_factors(k: usize, p: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for k1 in p..=k {
        if k % k1 != 0 {
            continue;
        }
        let k2 = k / k1;
        if k2 < p || k1 > k2 {
            continue;
        }
        best = Some((k1, k2));
    }
    best
}
