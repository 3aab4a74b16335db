use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Dictionary, DictionaryKind};
use crate::error::{arg_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wavelet {
    Haar,
    /// Daubechies with four vanishing moments (8 taps).
    Db4,
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

// Reconstruction low-pass filter.
const DB4: [f64; 8] = [
    0.230_377_813_308_855_23,
    0.714_846_570_552_541_5,
    0.630_880_767_929_590_4,
    -0.027_983_769_416_983_85,
    -0.187_034_811_718_881_14,
    0.030_841_381_835_986_965,
    0.032_883_011_666_982_945,
    -0.010_597_401_784_997_278,
];

impl Wavelet {
    fn lowpass(self) -> Vec<f64> {
        match self {
            Wavelet::Haar => vec![FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            Wavelet::Db4 => DB4.to_vec(),
        }
    }
}

/// One periodized analysis step on the first `len` entries of `x`:
/// approximation coefficients go to the front half, details to the back.
fn analysis_step(x: &mut [f64], len: usize, h: &[f64], g: &[f64], scratch: &mut Vec<f64>) {
    let half = len / 2;
    scratch.clear();
    scratch.resize(len, 0.0);
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for (n, (hn, gn)) in h.iter().zip(g).enumerate() {
            let v = x[(2 * k + n) % len];
            a += hn * v;
            d += gn * v;
        }
        scratch[k] = a;
        scratch[half + k] = d;
    }
    x[..len].copy_from_slice(scratch);
}

/// Orthonormal periodized wavelet basis of size `n` with `levels`
/// decomposition levels.
///
/// Coefficients are ordered `[approx_J, detail_J, ..., detail_1]`; the atoms
/// (columns) are the synthesis functions, so analysis is `Phi^T y`.
pub fn dwt_basis(n: usize, wavelet: Wavelet, levels: usize) -> Result<Dictionary> {
    if n == 0 || !n.is_power_of_two() {
        return arg_err(format!("DWT size must be a power of two, got {n}"));
    }
    let max_levels = n.trailing_zeros() as usize;
    if levels > max_levels {
        return arg_err(format!("{levels} levels exceed log2({n}) = {max_levels}"));
    }
    let h = wavelet.lowpass();
    let taps = h.len();
    let g: Vec<f64> = (0..taps)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            s * h[taps - 1 - i]
        })
        .collect();

    // Column j of `analysis` is the transform of the unit vector e_j.
    let mut analysis = DMatrix::zeros(n, n);
    let mut scratch = Vec::with_capacity(n);
    let mut x = vec![0.0; n];
    for j in 0..n {
        x.iter_mut().for_each(|v| *v = 0.0);
        x[j] = 1.0;
        let mut len = n;
        for _ in 0..levels {
            analysis_step(&mut x, len, &h, &g, &mut scratch);
            len /= 2;
        }
        for (i, v) in x.iter().enumerate() {
            analysis[(i, j)] = *v;
        }
    }
    Dictionary::new(analysis.transpose(), DictionaryKind::OrthonormalBasis)
}

/// Full-depth decomposition level count for size `n`.
pub fn full_levels(n: usize) -> usize {
    n.trailing_zeros() as usize
}
