//! Instantaneous linear mixtures `X = A S + N` and their preprocessing.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::linalg::{fix_sign, sorted_symmetric_eigen};

/// Seedable generator used by every stochastic operation in the crate.
pub type Rng = ChaCha8Rng;

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` sources by `t` samples, one source per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    data: DMatrix<f64>,
}

impl SourceSet {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return dim_err("source set needs at least one source and one sample");
        }
        if data.iter().any(|x| !x.is_finite()) {
            return arg_err("source set contains non-finite entries");
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != t) {
            return dim_err("source rows have different lengths");
        }
        Self::new(DMatrix::from_fn(rows.len(), t, |i, j| rows[i][j]))
    }

    pub fn n_sources(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.data.row(i).iter().cloned().collect()
    }

    /// Largest absolute sample value.
    pub fn peak(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// `m x n` mixing matrix with unit-norm columns and `m >= n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    data: DMatrix<f64>,
}

impl MixingMatrix {
    /// Normalizes the columns of `data` to unit length.
    pub fn normalized(mut data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < data.ncols() {
            return arg_err(format!(
                "underdetermined mixing ({} channels < {} sources) is not supported",
                data.nrows(),
                data.ncols()
            ));
        }
        if data.ncols() == 0 {
            return dim_err("mixing matrix has no columns");
        }
        for (j, mut col) in data.column_iter_mut().enumerate() {
            let n = col.norm();
            if n == 0.0 || !n.is_finite() {
                return arg_err(format!("mixing column {j} has zero or non-finite norm"));
            }
            col /= n;
        }
        Ok(Self { data })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            data: DMatrix::identity(n, n),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_sources(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.data.column_iter().map(|c| c.norm()).collect()
    }
}

/// Observed `m x t` mixtures and the standard deviation of the added noise.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSet {
    pub data: DMatrix<f64>,
    pub noise_sigma: f64,
}

impl MixtureSet {
    pub fn new(data: DMatrix<f64>) -> Self {
        Self {
            data,
            noise_sigma: 0.0,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.data.ncols()
    }
}

/// Noise standard deviation giving `psnr_db` against `peak`.
pub fn sigma_for_psnr(peak: f64, psnr_db: f64) -> f64 {
    peak * 10f64.powf(-psnr_db / 20.0)
}

/// Mixes `sources` through `a`, adding white Gaussian noise when `psnr_db` is
/// given. The noise level is set from the peak absolute source value.
pub fn mix(
    sources: &SourceSet,
    a: &MixingMatrix,
    psnr_db: Option<f64>,
    seed: u64,
) -> Result<MixtureSet> {
    if a.n_sources() != sources.n_sources() {
        return dim_err(format!(
            "mixing matrix has {} columns but there are {} sources",
            a.n_sources(),
            sources.n_sources()
        ));
    }
    let mut data = a.data() * sources.data();
    let mut noise_sigma = 0.0;
    if let Some(p) = psnr_db {
        if !(p > 0.0) || !p.is_finite() {
            return arg_err(format!("psnr must be positive, got {p}"));
        }
        noise_sigma = sigma_for_psnr(sources.peak(), p);
        let mut rng = rng(seed);
        for x in data.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *x += noise_sigma * z;
        }
    }
    Ok(MixtureSet { data, noise_sigma })
}

/// Random `m x n` mixing matrix: i.i.d. standard normal entries, unit-norm
/// columns, each column's largest-magnitude entry made positive.
pub fn random_mixing_matrix(m: usize, n: usize, seed: u64) -> Result<MixingMatrix> {
    if n == 0 || m < n {
        return arg_err(format!("need m >= n >= 1, got m={m}, n={n}"));
    }
    let mut rng = rng(seed);
    let mut data = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
    for j in 0..n {
        let mut col: Vec<f64> = data.column(j).iter().cloned().collect();
        fix_sign(&mut col);
        data.set_column(j, &DVector::from_vec(col));
    }
    MixingMatrix::normalized(data)
}

/// Removes the mean of every row; returns the centered data and the means.
pub fn center(x: &MixtureSet) -> (MixtureSet, DVector<f64>) {
    let t = x.n_samples().max(1) as f64;
    let mean = DVector::from_iterator(x.n_channels(), x.data.row_iter().map(|r| r.sum() / t));
    (
        MixtureSet {
            data: subtract_means(&x.data, &mean),
            noise_sigma: x.noise_sigma,
        },
        mean,
    )
}

/// Sample covariance `X X^T / t` of (already centered) rows.
pub fn covariance(x: &DMatrix<f64>) -> DMatrix<f64> {
    let t = x.ncols().max(1) as f64;
    (x * x.transpose()) / t
}

/// Linear map that whitens centered data.
#[derive(Debug, Clone, PartialEq)]
pub struct WhiteningTransform {
    pub mean: DVector<f64>,
    /// `k x m`; `k = m` for full whitening, fewer rows when reduced.
    pub matrix: DMatrix<f64>,
    /// Eigenvectors retained, `m x k`.
    pub eigenvectors: DMatrix<f64>,
    /// Eigenvalues retained, descending.
    pub eigenvalues: DVector<f64>,
}

impl WhiteningTransform {
    pub fn apply(&self, x: &MixtureSet) -> Result<MixtureSet> {
        if x.n_channels() != self.mean.len() {
            return dim_err("whitening transform fitted on a different channel count");
        }
        let centered = subtract_means(&x.data, &self.mean);
        Ok(MixtureSet {
            data: &self.matrix * centered,
            noise_sigma: x.noise_sigma,
        })
    }

    /// Maps whitened-space vectors back to the observation space.
    pub fn dewhitening(&self) -> DMatrix<f64> {
        let scale = DMatrix::from_diagonal(&self.eigenvalues.map(f64::sqrt));
        &self.eigenvectors * scale
    }
}

fn subtract_means(x: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut data = x.clone();
    for (i, mut row) in data.row_iter_mut().enumerate() {
        row.add_scalar_mut(-mean[i]);
    }
    data
}

/// Whitens `x` through the eigen-decomposition `C = E L E^T` of its sample
/// covariance: the transform is `L^{-1/2} E^T`. The input must be centered.
pub fn whiten(x: &MixtureSet) -> Result<(MixtureSet, WhiteningTransform)> {
    whiten_reduced(x, x.n_channels())
}

/// Whitening restricted to the `k` leading principal directions.
pub fn whiten_reduced(x: &MixtureSet, k: usize) -> Result<(MixtureSet, WhiteningTransform)> {
    let m = x.n_channels();
    if k == 0 || k > m {
        return arg_err(format!("cannot keep {k} of {m} whitened components"));
    }
    let (centered, mean) = center(x);
    let cov = covariance(&centered.data);
    let (values, mut vectors) = sorted_symmetric_eigen(&cov);
    let largest = values[0].max(0.0);
    let eps = 1e-10 * largest;
    for i in 0..k {
        if values[i] <= eps || largest == 0.0 {
            return Err(Error::RankDeficientCovariance {
                eigenvalue: values[i],
                threshold: eps,
            });
        }
    }
    for j in 0..m {
        let mut col: Vec<f64> = vectors.column(j).iter().cloned().collect();
        fix_sign(&mut col);
        vectors.set_column(j, &DVector::from_vec(col));
    }
    let e = vectors.columns(0, k).into_owned();
    let lam = values.rows(0, k).into_owned();
    let inv_sqrt = DMatrix::from_diagonal(&lam.map(|l| 1.0 / l.sqrt()));
    let matrix = inv_sqrt * e.transpose();
    let data = &matrix * &centered.data;
    Ok((
        MixtureSet {
            data,
            noise_sigma: x.noise_sigma,
        },
        WhiteningTransform {
            mean,
            matrix,
            eigenvectors: e,
            eigenvalues: lam,
        },
    ))
}
