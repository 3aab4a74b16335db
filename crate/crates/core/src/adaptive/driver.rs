use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{extract_patches, reassemble_patches, PatchGrid};
use crate::error::{arg_err, dim_err, Error, Result};
use crate::learn::{learn_round, BlockStructure, LearnMethod, LearnState};
use crate::linalg::{mad_sigma, median};
use crate::mca::{dominant_direction, SeparationResult, TraceEntry, DEAD_ENERGY};
use crate::mixing::{random_mixing_matrix, MixingMatrix, MixtureSet, SourceSet};
use crate::sparse::{PursuitLimits, SparseCode};
use crate::transforms::{matrix_to_row_major, overcomplete_dct, row_major_to_matrix, Dictionary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptiveBssConfig {
    pub n_sources: usize,
    pub image_h: usize,
    pub image_w: usize,
    pub patch: usize,
    pub stride: usize,
    /// Atoms per learned dictionary.
    pub n_atoms: usize,
    pub method: LearnMethod,
    /// Maximal block size `s` for SAC.
    pub block_size: usize,
    /// Sparsity `k`: atoms per patch for K-SVD, blocks per patch for block
    /// K-SVD.
    pub k_blocks: usize,
    /// Outer iterations.
    pub l_max: usize,
    /// Patch residual target is `error_gain * sigma * sqrt(N)`.
    pub error_gain: f64,
    /// Starting sigma as a multiple of the observation RMS. A large start
    /// lets only the dominant structure of each source through at first.
    pub sigma_start: f64,
    /// Per-iteration factor of the geometric sigma decay.
    pub sigma_decay: f64,
    /// Noise level of the mixtures; estimated from their finest diagonal
    /// Haar coefficients when absent.
    pub noise_sigma: Option<f64>,
    pub seed: u64,
}

impl Default for AdaptiveBssConfig {
    fn default() -> Self {
        Self {
            n_sources: 2,
            image_h: 64,
            image_w: 64,
            patch: 8,
            stride: 4,
            n_atoms: 96,
            method: LearnMethod::Ksvd,
            block_size: 3,
            k_blocks: 2,
            l_max: 50,
            error_gain: 1.15,
            sigma_start: 2.0,
            sigma_decay: 0.9,
            noise_sigma: None,
            seed: 0,
        }
    }
}

impl AdaptiveBssConfig {
    pub fn grid(&self) -> Result<PatchGrid> {
        PatchGrid::new(self.patch, self.patch, self.stride, self.image_h, self.image_w)
    }

    fn validate(&self, m: usize, t: usize) -> Result<()> {
        if self.n_sources == 0 || self.n_sources > m {
            return arg_err(format!("need 1..={m} sources, got {}", self.n_sources));
        }
        if self.image_h * self.image_w != t {
            return dim_err(format!(
                "{}x{} images do not match {t} samples",
                self.image_h, self.image_w
            ));
        }
        if self.l_max == 0 || self.block_size == 0 || self.k_blocks == 0 {
            return arg_err("iteration count, sparsity and block size must be at least 1");
        }
        if self.n_atoms < self.patch * self.patch {
            return arg_err("dictionary must have at least as many atoms as patch pixels");
        }
        if !(self.sigma_decay > 0.0 && self.sigma_decay <= 1.0) || !(self.error_gain >= 0.0) || !(self.sigma_start >= 0.0) {
            return arg_err("sigma decay must lie in (0, 1] and the error gain be nonnegative");
        }
        if matches!(self.noise_sigma, Some(s) if !(s >= 0.0)) {
            return arg_err("noise sigma must be nonnegative");
        }
        Ok(())
    }

    fn limits(&self, sigma: f64) -> PursuitLimits {
        let target = self.error_gain * sigma * ((self.patch * self.patch) as f64).sqrt();
        PursuitLimits {
            max_groups: self.k_blocks,
            residual_norm: (target > 0.0).then_some(target),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    pub separation: SeparationResult,
    pub dictionaries: Vec<Dictionary>,
    pub blocks: Vec<BlockStructure>,
    pub noise_sigma: f64,
}

/// Noise level from the median absolute deviation of the finest diagonal
/// Haar coefficients `(a - b - c + d) / 2` of each `2 x 2` cell.
pub fn estimate_noise_sigma(image: &DMatrix<f64>) -> f64 {
    let (h, w) = image.shape();
    let mut hh = Vec::with_capacity((h / 2) * (w / 2));
    for i in (0..h - h % 2).step_by(2) {
        for j in (0..w - w % 2).step_by(2) {
            hh.push((image[(i, j)] - image[(i, j + 1)] - image[(i + 1, j)] + image[(i + 1, j + 1)]) / 2.0);
        }
    }
    if hh.is_empty() {
        return 0.0;
    }
    mad_sigma(&hh)
}

/// Adaptive separation: MMCA where each source's sparsifying dictionary is
/// learned on patches of its current estimate.
///
/// Per outer iteration and source `j`: `E_j = Y - sum_{l != j} a_l x_l`,
/// `x_j = a_j^T E_j`; the mean-removed patches of `x_j` are recoded and the
/// dictionary updated; the reassembled denoised patches replace `x_j`; then
/// `a_j = E_j x_j^T` is normalized with its scale moved into `x_j`.
pub fn adaptive_separate(y: &MixtureSet, cfg: &AdaptiveBssConfig) -> Result<AdaptiveResult> {
    let (m, t) = y.data.shape();
    cfg.validate(m, t)?;
    let grid = cfg.grid()?;
    let n = cfg.n_sources;
    let y_energy = y.data.norm_squared();
    let sigma_hat = match cfg.noise_sigma {
        Some(s) => s,
        None => {
            let per_channel: Vec<f64> = y
                .data
                .row_iter()
                .map(|r| {
                    let v: Vec<f64> = r.iter().copied().collect();
                    estimate_noise_sigma(&row_major_to_matrix(&v, cfg.image_h, cfg.image_w))
                })
                .collect();
            median(&per_channel)
        }
    };

    let init = overcomplete_dct(cfg.patch * cfg.patch, cfg.n_atoms)?;
    let init = Dictionary::learned(init.atoms().clone())?;
    let mut a = random_mixing_matrix(m, n, cfg.seed)?.data().clone();
    let mut x = a.transpose() * &y.data;
    let n_patches = grid.n_patches();
    let mut states: Vec<LearnState> = (0..n)
        .map(|_| LearnState {
            dict: init.clone(),
            code: SparseCode::zeros(cfg.n_atoms, n_patches),
            iteration: 0,
            objective: f64::NAN,
        })
        .collect();
    let mut blocks = vec![BlockStructure::singletons(cfg.n_atoms); n];
    let mut dead_since: Vec<Option<usize>> = vec![None; n];
    let mut trace = Vec::with_capacity(cfg.l_max);

    let sigma_0 = cfg.sigma_start * (y_energy / (m * t) as f64).sqrt();
    for it in 0..cfg.l_max {
        let sigma = (sigma_0 * cfg.sigma_decay.powi(it as i32)).max(sigma_hat);
        let limits = cfg.limits(sigma);
        for j in 0..n {
            let aj: DVector<f64> = a.column(j).into_owned();
            let xj_old = x.row(j).into_owned();
            let e = &y.data - &a * &x + &aj * &xj_old;
            let proj: Vec<f64> = (e.tr_mul(&aj) / aj.norm_squared()).iter().copied().collect();
            let image = row_major_to_matrix(&proj, cfg.image_h, cfg.image_w);
            // Patch means stay in: the initial dictionary carries a DC atom.
            let patches = extract_patches(&image, &grid)?;
            let (next, b) = learn_round(&states[j], &patches, cfg.method, cfg.block_size, limits).map_err(|inner| {
                Error::Pursuit {
                    index: j,
                    iteration: it,
                    inner: Box::new(inner),
                }
            })?;
            let denoised = next.dict.atoms() * next.code.coeffs();
            states[j] = next;
            blocks[j] = b;
            let mut xj = matrix_to_row_major(&reassemble_patches(&denoised, &grid)?);
            let energy: f64 = xj.iter().map(|v| v * v).sum();
            let mut alive = energy > DEAD_ENERGY * y_energy;
            if alive {
                let fit = &e * DVector::from_column_slice(&xj) / energy;
                let norm = fit.norm();
                if norm > 0.0 && norm.is_finite() {
                    a.set_column(j, &(fit / norm));
                    xj.iter_mut().for_each(|v| *v *= norm);
                } else {
                    alive = false;
                }
            }
            if alive {
                dead_since[j] = None;
            } else {
                // Point the column at what is still unexplained so the source
                // can come back once sigma has dropped.
                xj.iter_mut().for_each(|v| *v = 0.0);
                if let Some(dir) = dominant_direction(&e, &a, j)? {
                    a.set_column(j, &dir);
                }
                dead_since[j].get_or_insert(it);
            }
            for (k, v) in xj.iter().enumerate() {
                x[(j, k)] = *v;
            }
        }
        let r = (&y.data - &a * &x).norm();
        trace.push(TraceEntry {
            iteration: it,
            delta: sigma,
            residual: r,
            objective: 0.5 * r * r,
        });
    }

    if y_energy > 0.0 {
        if let Some((index, iteration)) = dead_since.iter().enumerate().find_map(|(k, d)| d.map(|i| (k, i))) {
            return Err(Error::DeadSource { index, iteration });
        }
    }
    Ok(AdaptiveResult {
        separation: SeparationResult {
            a_hat: MixingMatrix::normalized(a)?,
            s_hat: SourceSet::new(x)?,
            trace,
            iterations_run: cfg.l_max,
            skipped_updates: Vec::new(),
        },
        dictionaries: states.into_iter().map(|s| s.dict).collect(),
        blocks,
        noise_sigma: sigma_hat,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::psnr;
    use crate::mixing::rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn noise_estimate_tracks_white_noise() {
        let mut r = rng(1);
        let img = DMatrix::<f64>::from_fn(64, 64, |_, _| {
            let z: f64 = StandardNormal.sample(&mut r);
            2.0 * z + 10.0
        });
        let s = estimate_noise_sigma(&img);
        assert!((s - 2.0).abs() < 0.2, "{s}");
    }

    #[test]
    fn single_channel_patch_sparse_image_is_kept() {
        // every 8x8 patch at a multiple-of-4 origin is a constant plus one
        // separable cosine atom of the initial dictionary
        let img = DMatrix::from_fn(32, 32, |r, c| {
            10.0 + 3.0 * (std::f64::consts::FRAC_PI_2 * r as f64).cos() * (std::f64::consts::FRAC_PI_2 * c as f64).cos()
        });
        let y = MixtureSet::new(DMatrix::from_row_slice(1, 32 * 32, &matrix_to_row_major(&img)));
        let cfg = AdaptiveBssConfig {
            n_sources: 1,
            image_h: 32,
            image_w: 32,
            l_max: 5,
            noise_sigma: Some(0.0),
            sigma_start: 0.0,
            ..Default::default()
        };
        let out = adaptive_separate(&y, &cfg).unwrap();
        let est: Vec<f64> = out.separation.s_hat.data().row(0).iter().copied().collect();
        let truth: Vec<f64> = y.data.row(0).iter().copied().collect();
        let peak = truth.iter().fold(0.0f64, |p, v| p.max(v.abs()));
        let sign = out.separation.a_hat.data()[(0, 0)];
        let est: Vec<f64> = est.iter().map(|v| v * sign).collect();
        assert!(psnr(&est, &truth, peak).unwrap() >= 50.0);
    }

    #[test]
    fn rejects_inconsistent_config() {
        let y = MixtureSet::new(DMatrix::zeros(2, 64));
        let cfg = AdaptiveBssConfig::default();
        assert!(adaptive_separate(&y, &cfg).is_err());
        let cfg = AdaptiveBssConfig {
            n_sources: 3,
            image_h: 8,
            image_w: 8,
            ..Default::default()
        };
        assert!(adaptive_separate(&y, &cfg).is_err());
    }
}
