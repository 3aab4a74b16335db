//! Adaptive separation: MMCA with per-source dictionaries learned on image
//! patches by K-SVD or by SAC plus block K-SVD.

mod driver;
mod patches;

pub use driver::{adaptive_separate, estimate_noise_sigma, AdaptiveBssConfig, AdaptiveResult};
pub use patches::{extract_patches, reassemble_patches, PatchGrid};
