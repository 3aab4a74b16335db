//! Baselines and separation metrics: FastICA, correlation, the mixing matrix
//! criterion, Hungarian alignment, MSE and PSNR.

mod fastica;
mod hungarian;
mod metrics;

pub use fastica::{fastica, fastica_whitened, FastIcaConfig, Nonlinearity};
pub use hungarian::hungarian;
pub use metrics::{align, correlation, metric_report, mixing_criterion, mse, psnr, Alignment, AlignmentMap, MetricReport};
