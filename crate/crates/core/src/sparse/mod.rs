//! Thresholding and greedy pursuit primitives.

mod code;
mod pursuit;
mod schedule;
mod threshold;

pub use code::{SparseCode, SparseColumn};
pub use pursuit::{
    block_omp, block_omp_with, omp, omp_with, sparse_code, OmpStop, PursuitLimits,
};
pub use schedule::ThresholdSchedule;
pub use threshold::{hard_threshold, soft_threshold, ThresholdKind};
