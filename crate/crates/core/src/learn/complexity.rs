use serde::Serialize;

/// Closed-form operation-count estimates for one learning round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ComplexityReport {
    /// `(k s)^2 K + 2 N K`: K-SVD with `k s` active atoms per signal.
    pub ksvd_flops_estimate: u128,
    /// `k^2 K + 2 N K`: block K-SVD with `k` active blocks.
    pub bksvd_flops_estimate: u128,
    /// `K^3`: agglomerative clustering.
    pub sac_ops_estimate: u128,
}

/// `n` signal dimension, `k_atoms` dictionary size, `k` block sparsity,
/// `s` maximal block size.
pub fn complexity_report(n: usize, k_atoms: usize, k: usize, s: usize) -> ComplexityReport {
    let (n, kk, k, s) = (n as u128, k_atoms as u128, k as u128, s as u128);
    ComplexityReport {
        ksvd_flops_estimate: (k * s).pow(2) * kk + 2 * n * kk,
        bksvd_flops_estimate: k.pow(2) * kk + 2 * n * kk,
        sac_ops_estimate: kk.pow(3),
    }
}
