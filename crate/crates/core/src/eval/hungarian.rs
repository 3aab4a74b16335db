use nalgebra::DMatrix;

use crate::error::{arg_err, Result};

/// Minimum-cost assignment for an `n x m` cost matrix with `n <= m`.
///
/// Returns `assignment[row] = column` and the total cost. Kuhn-Munkres with
/// row/column potentials, `O(n^2 m)`.
pub fn hungarian(cost: &DMatrix<f64>) -> Result<(Vec<usize>, f64)> {
    let (n, m) = cost.shape();
    if n > m {
        return arg_err(format!("assignment needs rows <= columns, got {n} x {m}"));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return arg_err("assignment costs must be finite");
    }
    // 1-based arrays; index 0 is the virtual start column
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if owner[j] != 0 {
            assignment[owner[j] - 1] = j - 1;
        }
    }
    let total = assignment.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
    Ok((assignment, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::rng;
    use rand::Rng;

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
    fn small_fixed_case() {
        let c = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0]);
        let (a, total) = hungarian(&c).unwrap();
        assert_eq!(a, vec![1, 0, 2]);
        assert_eq!(total, 5.0);
    }

    #[test]
    fn equals_exhaustive_minimum() {
        let mut r = rng(2024);
        for _ in 0..1000 {
            let n = r.gen_range(1..=6);
            let c = DMatrix::from_fn(n, n, |_, _| r.gen_range(-5.0..5.0));
            let (a, total) = hungarian(&c).unwrap();
            let mut sorted = a.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            let best = permutations(n)
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| c[(i, j)]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            assert!((total - best).abs() < 1e-9, "{total} vs {best}");
        }
    }

    #[test]
    fn rectangular_and_invalid() {
        let c = DMatrix::from_row_slice(2, 3, &[5.0, 1.0, 9.0, 1.0, 5.0, 0.5]);
        assert_eq!(hungarian(&c).unwrap().0, vec![1, 2]);
        assert!(hungarian(&c.transpose()).is_err());
        assert!(hungarian(&DMatrix::from_element(1, 1, f64::NAN)).is_err());
    }
}
