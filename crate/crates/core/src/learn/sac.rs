use super::BlockStructure;
use crate::error::{arg_err, Result};
use crate::sparse::SparseCode;

/// Fixed-size bitset over signal indices.
#[derive(Clone)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(len: usize) -> Self {
        Bits(vec![0; len.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn union_with(&mut self, other: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a |= *b;
        }
    }

    fn intersection_len(&self, other: &Bits) -> usize {
        self.0.iter().zip(&other.0).map(|(a, b)| (a & b).count_ones() as usize).sum()
    }
}

/// Sparse agglomerative clustering of the dictionary atoms.
///
/// Starts from singleton blocks and repeatedly merges the two blocks whose
/// row supports in `code` share the most signals, as long as the merged
/// size stays within `max_block_size`. Ties go to the lowest `(i, j)` pair of
/// block positions; the lower block absorbs the higher one, so blocks stay
/// ordered by their smallest atom. Stops when no admissible pair shares a
/// signal.
pub fn sac_cluster(code: &SparseCode, max_block_size: usize) -> Result<BlockStructure> {
    if max_block_size == 0 {
        return arg_err("maximal block size must be at least 1");
    }
    let k = code.n_atoms();
    let l = code.n_signals();
    let mut blocks: Vec<Vec<usize>> = (0..k).map(|a| vec![a]).collect();
    let mut supports: Vec<Bits> = (0..k)
        .map(|a| {
            let mut b = Bits::new(l);
            for j in code.row_support(a) {
                b.set(j);
            }
            b
        })
        .collect();
    // sim[i][j] for i < j, kept in sync with the current block list
    let mut sim: Vec<Vec<usize>> = (0..k)
        .map(|i| (0..k).map(|j| if j > i { supports[i].intersection_len(&supports[j]) } else { 0 }).collect())
        .collect();

    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        for i in 0..blocks.len() {
            for j in i + 1..blocks.len() {
                if blocks[i].len() + blocks[j].len() > max_block_size {
                    continue;
                }
                let s = sim[i][j];
                if s > 0 && best.map_or(true, |b| s > b.2) {
                    best = Some((i, j, s));
                }
            }
        }
        let Some((i, j, _)) = best else { break };
        let absorbed = blocks.remove(j);
        blocks[i].extend(absorbed);
        blocks[i].sort_unstable();
        let sj = supports.remove(j);
        supports[i].union_with(&sj);
        sim.remove(j);
        for row in sim.iter_mut() {
            row.remove(j);
        }
        for other in 0..blocks.len() {
            if other == i {
                continue;
            }
            let s = supports[i].intersection_len(&supports[other]);
            let (a, b) = if other < i { (other, i) } else { (i, other) };
            sim[a][b] = s;
        }
    }
    BlockStructure::from_blocks(k, blocks, max_block_size)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::rng;
    use nalgebra::DMatrix;
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::BTreeSet;

    fn code_from_rows(l: usize, rows: &[&[usize]]) -> SparseCode {
        let mut m = DMatrix::zeros(rows.len(), l);
        for (a, r) in rows.iter().enumerate() {
            for &j in r.iter() {
                m[(a, j)] = 1.0;
            }
        }
        SparseCode::from_dense(m)
    }

    /// Straightforward reference: recompute every pairwise intersection
    /// from sets at each step.
    fn reference(code: &SparseCode, s: usize) -> Vec<Vec<usize>> {
        let mut blocks: Vec<(Vec<usize>, BTreeSet<usize>)> = (0..code.n_atoms())
            .map(|a| (vec![a], code.row_support(a).into_iter().collect()))
            .collect();
        loop {
            let mut best = (0, 0, 0);
            for i in 0..blocks.len() {
                for j in i + 1..blocks.len() {
                    if blocks[i].0.len() + blocks[j].0.len() > s {
                        continue;
                    }
                    let c = blocks[i].1.intersection(&blocks[j].1).count();
                    if c > best.2 {
                        best = (i, j, c);
                    }
                }
            }
            if best.2 == 0 {
                break;
            }
            let (atoms, set) = blocks.remove(best.1);
            blocks[best.0].0.extend(atoms);
            blocks[best.0].0.sort_unstable();
            blocks[best.0].1.extend(set);
        }
        blocks.into_iter().map(|b| b.0).collect()
    }

    #[test]
    fn rows_sharing_two_signals_merge_first() {
        // atoms 0 and 2 share signals {0, 3}; atoms 1 and 3 share {1}
        let code = code_from_rows(5, &[&[0, 3], &[1, 4], &[0, 3], &[1, 2]]);
        let d = sac_cluster(&code, 2).unwrap();
        assert_eq!(d.blocks(), &[vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn size_one_gives_singletons() {
        let code = code_from_rows(3, &[&[0, 1], &[0, 1], &[2]]);
        assert_eq!(sac_cluster(&code, 1).unwrap(), BlockStructure::from_blocks(3, vec![vec![0], vec![1], vec![2]], 1).unwrap());
    }

    #[test]
    fn disjoint_supports_never_merge() {
        let code = code_from_rows(4, &[&[0], &[1], &[2], &[3]]);
        assert_eq!(sac_cluster(&code, 4).unwrap().n_blocks(), 4);
    }

    #[test]
    fn matches_reference_on_random_codes() {
        let mut r = rng(77);
        for trial in 0..200 {
            let k = r.gen_range(2..14);
            let l = r.gen_range(1..90);
            let s = r.gen_range(1..5);
            let p = r.gen_range(0.05..0.5);
            let m = DMatrix::from_fn(k, l, |_, _| if r.gen_bool(p) { 1.0 } else { 0.0 });
            let code = SparseCode::from_dense(m);
            let got = sac_cluster(&code, s).unwrap();
            assert_eq!(got.blocks(), reference(&code, s).as_slice(), "trial {trial}");
        }
    }

    proptest! {
        #[test]
        fn output_is_a_partition_within_size(
            k in 1usize..10, l in 1usize..40, s in 1usize..5, seed in 0u64..1000
        ) {
            let mut r = rng(seed);
            let m = DMatrix::from_fn(k, l, |_, _| if r.gen_bool(0.3) { 1.0 } else { 0.0 });
            let d = sac_cluster(&SparseCode::from_dense(m), s).unwrap();
            let mut seen: Vec<usize> = d.blocks().iter().flatten().copied().collect();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..k).collect::<Vec<_>>());
            prop_assert!(d.blocks().iter().all(|b| !b.is_empty() && b.len() <= s));
        }
    }
}
