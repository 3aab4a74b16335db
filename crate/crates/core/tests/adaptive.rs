use sparsesep::adaptive::{adaptive_separate, AdaptiveBssConfig};
use sparsesep::eval::metric_report;
use sparsesep::learn::LearnMethod;
use sparsesep::mixing::{mix, random_mixing_matrix, MixtureSet, SourceSet};
use sparsesep::synth::{synthetic_sources, Synthetic};

fn scene(psnr: f64) -> (SourceSet, MixtureSet, nalgebra::DMatrix<f64>) {
    let s = synthetic_sources(&[Synthetic::Texture { seed: 1 }, Synthetic::Cartoon { seed: 2 }], 64, 64).unwrap();
    let a = random_mixing_matrix(4, 2, 3).unwrap();
    let x = mix(&s, &a, Some(psnr), 4).unwrap();
    (s, x, a.data().clone())
}

fn config(method: LearnMethod, block_size: usize, l_max: usize) -> AdaptiveBssConfig {
    AdaptiveBssConfig { method, block_size, l_max, n_atoms: 80, seed: 11, ..AdaptiveBssConfig::default() }
}

fn mean_rho(s: &SourceSet, x: &MixtureSet, a: &nalgebra::DMatrix<f64>, cfg: &AdaptiveBssConfig) -> f64 {
    let out = adaptive_separate(x, cfg).unwrap();
    let r = out.separation;
    metric_report(r.s_hat.data(), s.data(), Some((a, r.a_hat.data()))).unwrap().mean_abs_correlation
}

#[test]
fn both_learners_separate_texture_from_cartoon() {
    let (s, x, a) = scene(30.0);
    let ksvd = mean_rho(&s, &x, &a, &config(LearnMethod::Ksvd, 1, 30));
    let block = mean_rho(&s, &x, &a, &config(LearnMethod::SacBksvd, 3, 30));
    assert!(ksvd >= 0.9, "K-SVD rho {ksvd}");
    assert!(block >= 0.9, "block K-SVD rho {block}");
}

#[test]
fn singleton_blocks_match_plain_ksvd() {
    let (_, x, _) = scene(25.0);
    let plain = adaptive_separate(&x, &config(LearnMethod::Ksvd, 3, 8)).unwrap().separation;
    let block = adaptive_separate(&x, &config(LearnMethod::SacBksvd, 1, 8)).unwrap().separation;
    assert_eq!(plain.trace.len(), block.trace.len());
    for (p, b) in plain.trace.iter().zip(&block.trace) {
        assert!((p.residual - b.residual).abs() <= 1e-9 * p.residual.max(1.0));
    }
    let gap = (plain.a_hat.data() - block.a_hat.data()).amax();
    assert!(gap <= 1e-9, "mixing estimates differ by {gap}");
}

#[test]
fn mixing_columns_stay_unit_norm_and_trace_is_finite() {
    let (_, x, _) = scene(20.0);
    for l_max in [1, 4, 12] {
        let cfg = AdaptiveBssConfig { sigma_start: 0.0, ..config(LearnMethod::SacBksvd, 2, l_max) };
        let out = adaptive_separate(&x, &cfg).unwrap();
        let r = &out.separation;
        assert_eq!(r.trace.len(), l_max);
        assert!(r.trace.iter().all(|e| e.residual.is_finite() && e.delta.is_finite()));
        for c in r.a_hat.data().column_iter() {
            assert!((c.norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(out.dictionaries.len(), 2);
        assert!(out.blocks.iter().all(|b| b.max_block_size() <= 2));
    }
}

#[test]
fn threshold_decays_and_the_fit_improves() {
    let (_, x, _) = scene(30.0);
    let r = adaptive_separate(&x, &config(LearnMethod::Ksvd, 1, 20)).unwrap().separation;
    for w in r.trace.windows(2) {
        assert!(w[1].delta <= w[0].delta);
    }
    let (first, last) = (r.trace[0].residual, r.trace.last().unwrap().residual);
    assert!(last < first, "residual {first} -> {last}");
}

#[test]
fn image_shape_must_match_the_samples() {
    let (_, x, _) = scene(30.0);
    let cfg = AdaptiveBssConfig { image_h: 32, ..config(LearnMethod::Ksvd, 1, 2) };
    assert!(adaptive_separate(&x, &cfg).is_err());
    let cfg = AdaptiveBssConfig { n_sources: 5, ..config(LearnMethod::Ksvd, 1, 2) };
    assert!(adaptive_separate(&x, &cfg).is_err());
}
