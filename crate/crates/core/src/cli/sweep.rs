use rayon::prelude::*;
use serde_json::json;

use super::{create_dir, out_err, write_manifest, CliError, CliResult, Command, Ctx, SweepArgs};
use crate::adaptive::{extract_patches, PatchGrid};
use crate::config::{load_sources, separate, ExperimentSpec, GridSpec, LoadedSources};
use crate::error::Result;
use crate::eval::metric_report;
use crate::learn::{learn_dictionary, representation_error, LearnMethod, LearnParams};
use crate::mixing::{mix, random_mixing_matrix};
use crate::transforms::row_major_to_matrix;

pub(crate) fn sweep(mut a: SweepArgs, ctx: Ctx) -> CliResult<()> {
    let mut spec = match (&a.resolved, &a.spec) {
        (Some(s), _) => s.clone(),
        (None, Some(p)) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
            ExperimentSpec::from_json(&text)?
        }
        (None, None) => return Err(CliError::Validation("--spec is required".into())),
    };
    spec.validate()?;
    spec.seed = ctx.seed(a.seed, spec.seed)?;
    let out = a
        .out
        .clone()
        .or_else(|| spec.output_dir.clone())
        .ok_or_else(|| CliError::Validation("no output directory: pass --out or set output_dir".into()))?;
    if a.jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    a.seed = Some(spec.seed);
    a.out = Some(out.clone());
    a.resolved = Some(spec.clone());

    let loaded = load_sources(&spec.sources, spec.size.map(|s| (s.height, s.width)))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build().map_err(out_err)?;
    let rows = pool.install(|| match &spec.grid {
        Some(g) => grid_rows(&spec, g, &loaded),
        None => solver_rows(&spec, &loaded),
    })?;

    create_dir(&out)?;
    let path = out.join("sweep.csv");
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(&path)
        .map_err(|e| out_err(format!("{}: {e}", path.display())))?;
    for r in &rows {
        w.write_record(r).map_err(out_err)?;
    }
    w.flush().map_err(out_err)?;
    let info = json!({ "cells": rows.len(), "height": loaded.height, "width": loaded.width });
    write_manifest(&out, Command::Sweep(a), info)
}

fn status_row(mut head: Vec<String>, outcome: Result<Vec<f64>>, width: usize) -> Vec<String> {
    match outcome {
        Ok(values) => {
            head.push("ok".into());
            head.extend(values.iter().map(f64::to_string));
            head.push(String::new());
        }
        Err(e) => {
            head.push("failed".into());
            head.extend(std::iter::repeat(String::new()).take(width));
            head.push(e.to_string());
        }
    }
    head
}

/// Rows `name, method, psnr, status, mean |rho|, C_A, mean PSNR, error`,
/// level-major. Every level shares the mixing matrix; noise draws differ.
/// Solvers start from their own random mixing matrix.
fn solver_rows(spec: &ExperimentSpec, loaded: &LoadedSources) -> CliResult<Vec<Vec<String>>> {
    let s = &loaded.sources;
    let a_true = random_mixing_matrix(spec.channels, s.n_sources(), spec.seed)?;
    let mixtures = spec
        .psnr
        .iter()
        .enumerate()
        .map(|(i, &p)| mix(s, &a_true, Some(p), spec.seed.wrapping_add(1 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let cells: Vec<(usize, usize)> =
        (0..spec.psnr.len()).flat_map(|l| (0..spec.solvers.len()).map(move |k| (l, k))).collect();
    let rows = cells
        .par_iter()
        .map(|&(l, k)| {
            let solver = &spec.solvers[k];
            let mut cfg = solver.config.clone();
            cfg.n_sources = s.n_sources();
            // distinct from the seeds of the true mixing matrix and the noise
            cfg.seed = spec.seed.wrapping_add(1 + spec.psnr.len() as u64);
            (cfg.image_h, cfg.image_w) =
                if loaded.height > 1 { (Some(loaded.height), Some(loaded.width)) } else { (None, None) };
            let outcome = separate(solver.method, &mixtures[l], &cfg).and_then(|r| {
                let res = r.result;
                let rep = metric_report(res.s_hat.data(), s.data(), Some((a_true.data(), res.a_hat.data())))?;
                let mean_psnr = rep.psnr_db.iter().sum::<f64>() / rep.psnr_db.len() as f64;
                Ok(vec![rep.mean_abs_correlation, rep.mixing_criterion.unwrap_or(f64::NAN), mean_psnr])
            });
            let head = vec![spec.name.clone(), solver.method.to_string(), spec.psnr[l].to_string()];
            status_row(head, outcome, 3)
        })
        .collect();
    Ok(rows)
}

/// Rows `name, s, k, status, block K-SVD MSE, K-SVD MSE, blocks, error` in
/// block-size-major order. MSE is per patch entry; K-SVD uses `k` atoms.
fn grid_rows(spec: &ExperimentSpec, g: &GridSpec, loaded: &LoadedSources) -> CliResult<Vec<Vec<String>>> {
    let (h, w) = (loaded.height, loaded.width);
    let mut img = vec![0.0; h * w];
    for j in 0..loaded.sources.n_sources() {
        for (o, v) in img.iter_mut().zip(loaded.sources.row(j)) {
            *o += v;
        }
    }
    let grid = PatchGrid::new(g.patch, g.patch, g.stride, h, w)?;
    let y = extract_patches(&row_major_to_matrix(&img, h, w), &grid)?;
    let entries = y.len() as f64;
    let learn = |method, k, s| -> Result<(f64, usize)> {
        let o = learn_dictionary(&y, method, &LearnParams::new(g.n_atoms, k, s, g.iterations))?;
        let e = representation_error(o.state.dict.atoms(), o.state.code.coeffs(), &y);
        Ok((e * e / entries, o.blocks.n_blocks()))
    };
    let ksvd: Vec<Result<(f64, usize)>> = g.sparsities.par_iter().map(|&k| learn(LearnMethod::Ksvd, k, 1)).collect();
    let cells: Vec<(usize, usize)> =
        (0..g.block_sizes.len()).flat_map(|i| (0..g.sparsities.len()).map(move |j| (i, j))).collect();
    let rows = cells
        .par_iter()
        .map(|&(i, j)| {
            let (s, k) = (g.block_sizes[i], g.sparsities[j]);
            let outcome = learn(LearnMethod::SacBksvd, k, s).and_then(|(mse, blocks)| {
                let (kmse, _) = ksvd[j].as_ref().map_err(|e| crate::Error::InvalidArgument(format!("k-svd: {e}")))?;
                Ok(vec![mse, *kmse, blocks as f64])
            });
            status_row(vec![spec.name.clone(), s.to_string(), k.to_string()], outcome, 3)
        })
        .collect();
    Ok(rows)
}
