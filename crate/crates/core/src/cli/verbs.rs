use std::fs::OpenOptions;
use std::path::Path;

use nalgebra::DMatrix;
use serde_json::json;

use super::{
    create_dir, out_err, write_manifest, CliError, CliResult, Command, Ctx, DictLearnArgs, DictRenderArgs,
    EvaluateArgs, MixArgs, SeparateArgs,
};
use crate::adaptive::{extract_patches, PatchGrid};
use crate::config::{is_csv, load_sources, separate as run_method, SeparateConfig};
use crate::error::Error;
use crate::eval::{metric_report, MetricReport};
use crate::io::{
    atom_mosaic, read_blocks, read_csv_matrix, read_pgm, write_blocks, write_csv_matrix, write_dictionary,
    write_pgm, GrayImage, PixelScaling,
};
use crate::learn::{learn_dictionary, BlockStructure, DictionaryInit, LearnParams};
use crate::mca::TraceEntry;
use crate::mixing::{mix as mix_sources, random_mixing_matrix, MixtureSet};
use crate::transforms::row_major_to_matrix;

/// Bad arguments surface as validation errors, everything else a solver
/// reports as a solver failure.
pub(crate) fn classify(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(_) | Error::Dimension(_) | Error::Parse(_) => CliError::Validation(e.to_string()),
        other => CliError::solver(other),
    }
}

fn csv_out(path: &Path, m: &DMatrix<f64>) -> CliResult<()> {
    write_csv_matrix(path, m).map_err(|e| out_err(format!("{}: {e}", path.display())))
}

fn pgm_out(path: &Path, img: &GrayImage, scaling: PixelScaling) -> CliResult<()> {
    write_pgm(path, img, scaling).map_err(|e| out_err(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn write_rows(path: &Path, rows: &[Vec<String>], append: bool) -> CliResult<()> {
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(path)
        .map_err(|e| out_err(format!("{}: {e}", path.display())))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    for r in rows {
        w.write_record(r).map_err(out_err)?;
    }
    w.flush().map_err(out_err)
}

/// Image rows of `m` as `h x w` images, one file per row.
fn write_row_images(dir: &Path, prefix: &str, m: &DMatrix<f64>, h: usize, w: usize, scaling: PixelScaling) -> CliResult<()> {
    if h < 2 {
        return Ok(());
    }
    for (i, row) in m.row_iter().enumerate() {
        let img = GrayImage::new(h, w, row.iter().copied().collect())?;
        pgm_out(&dir.join(format!("{prefix}_{i:02}.pgm")), &img, scaling)?;
    }
    Ok(())
}

pub(crate) fn mix(mut a: MixArgs, ctx: Ctx) -> CliResult<()> {
    let seed = ctx.seed(a.seed, 0)?;
    a.seed = Some(seed);
    let loaded = load_sources(&a.sources, a.size.map(|s| (s.height, s.width)))?;
    let n = loaded.sources.n_sources();
    if a.channels < n {
        return Err(CliError::Validation(format!("{} channels cannot carry {n} sources", a.channels)));
    }
    let mixing = random_mixing_matrix(a.channels, n, seed)?;
    let x = mix_sources(&loaded.sources, &mixing, a.psnr, seed.wrapping_add(1))?;
    create_dir(&a.out)?;
    csv_out(&a.out.join("mixtures.csv"), &x.data)?;
    csv_out(&a.out.join("A.csv"), mixing.data())?;
    csv_out(&a.out.join("S.csv"), loaded.sources.data())?;
    // pixel-valued inputs keep their gray levels so noiseless round trips
    // are exact; anything else is stretched for viewing
    let scaling = if loaded.pixel_valued { PixelScaling::Clamp } else { PixelScaling::MinMax };
    write_row_images(&a.out, "mixture", &x.data, loaded.height, loaded.width, scaling)?;
    let info = json!({
        "height": loaded.height,
        "width": loaded.width,
        "sources": n,
        "channels": a.channels,
        "noise_sigma": x.noise_sigma,
    });
    let out = a.out.clone();
    write_manifest(&out, Command::Mix(a), info)
}

/// Mixtures from one CSV (a row per channel) or one image per channel; the
/// image size when images were given.
fn load_mixtures(inputs: &[std::path::PathBuf]) -> CliResult<(MixtureSet, Option<(usize, usize)>)> {
    if let [single] = inputs {
        if is_csv(single) {
            return Ok((MixtureSet::new(read_csv_matrix(single)?), None));
        }
    }
    let mut rows = Vec::with_capacity(inputs.len());
    let mut dims = None;
    for p in inputs {
        if is_csv(p) {
            return Err(CliError::Validation("give either one CSV file or image files".into()));
        }
        let img = read_pgm(p)?;
        match dims {
            Some(d) if d != (img.height, img.width) => {
                return Err(CliError::Validation(format!("{} differs in size from the first image", p.display())))
            }
            _ => dims = Some((img.height, img.width)),
        }
        rows.push(img.pixels);
    }
    let t = rows[0].len();
    let data = DMatrix::from_row_iterator(rows.len(), t, rows.into_iter().flatten());
    Ok((MixtureSet::new(data), dims))
}

fn metric_rows(label: &str, r: &MetricReport) -> Vec<Vec<String>> {
    let c_a = r.mixing_criterion.map(|c| c.to_string()).unwrap_or_default();
    (0..r.correlations.len())
        .map(|j| {
            vec![
                label.to_string(),
                j.to_string(),
                r.correlations[j].to_string(),
                r.mse[j].to_string(),
                r.psnr_db[j].to_string(),
                c_a.clone(),
            ]
        })
        .collect()
}

fn trace_matrix(trace: &[TraceEntry]) -> DMatrix<f64> {
    DMatrix::from_row_iterator(
        trace.len(),
        4,
        trace.iter().flat_map(|e| [e.iteration as f64, e.delta, e.residual, e.objective]),
    )
}

pub(crate) fn separate(mut a: SeparateArgs, ctx: Ctx) -> CliResult<()> {
    let (x, dims) = load_mixtures(&a.input)?;
    let mut cfg = match (&a.resolved, &a.config) {
        (Some(r), _) => r.clone(),
        (None, Some(p)) => SeparateConfig::from_json(&read_text(p)?)?,
        (None, None) => SeparateConfig::default(),
    };
    if let (Some((h, w)), None, None) = (dims, cfg.image_h, cfg.image_w) {
        cfg.image_h = Some(h);
        cfg.image_w = Some(w);
    }
    if let Some(s) = a.size {
        cfg.image_h = Some(s.height);
        cfg.image_w = Some(s.width);
    }
    if let Some(n) = a.sources {
        cfg.n_sources = n;
    }
    cfg.seed = ctx.seed(a.seed, cfg.seed)?;
    a.seed = Some(cfg.seed);
    a.resolved = Some(cfg.clone());
    // read before solving so a bad path fails without partial output
    let truth = a.truth.as_deref().map(read_csv_matrix).transpose()?;
    let a_true = a.truth_mixing.as_deref().map(read_csv_matrix).transpose()?;

    let out = run_method(a.method, &x, &cfg).map_err(classify)?;
    let (h, w) = cfg.dims(x.n_samples())?;
    create_dir(&a.out)?;
    let res = &out.result;
    csv_out(&a.out.join("S_hat.csv"), res.s_hat.data())?;
    csv_out(&a.out.join("A_hat.csv"), res.a_hat.data())?;
    csv_out(&a.out.join("trace.csv"), &trace_matrix(&res.trace))?;
    write_row_images(&a.out, "source", res.s_hat.data(), h, w, PixelScaling::MinMax)?;
    for (j, d) in out.dictionaries.iter().enumerate() {
        write_dictionary(&a.out.join(format!("dictionary_{j:02}.csv")), d).map_err(out_err)?;
        let blocks = &out.blocks[j];
        write_blocks(&a.out.join(format!("blocks_{j:02}.json")), blocks).map_err(out_err)?;
        let p = cfg.adaptive.patch;
        let mosaic = atom_mosaic(d.atoms(), p, p, &block_order(blocks))?;
        pgm_out(&a.out.join(format!("mosaic_{j:02}.pgm")), &mosaic, PixelScaling::Clamp)?;
    }
    if let Some(s) = &truth {
        let report = metric_report(res.s_hat.data(), s, a_true.as_ref().map(|t| (t, res.a_hat.data())))?;
        write_rows(&a.out.join("metrics.csv"), &metric_rows(&a.method.to_string(), &report), false)?;
    }
    let info = json!({
        "height": h,
        "width": w,
        "iterations_run": res.iterations_run,
        "skipped_updates": res.skipped_updates,
    });
    let dir = a.out.clone();
    write_manifest(&dir, Command::Separate(a), info)
}

pub(crate) fn evaluate(a: EvaluateArgs) -> CliResult<()> {
    let s_hat = read_csv_matrix(&a.estimate)?;
    let s = read_csv_matrix(&a.truth)?;
    let mixing = match (&a.truth_mixing, &a.estimate_mixing) {
        (Some(t), Some(e)) => Some((read_csv_matrix(t)?, read_csv_matrix(e)?)),
        _ => None,
    };
    let report = metric_report(&s_hat, &s, mixing.as_ref().map(|(t, e)| (t, e)))?;
    create_dir(&a.out)?;
    write_rows(&a.out.join("metrics.csv"), &metric_rows(&a.label, &report), a.append)?;
    let info = json!({ "mean_abs_correlation": report.mean_abs_correlation });
    let dir = a.out.clone();
    write_manifest(&dir, Command::Evaluate(a), info)
}

/// Atom indices grouped by block.
fn block_order(blocks: &BlockStructure) -> Vec<usize> {
    blocks.blocks().iter().flatten().copied().collect()
}

pub(crate) fn dict_learn(mut a: DictLearnArgs, ctx: Ctx) -> CliResult<()> {
    let seed = ctx.seed(a.seed, 0)?;
    a.seed = Some(seed);
    let loaded = load_sources(std::slice::from_ref(&a.input), a.size.map(|s| (s.height, s.width)))?;
    if loaded.sources.n_sources() != 1 {
        return Err(CliError::Validation("dictionary learning takes a single image".into()));
    }
    let (h, w) = (loaded.height, loaded.width);
    let grid = PatchGrid::new(a.patch, a.patch, a.stride, h, w)?;
    let image = row_major_to_matrix(&loaded.sources.row(0), h, w);
    let patches = extract_patches(&image, &grid)?;
    let mut params = LearnParams::new(a.atoms, a.sparsity, a.block_size, a.iterations);
    if a.init_from_patches {
        params.init = DictionaryInit::TrainingColumns { seed };
    }
    let out = learn_dictionary(&patches, a.method, &params).map_err(classify)?;
    create_dir(&a.out)?;
    let dict = &out.state.dict;
    write_dictionary(&a.out.join("dictionary.csv"), dict).map_err(out_err)?;
    write_blocks(&a.out.join("blocks.json"), &out.blocks).map_err(out_err)?;
    let trace = DMatrix::from_row_iterator(
        out.trace.len(),
        2,
        out.trace.iter().enumerate().flat_map(|(i, &o)| [i as f64, o]),
    );
    csv_out(&a.out.join("trace.csv"), &trace)?;
    let mosaic = atom_mosaic(dict.atoms(), a.patch, a.patch, &block_order(&out.blocks))?;
    pgm_out(&a.out.join("mosaic.pgm"), &mosaic, PixelScaling::Clamp)?;
    let info = json!({
        "patches": patches.ncols(),
        "blocks": out.blocks.n_blocks(),
        "final_objective": out.trace.last(),
    });
    let dir = a.out.clone();
    write_manifest(&dir, Command::DictLearn(a), info)
}

pub(crate) fn dict_render(a: DictRenderArgs) -> CliResult<()> {
    let atoms = read_csv_matrix(&a.dictionary)?;
    let order = match &a.blocks {
        Some(p) => block_order(&read_blocks(p, atoms.ncols())?),
        None => (0..atoms.ncols()).collect(),
    };
    let mosaic = atom_mosaic(&atoms, a.patch, a.patch_w.unwrap_or(a.patch), &order)?;
    create_dir(&a.out)?;
    pgm_out(&a.out.join("mosaic.pgm"), &mosaic, PixelScaling::Clamp)?;
    let info = json!({ "height": mosaic.height, "width": mosaic.width });
    let dir = a.out.clone();
    write_manifest(&dir, Command::DictRender(a), info)
}
