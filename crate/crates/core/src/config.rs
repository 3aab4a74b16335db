//! JSON run configuration and the dispatch from a method name to a solver.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adaptive::{adaptive_separate, AdaptiveBssConfig};
use crate::error::{arg_err, dim_err, Error, Result};
use crate::eval::{fastica, FastIcaConfig};
use crate::io::read_pgm;
use crate::learn::{BlockStructure, LearnMethod};
use crate::mca::{
    auto_schedule, fast_gmca_separate, gmca_separate, mca_decompose, mmca_separate, BssProblem, McaProblem,
    SeparationResult, Transform, TraceEntry,
};
use crate::mixing::{MixingMatrix, MixtureSet, SourceSet};
use crate::sparse::ThresholdKind;
use crate::synth::Synthetic;
use crate::transforms::{
    dct_basis, dwt_basis, full_levels, identity_basis, Dictionary, Separable2d, TransformUnion, Wavelet,
};

/// Fixed transform acting on a row-major `h x w` image (or a 1-D signal when
/// `h = 1` for the `dct` and `identity` kinds).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TransformSpec {
    /// Separable 2-D DCT-II.
    Dct2,
    /// Separable 2-D orthonormal wavelet transform at full depth.
    Wavelet2 { wavelet: Wavelet },
    /// 1-D DCT-II over the whole flattened signal.
    Dct,
    Identity,
    /// Concatenation of several transforms (a redundant dictionary).
    Union { members: Vec<TransformSpec> },
}

impl TransformSpec {
    pub fn build(&self, h: usize, w: usize) -> Result<Transform> {
        Ok(match self {
            TransformSpec::Dct2 => Arc::new(Separable2d::new(dct_basis(h), dct_basis(w))),
            TransformSpec::Wavelet2 { wavelet } => {
                let basis = |n: usize| dwt_basis(n, *wavelet, full_levels(n));
                Arc::new(Separable2d::new(basis(h)?, basis(w)?))
            }
            TransformSpec::Dct => Arc::new(dct_basis(h * w)),
            TransformSpec::Identity => Arc::new(identity_basis(h * w)?),
            TransformSpec::Union { members } => {
                let built = members.iter().map(|m| m.build(h, w)).collect::<Result<Vec<_>>>()?;
                Arc::new(TransformUnion::new(built)?)
            }
        })
    }
}

/// A source image: a synthetic generator (`texture:3`) or an image or CSV
/// file path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum SourceSpec {
    Synthetic(Synthetic),
    File(PathBuf),
}

impl FromStr for SourceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let name = s.split_once(':').map_or(s, |(n, _)| n);
        if ["texture", "cartoon", "spikes", "stripes"].contains(&name) {
            return Ok(SourceSpec::Synthetic(s.parse()?));
        }
        Ok(SourceSpec::File(PathBuf::from(s)))
    }
}

impl TryFrom<String> for SourceSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<SourceSpec> for String {
    fn from(s: SourceSpec) -> String {
        s.to_string()
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Synthetic(k) => write!(f, "{k}"),
            SourceSpec::File(p) => write!(f, "{}", p.display()),
        }
    }
}

/// Loaded sources plus their common image size.
#[derive(Debug, Clone)]
pub struct LoadedSources {
    pub sources: SourceSet,
    pub height: usize,
    pub width: usize,
    /// True when every source came from an image file, i.e. holds pixel
    /// values.
    pub pixel_valued: bool,
}

/// Loads the sources. Synthetic ones are generated at `size`; image files
/// fix the size themselves and must agree with each other and with `size`
/// when given. A CSV file contributes each of its rows as one source.
pub fn load_sources(specs: &[SourceSpec], size: Option<(usize, usize)>) -> Result<LoadedSources> {
    if specs.is_empty() {
        return arg_err("at least one source is required");
    }
    let mut dims = size;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut pixel_valued = true;
    let mut agree = |d: (usize, usize), what: &str| -> Result<()> {
        match dims {
            Some(prev) if prev != d => {
                dim_err(format!("{what} is {}x{}, expected {}x{}", d.0, d.1, prev.0, prev.1))
            }
            _ => {
                dims = Some(d);
                Ok(())
            }
        }
    };
    let mut deferred = Vec::new();
    for spec in specs {
        match spec {
            SourceSpec::File(p) if is_csv(p) => {
                pixel_valued = false;
                let m = crate::io::read_csv_matrix(p)?;
                rows.extend(m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()));
            }
            SourceSpec::File(p) => {
                let img = read_pgm(p)?;
                agree((img.height, img.width), &p.display().to_string())?;
                rows.push(img.pixels);
            }
            SourceSpec::Synthetic(k) => {
                pixel_valued = false;
                deferred.push((rows.len(), *k));
                rows.push(Vec::new());
            }
        }
    }
    let t = rows.iter().map(Vec::len).find(|&l| l > 0);
    let (h, w) = match (dims, t) {
        (Some(d), _) => d,
        (None, Some(t)) => (1, t),
        (None, None) => (64, 64),
    };
    for (slot, k) in deferred {
        rows[slot] = k.generate(h, w)?;
    }
    if rows.iter().any(|r| r.len() != h * w) {
        return dim_err(format!("every source must have {} samples ({h}x{w})", h * w));
    }
    Ok(LoadedSources {
        sources: SourceSet::from_rows(&rows)?,
        height: h,
        width: w,
        pixel_valued,
    })
}

/// Image size written `HxW`, e.g. `64x64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Size {
    pub height: usize,
    pub width: usize,
}

impl FromStr for Size {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("size '{s}' is not HxW"));
        let (h, w) = s.split_once(['x', 'X']).ok_or_else(bad)?;
        let (height, width) = (h.trim().parse().map_err(|_| bad())?, w.trim().parse().map_err(|_| bad())?);
        if height == 0 || width == 0 {
            return Err(bad());
        }
        Ok(Size { height, width })
    }
}

impl TryFrom<String> for Size {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Size> for String {
    fn from(s: Size) -> String {
        s.to_string()
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

pub(crate) fn is_csv(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Fastica,
    Mca,
    Mmca,
    Gmca,
    Fgmca,
    KsvdMmca,
    BksvdMmca,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).map_err(|_| fmt::Error)?;
        f.write_str(s.as_str().unwrap_or_default())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_owned()))
            .map_err(|_| Error::Parse(format!("unknown method '{s}'")))
    }
}

/// Settings for one separation run. Every field has a default, so `{}` is a
/// valid config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparateConfig {
    pub n_sources: usize,
    /// Image size of each channel; `None` treats channels as 1-D signals.
    pub image_h: Option<usize>,
    pub image_w: Option<usize>,
    pub seed: u64,
    /// Outer iterations of every iterative solver.
    pub l_max: usize,
    /// MMCA uses entry `j` for source `j` when there is one entry per
    /// source and the union of all entries for every source otherwise. GMCA
    /// and MCA treat the entries as the morphological components; FastGMCA
    /// needs exactly one orthonormal entry.
    pub transforms: Vec<TransformSpec>,
    /// Thresholding rule; solver default when absent.
    pub threshold: Option<ThresholdKind>,
    pub floor_mad_factor: f64,
    pub fastica: FastIcaConfig,
    /// Patch and dictionary settings of the adaptive methods. Its size,
    /// source count, iteration count, seed and method fields are taken from
    /// this config and the chosen method.
    pub adaptive: AdaptiveBssConfig,
}

impl Default for SeparateConfig {
    fn default() -> Self {
        Self {
            n_sources: 2,
            image_h: None,
            image_w: None,
            seed: 0,
            l_max: 50,
            transforms: vec![TransformSpec::Dct2, TransformSpec::Wavelet2 { wavelet: Wavelet::Haar }],
            threshold: None,
            floor_mad_factor: 3.0,
            fastica: FastIcaConfig::default(),
            adaptive: AdaptiveBssConfig::default(),
        }
    }
}

/// Output of [`separate`]: the separation plus, for adaptive methods, the
/// learned per-source dictionaries.
#[derive(Debug, Clone)]
pub struct Separated {
    pub result: SeparationResult,
    pub dictionaries: Vec<Dictionary>,
    pub blocks: Vec<BlockStructure>,
}

impl SeparateConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// `(h, w)` for `t` samples per channel.
    pub fn dims(&self, t: usize) -> Result<(usize, usize)> {
        let (h, w) = match (self.image_h, self.image_w) {
            (Some(h), Some(w)) => (h, w),
            (None, None) => (1, t),
            _ => return arg_err("give both image_h and image_w or neither"),
        };
        if h * w != t {
            return dim_err(format!("{h}x{w} images do not match {t} samples"));
        }
        Ok((h, w))
    }

    fn transforms(&self, h: usize, w: usize) -> Result<Vec<Transform>> {
        if self.transforms.is_empty() {
            return arg_err("at least one transform is required");
        }
        self.transforms.iter().map(|t| t.build(h, w)).collect()
    }

    fn problem(&self, x: &MixtureSet, dicts: Vec<Transform>) -> Result<BssProblem> {
        let schedule = auto_schedule(x, &dicts, self.l_max)?;
        let mut p = BssProblem::new(x.clone(), self.n_sources, dicts, schedule);
        p.threshold = self.threshold;
        p.floor_mad_factor = self.floor_mad_factor;
        p.seed = self.seed;
        Ok(p)
    }

    pub fn adaptive_config(&self, method: LearnMethod, t: usize) -> Result<AdaptiveBssConfig> {
        let (h, w) = self.dims(t)?;
        Ok(AdaptiveBssConfig {
            n_sources: self.n_sources,
            image_h: h,
            image_w: w,
            l_max: self.l_max,
            method,
            seed: self.seed,
            ..self.adaptive.clone()
        })
    }
}

/// Runs `method` on the mixtures.
///
/// `mca` splits a single channel into one component per transform; its
/// result holds the components as sources and an all-ones mixing row.
pub fn separate(method: Method, x: &MixtureSet, cfg: &SeparateConfig) -> Result<Separated> {
    let t = x.n_samples();
    let (h, w) = cfg.dims(t)?;
    let plain = |result| Separated {
        result,
        dictionaries: Vec::new(),
        blocks: Vec::new(),
    };
    match method {
        Method::Fastica => Ok(plain(fastica(x, cfg.n_sources, &cfg.fastica)?)),
        Method::Mca => {
            if x.n_channels() != 1 {
                return arg_err("mca separates a single channel");
            }
            let components = cfg.transforms(h, w)?;
            let observation: Vec<f64> = x.data.row(0).iter().copied().collect();
            let schedule = auto_schedule(x, &components, cfg.l_max)?;
            let n = components.len();
            let out = mca_decompose(&McaProblem {
                observation,
                components,
                schedule,
                threshold: cfg.threshold.unwrap_or_default(),
            })?;
            let trace = out
                .residual_trace
                .iter()
                .enumerate()
                .map(|(i, &r)| TraceEntry {
                    iteration: i,
                    delta: schedule.value(i),
                    residual: r,
                    objective: 0.5 * r * r,
                })
                .collect();
            Ok(plain(SeparationResult {
                a_hat: MixingMatrix::normalized(nalgebra::DMatrix::from_element(1, n, 1.0))?,
                s_hat: SourceSet::from_rows(&out.components)?,
                trace,
                iterations_run: cfg.l_max,
                skipped_updates: Vec::new(),
            }))
        }
        Method::Mmca => {
            let mut dicts = cfg.transforms(h, w)?;
            if dicts.len() != cfg.n_sources {
                let union: Transform = if dicts.len() == 1 {
                    dicts.remove(0)
                } else {
                    Arc::new(TransformUnion::new(dicts)?)
                };
                dicts = vec![union; cfg.n_sources];
            }
            Ok(plain(mmca_separate(&cfg.problem(x, dicts)?)?))
        }
        Method::Gmca => Ok(plain(gmca_separate(&cfg.problem(x, cfg.transforms(h, w)?)?)?)),
        Method::Fgmca => Ok(plain(fast_gmca_separate(&cfg.problem(x, cfg.transforms(h, w)?)?)?)),
        Method::KsvdMmca | Method::BksvdMmca => {
            let learn = if method == Method::KsvdMmca { LearnMethod::Ksvd } else { LearnMethod::SacBksvd };
            let out = adaptive_separate(x, &cfg.adaptive_config(learn, t)?)?;
            Ok(Separated {
                result: out.separation,
                dictionaries: out.dictionaries,
                blocks: out.blocks,
            })
        }
    }
}

/// One solver of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub method: Method,
    #[serde(default)]
    pub config: SeparateConfig,
}

/// Block-size by sparsity grid for dictionary learning on image patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub block_sizes: Vec<usize>,
    pub sparsities: Vec<usize>,
    pub n_atoms: usize,
    pub iterations: usize,
    pub patch: usize,
    pub stride: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            block_sizes: vec![1, 2, 3],
            sparsities: vec![1, 2, 3],
            n_atoms: 96,
            iterations: 100,
            patch: 8,
            stride: 2,
        }
    }
}

/// A batch of runs. Without `grid` every solver runs at every PSNR level on
/// the same mixing matrix. With `grid` the sources are summed into one image
/// and block K-SVD runs at every (block size, sparsity) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    #[serde(default)]
    pub name: String,
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub size: Option<Size>,
    #[serde(default)]
    pub channels: usize,
    #[serde(default)]
    pub psnr: Vec<f64>,
    #[serde(default)]
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn distinct<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().all(|(i, a)| v[..i].iter().all(|b| a != b))
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return arg_err("experiment lists no sources");
        }
        match &self.grid {
            Some(g) => {
                if g.block_sizes.is_empty() || g.sparsities.is_empty() {
                    return arg_err("grid needs block sizes and sparsities");
                }
                if !distinct(&g.block_sizes) || !distinct(&g.sparsities) {
                    return arg_err("grid values must be distinct");
                }
                if g.block_sizes.contains(&0) || g.sparsities.contains(&0) || g.iterations == 0 {
                    return arg_err("grid values and iterations must be at least 1");
                }
            }
            None => {
                if self.solvers.is_empty() {
                    return arg_err("experiment lists no solvers");
                }
                if self.psnr.is_empty() || !distinct(&self.psnr) {
                    return arg_err("psnr levels must be nonempty and distinct");
                }
                if self.psnr.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
                    return arg_err("psnr levels must be positive");
                }
                if self.channels < self.sources.len() {
                    return arg_err(format!(
                        "{} channels cannot carry {} sources",
                        self.channels,
                        self.sources.len()
                    ));
                }
            }
        }
        Ok(())
    }
}
