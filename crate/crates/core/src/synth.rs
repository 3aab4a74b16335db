//! Synthetic image sources with known sparse structure, used in place of
//! natural test pictures.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Error, Result};
use crate::mixing::{rng, SourceSet};

/// A generator plus the seed that fixes its random draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Synthetic {
    /// A few separable DCT-II atoms of medium frequency: exactly sparse in
    /// the 2-D DCT.
    Texture { seed: u64 },
    /// Random dyadic quadtree of constant squares, mean removed: sparse in
    /// the 2-D Haar basis.
    Cartoon { seed: u64 },
    /// Isolated spikes: sparse in the pixel basis.
    Spikes { seed: u64 },
    /// Oriented stripes `cos(w . x + phase)` with a smooth envelope; not
    /// exactly sparse in any fixed basis.
    Stripes { seed: u64 },
}

impl Synthetic {
    /// Row-major `h x w` image scaled to unit peak amplitude.
    pub fn generate(self, h: usize, w: usize) -> Result<Vec<f64>> {
        if h == 0 || w == 0 {
            return arg_err("image dimensions must be positive");
        }
        let mut img = match self {
            Synthetic::Texture { seed } => texture(h, w, seed),
            Synthetic::Cartoon { seed } => cartoon(h, w, seed)?,
            Synthetic::Spikes { seed } => spikes(h, w, seed),
            Synthetic::Stripes { seed } => stripes(h, w, seed),
        };
        let peak = img.iter().fold(0.0f64, |p, v| p.max(v.abs()));
        if peak > 0.0 {
            img.iter_mut().for_each(|v| *v /= peak);
        }
        Ok(img)
    }
}

impl fmt::Display for Synthetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, seed) = match self {
            Synthetic::Texture { seed } => ("texture", seed),
            Synthetic::Cartoon { seed } => ("cartoon", seed),
            Synthetic::Spikes { seed } => ("spikes", seed),
            Synthetic::Stripes { seed } => ("stripes", seed),
        };
        write!(f, "{name}:{seed}")
    }
}

/// Parses `name[:seed]`, seed 0 when omitted.
impl FromStr for Synthetic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, seed) = match s.split_once(':') {
            Some((n, sd)) => (n, sd.parse().map_err(|_| Error::Parse(format!("bad seed in '{s}'")))?),
            None => (s, 0),
        };
        match name {
            "texture" => Ok(Synthetic::Texture { seed }),
            "cartoon" => Ok(Synthetic::Cartoon { seed }),
            "spikes" => Ok(Synthetic::Spikes { seed }),
            "stripes" => Ok(Synthetic::Stripes { seed }),
            _ => Err(Error::Parse(format!("unknown synthetic source '{name}'"))),
        }
    }
}

/// Stacks generated images as the rows of a source matrix.
pub fn synthetic_sources(kinds: &[Synthetic], h: usize, w: usize) -> Result<SourceSet> {
    let rows = kinds.iter().map(|k| k.generate(h, w)).collect::<Result<Vec<_>>>()?;
    SourceSet::from_rows(&rows)
}

fn texture(h: usize, w: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let terms: Vec<(usize, usize, f64)> = (0..6)
        .map(|_| {
            let u = r.gen_range((h / 8).max(1)..(h / 2).max(2));
            let v = r.gen_range((w / 8).max(1)..(w / 2).max(2));
            let amp = r.gen_range(0.5..1.0) * if r.gen::<bool>() { 1.0 } else { -1.0 };
            (u, v, amp)
        })
        .collect();
    let mut img = vec![0.0; h * w];
    for (row, col) in (0..h).flat_map(|i| (0..w).map(move |j| (i, j))) {
        img[row * w + col] = terms
            .iter()
            .map(|&(u, v, a)| {
                a * (PI * (2 * row + 1) as f64 * u as f64 / (2 * h) as f64).cos()
                    * (PI * (2 * col + 1) as f64 * v as f64 / (2 * w) as f64).cos()
            })
            .sum();
    }
    img
}

fn cartoon(h: usize, w: usize, seed: u64) -> Result<Vec<f64>> {
    if !h.is_power_of_two() || !w.is_power_of_two() {
        return arg_err("cartoon sources need power-of-two dimensions");
    }
    let mut r = rng(seed);
    let mut img = vec![0.0; h * w];
    // (row, col, height, width, depth)
    let mut stack = vec![(0, 0, h, w, 0u32)];
    while let Some((r0, c0, bh, bw, depth)) = stack.pop() {
        let split = bh >= 8 && bw >= 8 && (depth < 1 || (depth < 4 && r.gen_bool(0.55)));
        if split {
            let (hh, hw) = (bh / 2, bw / 2);
            for (dr, dc) in [(0, 0), (0, hw), (hh, 0), (hh, hw)] {
                stack.push((r0 + dr, c0 + dc, hh, hw, depth + 1));
            }
        } else {
            let v: f64 = r.gen_range(-1.0..1.0);
            for i in r0..r0 + bh {
                img[i * w + c0..i * w + c0 + bw].fill(v);
            }
        }
    }
    let mean = img.iter().sum::<f64>() / img.len() as f64;
    img.iter_mut().for_each(|v| *v -= mean);
    Ok(img)
}

fn spikes(h: usize, w: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let count = (h * w / 50).max(1);
    let mut img = vec![0.0; h * w];
    for _ in 0..count {
        let k = r.gen_range(0..h * w);
        let amp: f64 = r.gen_range(0.3..1.0);
        img[k] = if r.gen::<bool>() { amp } else { -amp };
    }
    img
}

fn stripes(h: usize, w: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    let angle: f64 = r.gen_range(0.0..PI);
    let freq: f64 = r.gen_range(0.15..0.35) * PI;
    let phase: f64 = r.gen_range(0.0..2.0 * PI);
    let (ci, cj) = (h as f64 / 2.0, w as f64 / 2.0);
    let spread = 0.6 * (h.max(w) as f64);
    let mut img = vec![0.0; h * w];
    for i in 0..h {
        for j in 0..w {
            let (y, x) = (i as f64 - ci, j as f64 - cj);
            let envelope = (-(x * x + y * y) / (2.0 * spread * spread)).exp();
            img[i * w + j] = envelope * (freq * (x * angle.cos() + y * angle.sin()) + phase).cos();
        }
    }
    img
}
