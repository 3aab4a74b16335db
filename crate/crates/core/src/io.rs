//! File formats: headerless CSV matrices, 8-bit binary PGM images, learned
//! dictionaries and atom mosaics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder, ImageReader};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Error, Result};
use crate::learn::BlockStructure;
use crate::transforms::Dictionary;

fn parse_err(path: &Path, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("{}: {msg}", path.display()))
}

/// Reads a headerless CSV file; every record becomes one matrix row.
pub fn read_csv_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e))?;
        let row = record
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| parse_err(path, format!("row {}: '{f}' is not a number", i + 1))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(path, format!("row {} has {} fields, expected {}", i + 1, row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    let Some(cols) = rows.first().map(Vec::len) else {
        return Err(parse_err(path, "no data"));
    };
    Ok(DMatrix::from_row_iterator(rows.len(), cols, rows.into_iter().flatten()))
}

/// Writes one record per matrix row. Values use the shortest text that
/// parses back to the same `f64`, so CSV round trips are exact.
pub fn write_csv_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Grayscale image as row-major pixel values in `0..=255`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(height: usize, width: usize, pixels: Vec<f64>) -> Result<Self> {
        if height * width != pixels.len() || pixels.is_empty() {
            return dim_err(format!("{} pixels do not form a {height}x{width} image", pixels.len()));
        }
        Ok(Self { height, width, pixels })
    }
}

/// How real values are mapped to 8-bit gray levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelScaling {
    /// Round and clamp to `0..=255`; pixel-valued data round-trips exactly.
    Clamp,
    /// Map the minimum to 0 and the maximum to 255; for display of data on
    /// an arbitrary scale.
    MinMax,
}

/// Reads any PNM graymap (8 or 16 bit samples are reduced to 8 bit).
pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let img = ImageReader::open(path)?
        .with_guessed_format()?
        .decode()
        .map_err(|e| parse_err(path, e))?
        .into_luma8();
    let (w, h) = img.dimensions();
    GrayImage::new(h as usize, w as usize, img.into_raw().into_iter().map(f64::from).collect())
}

/// Writes a binary (P5) 8-bit graymap.
pub fn write_pgm(path: &Path, img: &GrayImage, scaling: PixelScaling) -> Result<()> {
    let bytes: Vec<u8> = match scaling {
        PixelScaling::Clamp => img.pixels.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect(),
        PixelScaling::MinMax => {
            let lo = img.pixels.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = img.pixels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            img.pixels
                .iter()
                .map(|v| if span > 0.0 { (255.0 * (v - lo) / span).round() as u8 } else { 0 })
                .collect()
        }
    };
    let out = BufWriter::new(File::create(path)?);
    PnmEncoder::new(out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&bytes, img.width as u32, img.height as u32, ExtendedColorType::L8)
        .map_err(|e| Error::Io(std::io::Error::other(e)))
}

#[derive(Serialize, Deserialize)]
struct BlocksFile {
    max_block_size: usize,
    blocks: Vec<Vec<usize>>,
}

/// Writes the atoms as an `N x K` CSV matrix (one atom per column).
pub fn write_dictionary(path: &Path, dict: &Dictionary) -> Result<()> {
    write_csv_matrix(path, dict.atoms())
}

/// Reads an `N x K` atom matrix; columns are renormalized.
pub fn read_dictionary(path: &Path) -> Result<Dictionary> {
    Dictionary::learned(read_csv_matrix(path)?)
}

pub fn write_blocks(path: &Path, blocks: &BlockStructure) -> Result<()> {
    let file = BlocksFile {
        max_block_size: blocks.max_block_size(),
        blocks: blocks.blocks().to_vec(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| parse_err(path, e))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

pub fn read_blocks(path: &Path, n_atoms: usize) -> Result<BlockStructure> {
    let text = std::fs::read_to_string(path)?;
    let file: BlocksFile = serde_json::from_str(&text).map_err(|e| parse_err(path, e))?;
    BlockStructure::from_blocks(n_atoms, file.blocks, file.max_block_size)
}

/// Tiles the atoms as `patch_h x patch_w` images on a near-square grid with
/// one-pixel gaps. Each tile is min-max stretched on its own, gaps sit at
/// mid-gray. Atoms are visited in `order`, e.g. grouped by block.
pub fn atom_mosaic(atoms: &DMatrix<f64>, patch_h: usize, patch_w: usize, order: &[usize]) -> Result<GrayImage> {
    if patch_h * patch_w != atoms.nrows() {
        return dim_err(format!("{}-pixel atoms are not {patch_h}x{patch_w} patches", atoms.nrows()));
    }
    if order.is_empty() || order.iter().any(|&k| k >= atoms.ncols()) {
        return arg_err("mosaic order must list valid atom indices");
    }
    let cols = (order.len() as f64).sqrt().ceil() as usize;
    let rows = order.len().div_ceil(cols);
    let (h, w) = (rows * (patch_h + 1) + 1, cols * (patch_w + 1) + 1);
    let mut pixels = vec![127.0; h * w];
    for (slot, &k) in order.iter().enumerate() {
        let atom = atoms.column(k);
        let lo = atom.min();
        let span = atom.max() - lo;
        let (r0, c0) = (1 + (slot / cols) * (patch_h + 1), 1 + (slot % cols) * (patch_w + 1));
        for c in 0..patch_w {
            for r in 0..patch_h {
                // patches are column-major
                let v = atom[c * patch_h + r];
                pixels[(r0 + r) * w + c0 + c] = if span > 0.0 { 255.0 * (v - lo) / span } else { 127.0 };
            }
        }
    }
    GrayImage::new(h, w, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pgm_round_trip_is_exact_for_pixel_data() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.pgm");
        let img = GrayImage::new(3, 5, (0..15).map(|v| (v * 17) as f64).collect()).unwrap();
        write_pgm(&path, &img, PixelScaling::Clamp).unwrap();
        assert!(std::fs::read(&path).unwrap().starts_with(b"P5"));
        assert_eq!(read_pgm(&path).unwrap(), img);
    }

    #[test]
    fn minmax_scaling_spans_the_gray_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.pgm");
        let img = GrayImage::new(1, 3, vec![-1.0, 0.0, 1.0]).unwrap();
        write_pgm(&path, &img, PixelScaling::MinMax).unwrap();
        assert_eq!(read_pgm(&path).unwrap().pixels, vec![0.0, 128.0, 255.0]);
    }

    #[test]
    fn csv_rejects_ragged_and_non_numeric_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        std::fs::write(&path, "1,2\n3\n").unwrap();
        assert!(matches!(read_csv_matrix(&path), Err(Error::Parse(_))));
        std::fs::write(&path, "1,x\n").unwrap();
        assert!(matches!(read_csv_matrix(&path), Err(Error::Parse(_))));
    }

    #[test]
    fn blocks_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("blocks.json");
        let b = BlockStructure::from_blocks(4, vec![vec![0, 3], vec![1], vec![2]], 2).unwrap();
        write_blocks(&path, &b).unwrap();
        assert_eq!(read_blocks(&path, 4).unwrap(), b);
        assert!(read_blocks(&path, 5).is_err());
    }

    #[test]
    fn mosaic_places_atoms_column_major() {
        // one 2x2 atom whose column-major entries are 0,1,2,3
        let atoms = DMatrix::from_column_slice(4, 1, &[0.0, 1.0, 2.0, 3.0]);
        let m = atom_mosaic(&atoms, 2, 2, &[0]).unwrap();
        assert_eq!((m.height, m.width), (4, 4));
        assert_eq!(m.pixels[5], 0.0);
        assert_eq!(m.pixels[6], 170.0);
        assert_eq!(m.pixels[9], 85.0);
        assert_eq!(m.pixels[10], 255.0);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_bit_exact(rows in 1usize..5, cols in 1usize..5, seed in any::<u64>()) {
            use rand::Rng;
            let mut r = crate::mixing::rng(seed);
            let m = DMatrix::from_fn(rows, cols, |_, _| r.gen_range(-1e6..1e6) * 10f64.powi(r.gen_range(-20..20)));
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.csv");
            write_csv_matrix(&path, &m).unwrap();
            prop_assert_eq!(read_csv_matrix(&path).unwrap(), m);
        }
    }
}
