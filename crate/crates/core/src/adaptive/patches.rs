use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, dim_err, Result};

/// Overlapping square-or-rectangular patch layout over an image.
///
/// Patch origins step by `stride` along each axis; when the last step does
/// not reach the border an extra patch is clamped against it, so every pixel
/// is covered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchGrid {
    pub patch_h: usize,
    pub patch_w: usize,
    pub stride: usize,
    pub image_h: usize,
    pub image_w: usize,
}

impl PatchGrid {
    pub fn new(patch_h: usize, patch_w: usize, stride: usize, image_h: usize, image_w: usize) -> Result<Self> {
        if patch_h == 0 || patch_w == 0 {
            return arg_err("patch dimensions must be positive");
        }
        if stride == 0 || stride > patch_h || stride > patch_w {
            return arg_err(format!("stride {stride} must lie in 1..=min patch dimension"));
        }
        if patch_h > image_h || patch_w > image_w {
            return dim_err(format!(
                "{patch_h}x{patch_w} patches do not fit a {image_h}x{image_w} image"
            ));
        }
        Ok(Self {
            patch_h,
            patch_w,
            stride,
            image_h,
            image_w,
        })
    }

    /// Square patches with 50% overlap.
    pub fn half_overlap(patch: usize, image_h: usize, image_w: usize) -> Result<Self> {
        Self::new(patch, patch, (patch / 2).max(1), image_h, image_w)
    }

    pub fn patch_len(&self) -> usize {
        self.patch_h * self.patch_w
    }

    pub fn row_origins(&self) -> Vec<usize> {
        origins(self.image_h, self.patch_h, self.stride)
    }

    pub fn col_origins(&self) -> Vec<usize> {
        origins(self.image_w, self.patch_w, self.stride)
    }

    pub fn n_patches(&self) -> usize {
        self.row_origins().len() * self.col_origins().len()
    }

    /// Patch origins, row-major over the grid.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        let cols = self.col_origins();
        self.row_origins()
            .into_iter()
            .flat_map(|r| cols.iter().map(move |&c| (r, c)))
            .collect()
    }
}

fn origins(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=len - patch).step_by(stride).collect();
    if *v.last().expect("patch fits") != len - patch {
        v.push(len - patch);
    }
    v
}

/// One vectorized patch per column (`patch_h * patch_w` rows, column-major
/// inside the patch).
pub fn extract_patches(image: &DMatrix<f64>, grid: &PatchGrid) -> Result<DMatrix<f64>> {
    if image.shape() != (grid.image_h, grid.image_w) {
        return dim_err(format!(
            "image is {:?}, grid expects {}x{}",
            image.shape(),
            grid.image_h,
            grid.image_w
        ));
    }
    let positions = grid.positions();
    let mut out = DMatrix::zeros(grid.patch_len(), positions.len());
    for (k, &(r, c)) in positions.iter().enumerate() {
        let patch = image.view((r, c), (grid.patch_h, grid.patch_w));
        out.column_mut(k).copy_from_slice(patch.clone_owned().as_slice());
    }
    Ok(out)
}

/// Inverse of [`extract_patches`]: overlapping pixels are averaged.
pub fn reassemble_patches(patches: &DMatrix<f64>, grid: &PatchGrid) -> Result<DMatrix<f64>> {
    let positions = grid.positions();
    if patches.shape() != (grid.patch_len(), positions.len()) {
        return dim_err(format!(
            "patch matrix is {:?}, grid needs {}x{}",
            patches.shape(),
            grid.patch_len(),
            positions.len()
        ));
    }
    let mut sum = DMatrix::zeros(grid.image_h, grid.image_w);
    let mut count = DMatrix::<f64>::zeros(grid.image_h, grid.image_w);
    for (k, &(r, c)) in positions.iter().enumerate() {
        let col = patches.column(k);
        for j in 0..grid.patch_w {
            for i in 0..grid.patch_h {
                sum[(r + i, c + j)] += col[j * grid.patch_h + i];
                count[(r + i, c + j)] += 1.0;
            }
        }
    }
    Ok(sum.component_div(&count))
}
