use nalgebra::DMatrix;

use super::{Dictionary, SignalTransform};
use crate::error::{dim_err, Result};

/// Separable 2-D transform of row-major `h x w` images: `C = Phi_v^T I Phi_h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Separable2d {
    /// Acts along image columns (dimension `h`).
    vertical: Dictionary,
    /// Acts along image rows (dimension `w`).
    horizontal: Dictionary,
}

impl Separable2d {
    pub fn new(vertical: Dictionary, horizontal: Dictionary) -> Self {
        Self {
            vertical,
            horizontal,
        }
    }

    /// Same dictionary along both axes.
    pub fn square(d: Dictionary) -> Self {
        Self::new(d.clone(), d)
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.vertical.dim(), self.horizontal.dim())
    }

    pub fn coeff_dims(&self) -> (usize, usize) {
        (self.vertical.n_atoms(), self.horizontal.n_atoms())
    }

    pub fn analyze2(&self, image: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if image.shape() != self.image_dims() {
            return dim_err(format!(
                "image is {:?}, transform expects {:?}",
                image.shape(),
                self.image_dims()
            ));
        }
        Ok(self.vertical.atoms().tr_mul(image) * self.horizontal.atoms())
    }

    pub fn synthesize2(&self, coeffs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if coeffs.shape() != self.coeff_dims() {
            return dim_err(format!(
                "coefficients are {:?}, transform expects {:?}",
                coeffs.shape(),
                self.coeff_dims()
            ));
        }
        Ok(self.vertical.atoms() * coeffs * self.horizontal.atoms().transpose())
    }
}

pub fn row_major_to_matrix(v: &[f64], h: usize, w: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(h, w, v)
}

pub fn matrix_to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl SignalTransform for Separable2d {
    fn signal_len(&self) -> usize {
        self.vertical.dim() * self.horizontal.dim()
    }

    fn coeff_len(&self) -> usize {
        self.vertical.n_atoms() * self.horizontal.n_atoms()
    }

    fn analyze(&self, signal: &[f64]) -> Result<Vec<f64>> {
        let (h, w) = self.image_dims();
        if signal.len() != h * w {
            return dim_err(format!("signal length {} is not {h}x{w}", signal.len()));
        }
        let c = self.analyze2(&row_major_to_matrix(signal, h, w))?;
        Ok(matrix_to_row_major(&c))
    }

    fn synthesize(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let (kh, kw) = self.coeff_dims();
        if coeffs.len() != kh * kw {
            return dim_err(format!("coefficient length {} is not {kh}x{kw}", coeffs.len()));
        }
        let img = self.synthesize2(&row_major_to_matrix(coeffs, kh, kw))?;
        Ok(matrix_to_row_major(&img))
    }

    fn is_orthonormal(&self) -> bool {
        self.vertical.is_orthonormal() && self.horizontal.is_orthonormal()
    }
}
