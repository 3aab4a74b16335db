use nalgebra::DMatrix;

use crate::error::{dim_err, Result};

/// Sparse representation of one signal: sorted atom indices and values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseColumn {
    pub support: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseColumn {
    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn to_dense(&self, k: usize) -> Vec<f64> {
        let mut v = vec![0.0; k];
        for (&i, &x) in self.support.iter().zip(&self.values) {
            v[i] = x;
        }
        v
    }
}

/// `K x L` coefficient matrix with per-column supports.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    coeffs: DMatrix<f64>,
    supports: Vec<Vec<usize>>,
}

impl SparseCode {
    pub fn zeros(k: usize, l: usize) -> Self {
        Self {
            coeffs: DMatrix::zeros(k, l),
            supports: vec![Vec::new(); l],
        }
    }

    pub fn from_columns(k: usize, columns: &[SparseColumn]) -> Result<Self> {
        let mut code = Self::zeros(k, columns.len());
        for (j, c) in columns.iter().enumerate() {
            code.set_column(j, c)?;
        }
        Ok(code)
    }

    /// Builds a code from a dense matrix; the support is the nonzero pattern.
    pub fn from_dense(coeffs: DMatrix<f64>) -> Self {
        let supports = coeffs
            .column_iter()
            .map(|c| c.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, _)| i).collect())
            .collect();
        Self { coeffs, supports }
    }

    pub fn set_column(&mut self, j: usize, c: &SparseColumn) -> Result<()> {
        let k = self.n_atoms();
        if c.support.iter().any(|&i| i >= k) || c.support.len() != c.values.len() {
            return dim_err("sparse column does not fit the code dimensions");
        }
        let mut col = self.coeffs.column_mut(j);
        col.fill(0.0);
        for (&i, &v) in c.support.iter().zip(&c.values) {
            col[i] = v;
        }
        self.supports[j] = c.support.clone();
        Ok(())
    }

    pub fn column(&self, j: usize) -> SparseColumn {
        let support = self.supports[j].clone();
        let values = support.iter().map(|&i| self.coeffs[(i, j)]).collect();
        SparseColumn { support, values }
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn supports(&self) -> &[Vec<usize>] {
        &self.supports
    }

    pub fn n_atoms(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn n_signals(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Replaces row `k` on its current nonzero columns; entries that become
    /// exactly zero drop out of the supports.
    pub(crate) fn set_row_on(&mut self, k: usize, cols: &[usize], values: &[f64]) {
        for (&j, &v) in cols.iter().zip(values) {
            self.coeffs[(k, j)] = v;
            let s = &mut self.supports[j];
            match (s.binary_search(&k), v != 0.0) {
                (Ok(pos), false) => {
                    s.remove(pos);
                }
                (Err(pos), true) => s.insert(pos, k),
                _ => {}
            }
        }
    }

    /// Columns whose coefficient in row `k` is nonzero.
    pub fn row_support(&self, k: usize) -> Vec<usize> {
        (0..self.n_signals()).filter(|&j| self.coeffs[(k, j)] != 0.0).collect()
    }

    /// Checks that entries outside the declared supports are exactly zero.
    pub fn is_consistent(&self) -> bool {
        self.coeffs.column_iter().zip(&self.supports).all(|(c, s)| {
            c.iter()
                .enumerate()
                .all(|(i, v)| *v == 0.0 || s.binary_search(&i).is_ok())
                && s.windows(2).all(|w| w[0] < w[1])
        })
    }
}
