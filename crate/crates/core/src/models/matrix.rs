use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    n_rows: usize,
    n_cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, n_rows: usize, n_cols: usize) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::Invalid(format!("matrix data has {} values, expected {n_rows}×{n_cols}", data.len())));
        }
        Ok(Matrix { data, n_rows, n_cols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.as_ref().len() != n_cols {
                return Err(Error::Invalid("rows have differing lengths".into()));
            }
            data.extend_from_slice(r.as_ref());
        }
        Ok(Matrix { data, n_rows: rows.len(), n_cols })
    }

    pub fn from_features(vectors: &[FeatureVector]) -> Self {
        let rows: Vec<&[f64]> = vectors.iter().map(|v| &v.values[..]).collect();
        Matrix::from_rows(&rows).expect("feature vectors have a fixed width")
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols.max(1)).take(self.n_rows)
    }

    pub fn map_rows(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Matrix {
        let rows: Vec<Vec<f64>> = self.rows().map(f).collect();
        let n_cols = rows.first().map(Vec::len).unwrap_or(self.n_cols);
        Matrix { data: rows.concat(), n_rows: self.n_rows, n_cols }
    }
}
