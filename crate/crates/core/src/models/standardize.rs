use serde::{Deserialize, Serialize};

use super::Matrix;

/// Per-feature centering and scaling estimated on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column. Constant columns
    /// get deviation 1.
    pub fn fit(x: &Matrix, names: &[String]) -> Self {
        let n = x.n_rows() as f64;
        let p = x.n_cols();
        let mut mean = vec![0.0; p];
        for row in x.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; p];
        for row in x.rows() {
            for j in 0..p {
                var[j] += (row[j] - mean[j]).powi(2);
            }
        }
        let sd = var
            .iter()
            .enumerate()
            .map(|(j, v)| {
                let s = (v / n).sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    log::warn!("feature {} is constant in the training data; using unit scale", names[j]);
                    1.0
                }
            })
            .collect();
        Standardizer { mean, sd }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().zip(self.mean.iter().zip(&self.sd)).map(|(x, (m, s))| (x - m) / s).collect()
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Matrix {
        x.map_rows(|r| self.apply(r))
    }
}
