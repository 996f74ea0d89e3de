//! L2-penalized logistic regression fitted by damped Newton iterations.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};
use crate::util::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    /// Weight of ‖w‖² (the intercept is not penalized).
    pub lambda: f64,
    #[serde(default = "default_tolerance")]
    pub gradient_tolerance: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tolerance() -> f64 {
    1e-6
}
fn default_max_iter() -> usize {
    200
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams { lambda: 0.03240, gradient_tolerance: 1e-6, max_iter: 200 }
    }
}

/// Mean log-loss plus `lambda`·‖w‖². Parameters are `[w_1..w_p, intercept]`.
pub struct LogisticObjective<'a> {
    pub x: &'a Matrix,
    pub y: &'a [bool],
    pub lambda: f64,
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticObjective<'_> {
    fn margin(&self, theta: &[f64], row: &[f64]) -> f64 {
        let p = row.len();
        theta[p] + row.iter().zip(theta).map(|(x, w)| x * w).sum::<f64>()
    }

    pub fn loss(&self, theta: &[f64]) -> f64 {
        let n = self.x.n_rows() as f64;
        let p = self.x.n_cols();
        let data: f64 = self
            .x
            .rows()
            .zip(self.y)
            .map(|(row, &y)| {
                let m = self.margin(theta, row);
                // −[y log σ(m) + (1−y) log(1−σ(m))]
                if y {
                    log1p_exp(-m)
                } else {
                    log1p_exp(m)
                }
            })
            .sum();
        data / n + self.lambda * theta[..p].iter().map(|w| w * w).sum::<f64>()
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let n = self.x.n_rows() as f64;
        let p = self.x.n_cols();
        let mut g = vec![0.0; p + 1];
        for (row, &y) in self.x.rows().zip(self.y) {
            let r = sigmoid(self.margin(theta, row)) - y as u8 as f64;
            for j in 0..p {
                g[j] += r * row[j];
            }
            g[p] += r;
        }
        for j in 0..=p {
            g[j] /= n;
        }
        for j in 0..p {
            g[j] += 2.0 * self.lambda * theta[j];
        }
        g
    }

    fn hessian(&self, theta: &[f64]) -> DMatrix<f64> {
        let n = self.x.n_rows() as f64;
        let p = self.x.n_cols();
        let mut h = DMatrix::<f64>::zeros(p + 1, p + 1);
        let mut ext = vec![1.0; p + 1];
        for row in self.x.rows() {
            let s = sigmoid(self.margin(theta, row));
            let w = s * (1.0 - s);
            ext[..p].copy_from_slice(row);
            for i in 0..=p {
                let wi = w * ext[i];
                for j in 0..=i {
                    h[(i, j)] += wi * ext[j];
                }
            }
        }
        for i in 0..=p {
            for j in 0..=i {
                h[(i, j)] /= n;
                h[(j, i)] = h[(i, j)];
            }
        }
        for j in 0..p {
            h[(j, j)] += 2.0 * self.lambda;
        }
        h
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimize the objective starting from `start` until ‖∇‖∞ ≤ tolerance.
pub fn fit_logistic(obj: &LogisticObjective<'_>, params: &LogisticParams, start: Vec<f64>) -> Result<Vec<f64>> {
    let dim = obj.x.n_cols() + 1;
    let mut theta = start;
    assert_eq!(theta.len(), dim);
    let mut loss = obj.loss(&theta);
    for _ in 0..params.max_iter {
        let g = obj.gradient(&theta);
        if inf_norm(&g) <= params.gradient_tolerance {
            return Ok(theta);
        }
        let h = obj.hessian(&theta);
        let rhs = DVector::from_iterator(dim, g.iter().map(|v| -v));
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            // unpenalized intercept with saturated probabilities: fall back to a ridge step
            None => (h + DMatrix::identity(dim, dim) * 1e-8).lu().solve(&rhs).unwrap_or(rhs.clone()),
        };
        let slope: f64 = step.iter().zip(&g).map(|(s, g)| s * g).sum();
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand: Vec<f64> = theta.iter().zip(step.iter()).map(|(w, s)| w + t * s).collect();
            let l = obj.loss(&cand);
            if l <= loss + 1e-4 * t * slope {
                theta = cand;
                loss = l;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // at the floating-point floor of the loss; accept if the gradient is small enough
            break;
        }
    }
    let g = inf_norm(&obj.gradient(&theta));
    if g <= params.gradient_tolerance {
        Ok(theta)
    } else {
        Err(Error::Convergence { model: "logistic regression", iterations: params.max_iter, best_criterion: g })
    }
}
