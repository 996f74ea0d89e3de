//! C-SVM with an RBF kernel trained by sequential minimal optimization
//! (maximal-gain second-order working-set selection), plus Platt scaling.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// Kernel width in k(x, z) = exp(−sigma·‖x − z‖²).
    pub sigma: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Iteration cap; defaults to max(10⁷, 100·n).
    #[serde(default)]
    pub max_iter: Option<usize>,
}

fn default_tolerance() -> f64 {
    1e-3
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 5.0, sigma: 12.0, tolerance: 1e-3, max_iter: None }
    }
}

pub fn rbf(sigma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-sigma * d2).exp()
}

/// Kernel rows with a bounded FIFO cache.
struct KernelRows<'a> {
    x: &'a Matrix,
    sigma: f64,
    cache: HashMap<usize, Arc<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(x: &'a Matrix, sigma: f64) -> Self {
        // about 256 MiB of cached rows
        let capacity = ((256usize << 20) / (8 * x.n_rows().max(1))).max(2);
        KernelRows { x, sigma, cache: HashMap::new(), order: VecDeque::new(), capacity }
    }

    fn row(&mut self, i: usize) -> Arc<Vec<f64>> {
        if let Some(r) = self.cache.get(&i) {
            return r.clone();
        }
        let xi = self.x.row(i);
        let r: Arc<Vec<f64>> = Arc::new(self.x.rows().map(|xj| rbf(self.sigma, xi, xj)).collect());
        if self.order.len() >= self.capacity {
            if let Some(old) = self.order.pop_front() {
                self.cache.remove(&old);
            }
        }
        self.order.push_back(i);
        self.cache.insert(i, r.clone());
        r
    }
}

/// Dual solution of the C-SVM problem.
#[derive(Debug, Clone)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Gradient of ½αᵀQα − 1ᵀα at the solution.
    pub gradient: Vec<f64>,
    /// Decision function is Σ αᵢyᵢk(xᵢ, x) − rho.
    pub rho: f64,
    pub iterations: usize,
    /// Final maximal KKT violation m(α) − M(α).
    pub gap: f64,
}

fn sign(y: bool) -> f64 {
    if y {
        1.0
    } else {
        -1.0
    }
}

const TAU: f64 = 1e-12;

pub fn solve_smo(x: &Matrix, y: &[bool], params: &SvmParams) -> Result<SmoSolution> {
    let n = x.n_rows();
    let c = params.c;
    let ys: Vec<f64> = y.iter().map(|&v| sign(v)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut kernel = KernelRows::new(x, params.sigma);
    let max_iter = params.max_iter.unwrap_or_else(|| 10_000_000usize.max(100 * n));
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut iterations = 0;
    let mut gap;
    loop {
        let mut gmax = f64::NEG_INFINITY;
        let mut sel_i = None;
        for t in 0..n {
            if in_up(alpha[t], ys[t]) {
                let v = -ys[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    sel_i = Some(t);
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut sel_j = None;
        let mut obj_min = f64::INFINITY;
        let ki = sel_i.map(|i| kernel.row(i));
        for t in 0..n {
            if !in_low(alpha[t], ys[t]) {
                continue;
            }
            let v = ys[t] * grad[t];
            if v > gmax2 {
                gmax2 = v;
            }
            if let (Some(i), Some(ki)) = (sel_i, ki.as_ref()) {
                let diff = gmax + v;
                if diff > 0.0 {
                    let mut quad = 2.0 - 2.0 * ki[t];
                    if quad <= 0.0 {
                        quad = TAU;
                    }
                    let obj = -diff * diff / quad;
                    if obj < obj_min && t != i {
                        obj_min = obj;
                        sel_j = Some(t);
                    }
                }
            }
        }
        gap = gmax + gmax2;
        let (Some(i), Some(j)) = (sel_i, sel_j) else { break };
        if gap < params.tolerance {
            break;
        }
        if iterations >= max_iter {
            return Err(Error::Convergence { model: "rbf svm", iterations, best_criterion: gap });
        }
        iterations += 1;

        let ki = ki.unwrap();
        let kj = kernel.row(j);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let (mut ai, mut aj) = (ai_old, aj_old);
        let qij = ys[i] * ys[j] * ki[j];
        if ys[i] != ys[j] {
            let mut quad = 2.0 + 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let mut quad = 2.0 - 2.0 * qij;
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        alpha[i] = ai;
        alpha[j] = aj;
        let (dai, daj) = (ai - ai_old, aj - aj_old);
        let (si, sj) = (ys[i] * dai, ys[j] * daj);
        for t in 0..n {
            grad[t] += ys[t] * (ki[t] * si + kj[t] * sj);
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };
    Ok(SmoSolution { alpha, gradient: grad, rho, iterations, gap })
}

/// Largest per-point KKT violation of a solution.
pub fn kkt_violation(sol: &SmoSolution, y: &[bool], c: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for t in 0..y.len() {
        let ys = sign(y[t]);
        // yᵢ f(xᵢ) − 1
        let m = sol.gradient[t] - ys * sol.rho;
        let v = if sol.alpha[t] <= 0.0 {
            (-m).max(0.0)
        } else if sol.alpha[t] >= c {
            m.max(0.0)
        } else {
            m.abs()
        };
        worst = worst.max(v);
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub sigma: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// αᵢyᵢ per support vector.
    pub coefficients: Vec<f64>,
    pub rho: f64,
    /// P(y = 1 | f) = 1 / (1 + exp(A·f + B)).
    pub platt_a: f64,
    pub platt_b: f64,
}

impl SvmModel {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors.iter().zip(&self.coefficients).map(|(sv, c)| c * rbf(self.sigma, sv, x)).sum::<f64>()
            - self.rho
    }

    pub fn probability(&self, decision: f64) -> f64 {
        platt_probability(self.platt_a, self.platt_b, decision)
    }
}

pub(crate) fn train_svm(params: &SvmParams, x: &Matrix, y: &[bool]) -> Result<SvmModel> {
    let sol = solve_smo(x, y, params)?;
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    let mut decisions = Vec::with_capacity(y.len());
    for t in 0..y.len() {
        let ys = sign(y[t]);
        // Σⱼ αⱼyⱼK(j, t) = yₜ(Gₜ + 1)
        decisions.push(ys * (sol.gradient[t] + 1.0) - sol.rho);
        if sol.alpha[t] > 0.0 {
            support_vectors.push(x.row(t).to_vec());
            coefficients.push(sol.alpha[t] * ys);
        }
    }
    let (platt_a, platt_b) = fit_platt(&decisions, y);
    Ok(SvmModel { sigma: params.sigma, support_vectors, coefficients, rho: sol.rho, platt_a, platt_b })
}

pub fn platt_probability(a: f64, b: f64, decision: f64) -> f64 {
    let z = decision * a + b;
    if z >= 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Platt sigmoid fit with regularized targets, by Newton's method with
/// backtracking (the Lin–Lin–Weng formulation).
pub fn fit_platt(decisions: &[f64], y: &[bool]) -> (f64, f64) {
    let prior1 = y.iter().filter(|&&v| v).count() as f64;
    let prior0 = y.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let targets: Vec<f64> = y.iter().map(|&v| if v { hi } else { lo }).collect();
    let objective = |a: f64, b: f64| -> f64 {
        decisions
            .iter()
            .zip(&targets)
            .map(|(&f, &t)| {
                let z = f * a + b;
                if z >= 0.0 {
                    t * z + (-z).exp().ln_1p()
                } else {
                    (t - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let (mut a, mut b) = (0.0, ((prior0 + 1.0) / (prior1 + 1.0)).ln());
    let mut fval = objective(a, b);
    const MIN_STEP: f64 = 1e-10;
    const SIGMA: f64 = 1e-12;
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (SIGMA, SIGMA, 0.0, 0.0, 0.0);
        for (&f, &t) in decisions.iter().zip(&targets) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = t - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        while step >= MIN_STEP {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step /= 2.0;
        }
        if step < MIN_STEP {
            break;
        }
    }
    (a, b)
}
