//! Local-level (random walk plus noise) Kalman filter, RTS smoother and
//! gap-limited imputation.
//!
//! State `x_t = x_{t-1} + w_t`, `w_t ~ N(0, q)`; observation `y_t = x_t + v_t`,
//! `v_t ~ N(0, r)`. The filter starts at the first observed value with
//! variance `r`, which is the exact diffuse initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Noise variances of the local-level model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalLevel {
    pub process_noise: f64,
    pub observation_noise: f64,
}

impl LocalLevel {
    /// Fallback when the likelihood cannot be maximized.
    fn fallback(values: &[Option<f64>]) -> Self {
        let obs: Vec<f64> = values.iter().flatten().copied().collect();
        let var = sample_variance(&obs);
        LocalLevel { process_noise: 1.0, observation_noise: if var.is_finite() && var > 0.0 { var } else { 1.0 } }
    }
}

/// Imputation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputationConfig {
    /// Longest run of missing samples that is filled.
    pub max_gap: usize,
    /// MSE cut-off used by [`calibrate_max_gap`].
    pub mse_threshold: f64,
    /// Fixed process noise variance; fitted by maximum likelihood when absent.
    #[serde(default)]
    pub process_noise: Option<f64>,
    /// Fixed observation noise variance; fitted by maximum likelihood when absent.
    #[serde(default)]
    pub observation_noise: Option<f64>,
}

impl Default for ImputationConfig {
    fn default() -> Self {
        ImputationConfig { max_gap: 5, mse_threshold: 15.0, process_noise: None, observation_noise: None }
    }
}

impl ImputationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mse_threshold > 0.0) {
            return Err(Error::Config("imputation mse_threshold must be > 0".into()));
        }
        if let Some(q) = self.process_noise {
            if !(q >= 0.0 && q.is_finite()) {
                return Err(Error::Config("imputation process_noise must be >= 0".into()));
            }
        }
        if let Some(r) = self.observation_noise {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::Config("imputation observation_noise must be > 0".into()));
            }
        }
        Ok(())
    }

    fn model_for(&self, values: &[Option<f64>]) -> LocalLevel {
        match (self.process_noise, self.observation_noise) {
            (Some(process_noise), Some(observation_noise)) => LocalLevel { process_noise, observation_noise },
            (q, r) => {
                let fitted = fit_local_level(values);
                LocalLevel {
                    process_noise: q.unwrap_or(fitted.process_noise),
                    observation_noise: r.unwrap_or(fitted.observation_noise),
                }
            }
        }
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

struct Filtered {
    /// predicted mean/variance of x_t given y_1..y_{t-1}
    pred_mean: Vec<f64>,
    pred_var: Vec<f64>,
    /// filtered mean/variance of x_t given y_1..y_t
    filt_mean: Vec<f64>,
    filt_var: Vec<f64>,
    first: usize,
}

fn filter(values: &[Option<f64>], model: LocalLevel) -> Option<Filtered> {
    let first = values.iter().position(|v| v.is_some())?;
    let n = values.len();
    let (q, r) = (model.process_noise, model.observation_noise);
    let mut f = Filtered {
        pred_mean: vec![0.0; n],
        pred_var: vec![0.0; n],
        filt_mean: vec![0.0; n],
        filt_var: vec![0.0; n],
        first,
    };
    let y0 = values[first].unwrap();
    f.pred_mean[first] = y0;
    f.pred_var[first] = f64::INFINITY;
    f.filt_mean[first] = y0;
    f.filt_var[first] = r;
    for t in first + 1..n {
        let a = f.filt_mean[t - 1];
        let p = f.filt_var[t - 1] + q;
        f.pred_mean[t] = a;
        f.pred_var[t] = p;
        match values[t] {
            Some(y) => {
                let k = p / (p + r);
                f.filt_mean[t] = a + k * (y - a);
                f.filt_var[t] = (1.0 - k) * p;
            }
            None => {
                f.filt_mean[t] = a;
                f.filt_var[t] = p;
            }
        }
    }
    Some(f)
}

/// Rauch–Tung–Striebel smoothed state means for every position.
///
/// Positions before the first observation take the first smoothed value.
/// Returns `None` when nothing is observed.
pub fn smooth(values: &[Option<f64>], model: LocalLevel) -> Option<Vec<f64>> {
    let f = filter(values, model)?;
    let n = values.len();
    let mut out = vec![0.0; n];
    out[n - 1] = f.filt_mean[n - 1];
    for t in (f.first..n - 1).rev() {
        let p_next = f.pred_var[t + 1];
        let gain = if p_next > 0.0 { f.filt_var[t] / p_next } else { 1.0 };
        out[t] = f.filt_mean[t] + gain * (out[t + 1] - f.pred_mean[t + 1]);
    }
    for t in 0..f.first {
        out[t] = out[f.first];
    }
    Some(out)
}

/// Concentrated log-likelihood for signal-to-noise ratio `ratio = q / r`,
/// with the implied observation variance estimate.
fn concentrated_loglik(values: &[Option<f64>], ratio: f64) -> Option<(f64, f64)> {
    let f = filter(values, LocalLevel { process_noise: ratio, observation_noise: 1.0 })?;
    let mut sum_log = 0.0;
    let mut sum_sq = 0.0;
    let mut n = 0usize;
    for t in f.first + 1..values.len() {
        if let Some(y) = values[t] {
            let var = f.pred_var[t] + 1.0;
            let v = y - f.pred_mean[t];
            sum_log += var.ln();
            sum_sq += v * v / var;
            n += 1;
        }
    }
    if n < 3 {
        return None;
    }
    let sigma2 = sum_sq / n as f64;
    if !(sigma2.is_finite() && sigma2 > 1e-12) {
        return None;
    }
    let ll = -0.5 * (sum_log + n as f64 * sigma2.ln() + n as f64);
    Some((ll, sigma2))
}

/// Maximum-likelihood noise variances, falling back to process 1.0 and
/// observation = sample variance when the likelihood is degenerate.
pub fn fit_local_level(values: &[Option<f64>]) -> LocalLevel {
    const LO: f64 = -9.0 * std::f64::consts::LN_10;
    const HI: f64 = 4.0 * std::f64::consts::LN_10;
    const GRID: usize = 27;
    let eval = |log_ratio: f64| concentrated_loglik(values, log_ratio.exp());

    let mut best: Option<(f64, f64)> = None;
    for i in 0..GRID {
        let x = LO + (HI - LO) * i as f64 / (GRID - 1) as f64;
        if let Some((ll, _)) = eval(x) {
            if best.is_none_or(|(_, b)| ll > b) {
                best = Some((x, ll));
            }
        }
    }
    let Some((x0, _)) = best else {
        return LocalLevel::fallback(values);
    };
    // golden-section refinement within one grid cell on either side
    let step = (HI - LO) / (GRID - 1) as f64;
    let (mut a, mut b) = ((x0 - step).max(LO), (x0 + step).min(HI));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let score = |x: f64| eval(x).map(|(ll, _)| ll).unwrap_or(f64::NEG_INFINITY);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (score(c), score(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = score(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = score(d);
        }
    }
    let x = 0.5 * (a + b);
    match eval(x) {
        Some((_, sigma2)) => LocalLevel { process_noise: x.exp() * sigma2, observation_noise: sigma2 },
        None => LocalLevel::fallback(values),
    }
}

/// Fill every maximal missing run of length ≤ `cfg.max_gap` with smoothed
/// estimates. Longer runs stay missing and observed values are untouched.
pub fn impute_series(values: &[Option<f64>], cfg: &ImputationConfig) -> Vec<Option<f64>> {
    if cfg.max_gap == 0 || values.iter().all(|v| v.is_none()) || values.iter().all(|v| v.is_some()) {
        return values.to_vec();
    }
    let model = cfg.model_for(values);
    impute_with_model(values, cfg.max_gap, model)
}

/// [`impute_series`] with known noise variances.
pub fn impute_with_model(values: &[Option<f64>], max_gap: usize, model: LocalLevel) -> Vec<Option<f64>> {
    let Some(smoothed) = smooth(values, model) else {
        return values.to_vec();
    };
    let mut out = values.to_vec();
    let mut t = 0;
    while t < values.len() {
        if values[t].is_some() {
            t += 1;
            continue;
        }
        let start = t;
        while t < values.len() && values[t].is_none() {
            t += 1;
        }
        if t - start <= max_gap {
            for i in start..t {
                out[i] = Some(smoothed[i]);
            }
        }
    }
    out
}

/// Mean squared imputation error per candidate gap length.
#[derive(Debug, Clone, PartialEq)]
pub struct GapCalibration {
    pub table: Vec<(usize, f64)>,
    pub chosen: usize,
}

/// Estimate imputation MSE for each candidate gap length by repeatedly
/// hiding a run of that length from a complete series.
///
/// The chosen gap is the last of the ascending candidates reached before the
/// first one whose MSE is not below `mse_threshold` (0 if the smallest fails).
pub fn calibrate_max_gap(
    complete: &[f64],
    candidate_gaps: &[usize],
    trials: usize,
    seed: u64,
    mse_threshold: f64,
) -> Result<GapCalibration> {
    let n = complete.len();
    if candidate_gaps.is_empty() || trials == 0 {
        return Err(Error::Invalid("calibration needs at least one candidate gap and one trial".into()));
    }
    if let Some(&k) = candidate_gaps.iter().find(|&&k| k == 0 || k + 2 > n) {
        return Err(Error::Invalid(format!("candidate gap {k} does not fit in a series of length {n}")));
    }
    if complete.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("calibration series must be complete and finite".into()));
    }
    let observed: Vec<Option<f64>> = complete.iter().copied().map(Some).collect();
    let model = fit_local_level(&observed);

    let mut gaps = candidate_gaps.to_vec();
    gaps.sort_unstable();
    gaps.dedup();
    let mut table = Vec::with_capacity(gaps.len());
    for &k in &gaps {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::util::derive_indexed(seed, "calibrate-gap", k as u64));
        let mut sq = 0.0;
        let mut count = 0usize;
        let mut work = observed.clone();
        for _ in 0..trials {
            // interior run: at least one observed value on each side
            let start = rng.random_range(1..=n - k - 1);
            for v in &mut work[start..start + k] {
                *v = None;
            }
            let imputed = impute_with_model(&work, k, model);
            for i in start..start + k {
                sq += (imputed[i].unwrap() - complete[i]).powi(2);
                count += 1;
                work[i] = Some(complete[i]);
            }
        }
        table.push((k, sq / count as f64));
    }
    let mut chosen = 0;
    for &(k, mse) in &table {
        if mse < mse_threshold {
            chosen = k;
        } else {
            break;
        }
    }
    Ok(GapCalibration { table, chosen })
}
