//! Seeded synthetic heart-rate and acceleration streams with annotated
//! events, for checking the pipeline against a known ground truth.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{EventMark, Recording, Sample};
use crate::error::{Error, Result};
use crate::util::{derive_indexed, derive_seed, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub participants: usize,
    /// Seconds of 1 Hz data per participant.
    pub duration: i64,
    pub baseline_hr: f64,
    /// Standard deviation of per-participant baseline offsets.
    pub baseline_hr_spread: f64,
    pub hr_ar_coefficient: f64,
    /// Innovation sd of the AR(1) deviation.
    pub hr_noise_sd: f64,
    /// Events per hour.
    pub event_rate: f64,
    /// Seconds of physiological response after each onset.
    pub event_duration: i64,
    pub event_hr_shift: f64,
    pub event_hr_sd_multiplier: f64,
    pub event_activity_multiplier: f64,
    /// Exercise episodes per hour.
    pub activity_episode_rate: f64,
    /// Mean episode length in seconds.
    pub activity_episode_duration: f64,
    /// Per-axis sd of body acceleration at rest and during episodes.
    pub rest_acc_sd: f64,
    pub activity_acc_sd: f64,
    /// Heart-rate rise during exercise episodes.
    pub activity_hr_gain: f64,
    pub missing_rate: f64,
    /// Mean length of a missing burst, in samples.
    pub missing_burst_mean: f64,
    pub start_epoch: i64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            participants: 20,
            duration: 4 * 3600,
            baseline_hr: 75.0,
            baseline_hr_spread: 4.0,
            hr_ar_coefficient: 0.9,
            hr_noise_sd: 2.0,
            event_rate: 6.0,
            event_duration: 15,
            event_hr_shift: 25.0,
            event_hr_sd_multiplier: 2.0,
            event_activity_multiplier: 0.3,
            activity_episode_rate: 2.0,
            activity_episode_duration: 300.0,
            rest_acc_sd: 0.3,
            activity_acc_sd: 1.5,
            activity_hr_gain: 10.0,
            missing_rate: 0.05,
            missing_burst_mean: 3.0,
            start_epoch: 1_700_000_000,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// No event response at all: labels carry no signal.
    pub fn null_effect() -> Self {
        SynthConfig {
            event_hr_shift: 0.0,
            event_hr_sd_multiplier: 1.0,
            event_activity_multiplier: 1.0,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.participants == 0 {
            return bad("participants must be positive");
        }
        if self.duration <= 0 || self.event_duration <= 0 {
            return bad("duration and event_duration must be positive");
        }
        if !(self.baseline_hr > 0.0) || !(self.hr_noise_sd > 0.0) || !(self.baseline_hr_spread >= 0.0) {
            return bad("baseline_hr and hr_noise_sd must be positive, baseline_hr_spread non-negative");
        }
        if !(self.hr_ar_coefficient > 0.0 && self.hr_ar_coefficient < 1.0) {
            return bad("hr_ar_coefficient must lie in (0, 1)");
        }
        if !(self.event_rate > 0.0) || !(self.activity_episode_rate > 0.0) || !(self.activity_episode_duration > 0.0) {
            return bad("event and activity rates and durations must be positive");
        }
        if !(self.event_hr_sd_multiplier >= 1.0) {
            return bad("event_hr_sd_multiplier must be at least 1");
        }
        if !(self.event_activity_multiplier > 0.0 && self.event_activity_multiplier <= 1.0) {
            return bad("event_activity_multiplier must lie in (0, 1]");
        }
        if !(self.rest_acc_sd > 0.0 && self.activity_acc_sd > 0.0) {
            return bad("acceleration sds must be positive");
        }
        if !(self.missing_rate >= 0.0 && self.missing_rate < 1.0) {
            return bad("missing_rate must lie in [0, 1)");
        }
        if !(self.missing_burst_mean >= 1.0) {
            return bad("missing_burst_mean must be at least 1");
        }
        if !self.event_hr_shift.is_finite() || !self.activity_hr_gain.is_finite() {
            return bad("hr shifts must be finite");
        }
        Ok(())
    }
}

/// Ground-truth response interval `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthEvent {
    pub participant_id: String,
    pub event_start: i64,
    pub event_end: i64,
}

pub fn participant_id(i: usize) -> String {
    format!("P{:03}", i + 1)
}

/// Sorted, distinct integer onsets of a Poisson process on `[0, span)`.
fn poisson_onsets(rng: &mut ChaCha8Rng, per_hour: f64, span: i64) -> Vec<i64> {
    let gap = Exp::new(per_hour / 3600.0).expect("positive rate");
    let mut out: Vec<i64> = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= span as f64 {
            return out;
        }
        let s = t.floor() as i64;
        if out.last() != Some(&s) {
            out.push(s);
        }
    }
}

/// Two-state burst process with stationary missing probability `rate` and
/// mean burst length `burst`.
fn missing_mask(rng: &mut ChaCha8Rng, rate: f64, burst: f64, n: usize) -> Vec<bool> {
    if rate == 0.0 {
        return vec![false; n];
    }
    let exit = 1.0 / burst;
    let enter = (rate / (burst * (1.0 - rate))).min(1.0);
    let mut missing = rng.random::<f64>() < rate;
    (0..n)
        .map(|_| {
            let out = missing;
            missing = if missing { rng.random::<f64>() >= exit } else { rng.random::<f64>() < enter };
            out
        })
        .collect()
}

fn quantize(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

fn generate_participant(cfg: &SynthConfig, index: usize) -> (Recording, Vec<TruthEvent>) {
    let root = derive_indexed(cfg.seed, "synth-participant", index as u64);
    let stream = |name: &str| ChaCha8Rng::seed_from_u64(derive_seed(root, name));
    let n = cfg.duration as usize;
    let id = participant_id(index);

    let onsets = poisson_onsets(&mut stream("events"), cfg.event_rate, cfg.duration);
    let mut in_event = vec![false; n];
    for &t in &onsets {
        let end = (t + cfg.event_duration).min(cfg.duration);
        in_event[t as usize..end as usize].iter_mut().for_each(|v| *v = true);
    }

    let mut activity_rng = stream("activity");
    let mut active = vec![false; n];
    let episode_len = Exp::new(1.0 / cfg.activity_episode_duration).expect("positive duration");
    for t in poisson_onsets(&mut activity_rng, cfg.activity_episode_rate, cfg.duration) {
        let len = episode_len.sample(&mut activity_rng).ceil() as i64;
        let end = (t + len).min(cfg.duration);
        active[t as usize..end as usize].iter_mut().for_each(|v| *v = true);
    }

    let mut hr_rng = stream("hr");
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");
    let baseline = cfg.baseline_hr + cfg.baseline_hr_spread * std_normal.sample(&mut hr_rng);
    let phi = cfg.hr_ar_coefficient;
    let mut deviation = cfg.hr_noise_sd / (1.0 - phi * phi).sqrt() * std_normal.sample(&mut hr_rng);
    let mut acc_rng = stream("acc");
    let hr_missing = missing_mask(&mut stream("hr-missing"), cfg.missing_rate, cfg.missing_burst_mean, n);
    let acc_missing = missing_mask(&mut stream("acc-missing"), cfg.missing_rate, cfg.missing_burst_mean, n);

    let mut samples = Vec::with_capacity(n);
    for t in 0..n {
        let (sd_mult, shift, acc_mult) = if in_event[t] {
            (cfg.event_hr_sd_multiplier, cfg.event_hr_shift, cfg.event_activity_multiplier)
        } else {
            (1.0, 0.0, 1.0)
        };
        deviation = phi * deviation + cfg.hr_noise_sd * sd_mult * std_normal.sample(&mut hr_rng);
        let gain = if active[t] { cfg.activity_hr_gain } else { 0.0 };
        let hr = quantize((baseline + gain + shift + deviation).max(30.0), 0.1);
        let acc_sd = if active[t] { cfg.activity_acc_sd } else { cfg.rest_acc_sd } * acc_mult;
        let acc: [f64; 3] = std::array::from_fn(|_| quantize(acc_sd * std_normal.sample(&mut acc_rng), 0.001));
        let timestamp = cfg.start_epoch + t as i64;
        let (ax, ay, az) = if acc_missing[t] { (None, None, None) } else { (Some(acc[0]), Some(acc[1]), Some(acc[2])) };
        samples.push(Sample { timestamp, hr: (!hr_missing[t]).then_some(hr), acc_x: ax, acc_y: ay, acc_z: az });
    }

    let events = onsets.iter().map(|&t| EventMark { timestamp: cfg.start_epoch + t }).collect();
    let truth = onsets
        .iter()
        .map(|&t| TruthEvent {
            participant_id: id.clone(),
            event_start: cfg.start_epoch + t,
            event_end: cfg.start_epoch + (t + cfg.event_duration).min(cfg.duration),
        })
        .collect();
    (Recording { participant_id: id, samples, events }, truth)
}

/// Recordings ordered by participant, plus the response intervals.
pub fn generate(cfg: &SynthConfig) -> Result<(Vec<Recording>, Vec<TruthEvent>)> {
    cfg.validate()?;
    let parts: Vec<(Recording, Vec<TruthEvent>)> =
        (0..cfg.participants).into_par_iter().map(|i| generate_participant(cfg, i)).collect();
    let mut recordings = Vec::with_capacity(parts.len());
    let mut truth = Vec::new();
    for (r, t) in parts {
        recordings.push(r);
        truth.extend(t);
    }
    Ok((recordings, truth))
}

pub fn truth_csv(truth: &[TruthEvent]) -> String {
    let mut out = String::from("participant_id,event_start,event_end\n");
    for t in truth {
        let _ = writeln!(out, "{},{},{}", t.participant_id, t.event_start, t.event_end);
    }
    out
}

pub fn write_truth(path: &Path, truth: &[TruthEvent]) -> Result<()> {
    write_atomic(path, truth_csv(truth).as_bytes())
}
