//! Time-domain heart-rate and body-acceleration features per window.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{Label, Window};
use crate::util::{fmt_real, read_to_string, write_atomic};

pub const N_FEATURES: usize = 9;

/// Canonical feature order used by every model.
pub const FEATURE_NAMES: [&str; N_FEATURES] =
    ["hrmean", "hrmax", "hrmin", "hrsd", "hrrange", "linaccmean", "linaccmax", "linaccmin", "linaccrange"];

pub const FEATURES_HEADER: &str =
    "participant_id,window_start,hrmean,hrmax,hrmin,hrsd,hrrange,linaccmean,linaccmax,linaccmin,linaccrange,label";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feature {
    HrMean,
    HrMax,
    HrMin,
    HrSd,
    HrRange,
    LinAccMean,
    LinAccMax,
    LinAccMin,
    LinAccRange,
}

impl Feature {
    pub const ALL: [Feature; N_FEATURES] = [
        Feature::HrMean,
        Feature::HrMax,
        Feature::HrMin,
        Feature::HrSd,
        Feature::HrRange,
        Feature::LinAccMean,
        Feature::LinAccMax,
        Feature::LinAccMin,
        Feature::LinAccRange,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        FEATURE_NAMES[self.index()]
    }

    pub fn from_name(name: &str) -> Option<Self> {
        FEATURE_NAMES.iter().position(|n| *n == name).map(|i| Feature::ALL[i])
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Nine features of one window, in [`FEATURE_NAMES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub participant_id: String,
    pub window_start: i64,
    pub values: [f64; N_FEATURES],
    pub label: Label,
}

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        self.values[f.index()]
    }

    pub fn hrmean(&self) -> f64 {
        self.get(Feature::HrMean)
    }
    pub fn hrmax(&self) -> f64 {
        self.get(Feature::HrMax)
    }
    pub fn hrmin(&self) -> f64 {
        self.get(Feature::HrMin)
    }
    pub fn hrsd(&self) -> f64 {
        self.get(Feature::HrSd)
    }
    pub fn hrrange(&self) -> f64 {
        self.get(Feature::HrRange)
    }
    pub fn linaccmean(&self) -> f64 {
        self.get(Feature::LinAccMean)
    }
    pub fn linaccmax(&self) -> f64 {
        self.get(Feature::LinAccMax)
    }
    pub fn linaccmin(&self) -> f64 {
        self.get(Feature::LinAccMin)
    }
    pub fn linaccrange(&self) -> f64 {
        self.get(Feature::LinAccRange)
    }
}

/// Body acceleration magnitude √(ax² + ay² + az²).
pub fn acc_magnitude(ax: f64, ay: f64, az: f64) -> f64 {
    (ax * ax + ay * ay + az * az).sqrt()
}

struct Summary {
    mean: f64,
    max: f64,
    min: f64,
    sd: f64,
}

/// Mean, extremes and sample (n−1) standard deviation; needs n ≥ 2.
fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let (min, max) = xs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let ss = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    // rounding can push the mean a hair outside [min, max]
    Summary { mean: mean.clamp(min, max), max, min, sd: (ss / (n - 1.0)).sqrt() }
}

/// Compute the nine features over a window's present values.
pub fn extract_features(w: &Window) -> Result<FeatureVector> {
    let hr: Vec<f64> = w.samples.iter().filter_map(|s| s.hr).collect();
    let acc: Vec<f64> = w.samples.iter().filter_map(|s| s.acc()).map(|[x, y, z]| acc_magnitude(x, y, z)).collect();
    let reject = |reason: String| Error::WindowRejected {
        participant_id: w.participant_id.clone(),
        window_start: w.start,
        reason,
    };
    if hr.len() < 2 {
        return Err(reject(format!("needs at least 2 heart-rate values, has {}", hr.len())));
    }
    if acc.len() < 2 {
        return Err(reject(format!("needs at least 2 acceleration values, has {}", acc.len())));
    }
    let h = summarize(&hr);
    let a = summarize(&acc);
    Ok(FeatureVector {
        participant_id: w.participant_id.clone(),
        window_start: w.start,
        values: [h.mean, h.max, h.min, h.sd, h.max - h.min, a.mean, a.max, a.min, a.max - a.min],
        label: w.label,
    })
}

pub fn features_csv(vectors: &[FeatureVector]) -> String {
    let mut out = String::with_capacity(256 * (vectors.len() + 1));
    out.push_str(FEATURES_HEADER);
    out.push('\n');
    for v in vectors {
        out.push_str(&v.participant_id);
        out.push(',');
        out.push_str(&v.window_start.to_string());
        for x in v.values {
            out.push(',');
            out.push_str(&fmt_real(x));
        }
        out.push(',');
        out.push_str(&v.label.as_u8().to_string());
        out.push('\n');
    }
    out
}

pub fn write_features(path: &Path, vectors: &[FeatureVector]) -> Result<()> {
    write_atomic(path, features_csv(vectors).as_bytes())
}

pub fn read_features(path: &Path) -> Result<Vec<FeatureVector>> {
    parse_features(&read_to_string(path)?, path)
}

pub fn parse_features(text: &str, path: &Path) -> Result<Vec<FeatureVector>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end() == FEATURES_HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("header must be exactly `{FEATURES_HEADER}`"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != N_FEATURES + 3 {
            return Err(Error::parse(
                path,
                line_no,
                format!("expected {} fields, found {}", N_FEATURES + 3, fields.len()),
            ));
        }
        let window_start =
            fields[1].parse::<i64>().map_err(|_| Error::parse(path, line_no, "window_start is not an integer"))?;
        let mut values = [0.0; N_FEATURES];
        for (k, v) in values.iter_mut().enumerate() {
            *v =
                fields[k + 2].parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    Error::parse(path, line_no, format!("{} is not a finite number", FEATURE_NAMES[k]))
                })?;
        }
        let label = match fields[N_FEATURES + 2].trim() {
            "1" => Label::Hyperarousal,
            "0" => Label::NonHyperarousal,
            other => return Err(Error::parse(path, line_no, format!("label must be 0 or 1, found {other:?}"))),
        };
        out.push(FeatureVector { participant_id: fields[0].to_string(), window_start, values, label });
    }
    Ok(out)
}
