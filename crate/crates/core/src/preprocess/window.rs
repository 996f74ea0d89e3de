//! Sliding-window segmentation and labeling of imputed recordings.

use serde::{Deserialize, Serialize};

use super::kalman::{impute_series, ImputationConfig};
use crate::data::{Recording, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    NonHyperarousal,
    Hyperarousal,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::NonHyperarousal => 0,
            Label::Hyperarousal => 1,
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Hyperarousal
    }

    pub fn from_flag(positive: bool) -> Self {
        if positive {
            Label::Hyperarousal
        } else {
            Label::NonHyperarousal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    /// Window length in seconds.
    pub length: i64,
    /// Start-to-start advance in seconds.
    pub step: i64,
    /// Windows with a larger missing fraction are dropped.
    pub max_missing_fraction: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { length: 60, step: 30, max_missing_fraction: 0.80 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.length <= 0 || self.step <= 0 {
            return Err(Error::Config("window length and step must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return Err(Error::Config("window max_missing_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// A labeled slice `[start, start + length)` of an imputed 1 Hz grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub participant_id: String,
    pub start: i64,
    pub duration: i64,
    /// One entry per second of the window, after imputation.
    pub samples: Vec<Sample>,
    pub label: Label,
    /// Missing cells over expected cells; each second has one heart-rate
    /// cell and one acceleration cell.
    pub missing_fraction: f64,
}

/// Expand a recording onto a dense 1 Hz grid from its first to its last
/// timestamp; seconds without a row become fully missing samples.
pub fn dense_grid(r: &Recording) -> Vec<Sample> {
    let Some((lo, hi)) = r.span() else {
        return Vec::new();
    };
    let mut grid: Vec<Sample> = (lo..=hi).map(Sample::missing).collect();
    for s in &r.samples {
        grid[(s.timestamp - lo) as usize] = *s;
    }
    grid
}

/// Impute each channel of a recording over its dense grid.
pub fn impute_recording(r: &Recording, cfg: &ImputationConfig) -> Vec<Sample> {
    let mut grid = dense_grid(r);
    if grid.is_empty() {
        return grid;
    }
    let channel = |get: fn(&Sample) -> Option<f64>| -> Vec<Option<f64>> { grid.iter().map(get).collect() };
    let hr = impute_series(&channel(|s| s.hr), cfg);
    let ax = impute_series(&channel(|s| s.acc_x), cfg);
    let ay = impute_series(&channel(|s| s.acc_y), cfg);
    let az = impute_series(&channel(|s| s.acc_z), cfg);
    for (i, s) in grid.iter_mut().enumerate() {
        s.hr = hr[i].map(|v| v.max(f64::MIN_POSITIVE));
        s.acc_x = ax[i];
        s.acc_y = ay[i];
        s.acc_z = az[i];
    }
    grid
}

/// Window start times for a grid spanning `[first, last]`.
pub fn window_starts(first: i64, last: i64, cfg: &WindowConfig) -> Vec<i64> {
    let mut out = Vec::new();
    let mut start = first;
    while start + cfg.length <= last + 1 {
        out.push(start);
        start += cfg.step;
    }
    out
}

/// Cut an imputed grid into labeled windows, dropping those over the
/// missingness limit.
pub fn windows_from_grid(participant_id: &str, grid: &[Sample], events: &[i64], cfg: &WindowConfig) -> Vec<Window> {
    let (Some(first), Some(last)) = (grid.first(), grid.last()) else {
        return Vec::new();
    };
    let origin = first.timestamp;
    window_starts(first.timestamp, last.timestamp, cfg)
        .into_iter()
        .filter_map(|start| {
            let lo = (start - origin) as usize;
            let samples = grid[lo..lo + cfg.length as usize].to_vec();
            let missing = samples.iter().map(|s| s.hr.is_none() as usize + s.acc().is_none() as usize).sum::<usize>();
            let missing_fraction = missing as f64 / (2 * samples.len()) as f64;
            if missing_fraction > cfg.max_missing_fraction {
                return None;
            }
            let end = start + cfg.length;
            let positive = events.iter().any(|&e| e >= start && e < end);
            Some(Window {
                participant_id: participant_id.to_string(),
                start,
                duration: cfg.length,
                samples,
                label: Label::from_flag(positive),
                missing_fraction,
            })
        })
        .collect()
}

/// Impute a recording across its whole span, then window and label it.
pub fn make_windows(r: &Recording, imputation: &ImputationConfig, cfg: &WindowConfig) -> Vec<Window> {
    let grid = impute_recording(r, imputation);
    let events: Vec<i64> = r.events.iter().map(|e| e.timestamp).collect();
    windows_from_grid(&r.participant_id, &grid, &events, cfg)
}

/// `participant_id,window_start,label,missing_fraction` dump of windows.
pub fn windows_csv(windows: &[Window]) -> String {
    let mut out = String::from("participant_id,window_start,label,missing_fraction\n");
    for w in windows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            w.participant_id,
            w.start,
            w.label.as_u8(),
            crate::util::fmt_real(w.missing_fraction)
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::EventMark;
    use proptest::prelude::*;

    fn complete(span: i64, t0: i64, events: &[i64]) -> Recording {
        Recording {
            participant_id: "p".into(),
            samples: (0..span)
                .map(|i| Sample {
                    timestamp: t0 + i,
                    hr: Some(70.0 + (i % 5) as f64),
                    acc_x: Some(0.1),
                    acc_y: Some(0.2),
                    acc_z: Some(0.3),
                })
                .collect(),
            events: events.iter().map(|&timestamp| EventMark { timestamp }).collect(),
        }
    }

    fn windows(r: &Recording) -> Vec<Window> {
        make_windows(r, &ImputationConfig::default(), &WindowConfig::default())
    }

    #[test]
    fn ninety_seconds_gives_two_overlapping_windows() {
        let t0 = 1_000;
        let w = windows(&complete(90, t0, &[]));
        assert_eq!(w.iter().map(|w| w.start).collect::<Vec<_>>(), [t0, t0 + 30]);
        assert!(w.iter().all(|w| w.samples.len() == 60 && w.missing_fraction == 0.0));
    }

    #[test]
    fn event_labels_only_containing_window() {
        let t0 = 1_000;
        let w = windows(&complete(90, t0, &[t0 + 75]));
        assert_eq!(w[0].label, Label::NonHyperarousal);
        assert_eq!(w[1].label, Label::Hyperarousal);
    }

    #[test]
    fn event_at_window_end_belongs_to_next_window() {
        let w = windows(&complete(120, 0, &[60]));
        let labels: Vec<u8> = w.iter().map(|w| w.label.as_u8()).collect();
        // windows at 0, 30, 60; 60 is excluded from [0,60) but inside [30,90) and [60,120)
        assert_eq!(labels, [0, 1, 1]);
    }

    #[test]
    fn short_recording_has_no_windows() {
        assert!(windows(&complete(59, 0, &[])).is_empty());
    }

    #[test]
    fn mostly_missing_window_is_dropped() {
        let mut r = complete(60, 0, &[]);
        // 49 fully missing seconds = 98 / 120 cells = 81.7%
        for s in &mut r.samples[5..54] {
            *s = Sample::missing(s.timestamp);
        }
        assert!(windows(&r).is_empty());
        let mut r = complete(60, 0, &[]);
        for s in &mut r.samples[5..53] {
            *s = Sample::missing(s.timestamp);
        }
        // 96 / 120 = 80% is kept
        let w = windows(&r);
        assert_eq!(w.len(), 1);
        assert!((w[0].missing_fraction - 0.8).abs() < 1e-12);
    }

    #[test]
    fn absent_rows_count_as_missing_and_short_gaps_are_filled() {
        let mut r = complete(60, 0, &[]);
        r.samples.remove(30);
        let w = windows(&r);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].missing_fraction, 0.0);
        assert_eq!(w[0].samples[30].timestamp, 30);
        assert!(w[0].samples[30].hr.is_some());
    }

    proptest! {
        #[test]
        fn window_count_formula(span in 1i64..700) {
            let n = windows(&complete(span, 17, &[])).len() as i64;
            let expected = if span < 60 { 0 } else { (span - 60) / 30 + 1 };
            prop_assert_eq!(n, expected);
        }

        #[test]
        fn labels_match_brute_force_scan(
            span in 60i64..400,
            events in proptest::collection::vec(0i64..400, 0..6),
        ) {
            let mut events: Vec<i64> = events.into_iter().filter(|&e| e < span).collect();
            events.sort();
            let r = complete(span, 0, &events);
            for w in windows(&r) {
                let mut positive = false;
                for t in w.start..w.start + 60 {
                    positive |= events.contains(&t);
                }
                prop_assert_eq!(w.label.is_positive(), positive);
            }
        }
    }
}
