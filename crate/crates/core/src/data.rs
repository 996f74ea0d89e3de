//! Domain types for raw wearable recordings and the sample/event file formats.
//!
//! Samples file header: `participant_id,timestamp,hr,acc_x,acc_y,acc_z`.
//! Events file header: `participant_id,timestamp`. An empty field is a
//! missing value. Timestamps are integer epoch seconds.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::{read_to_string, write_atomic};

pub const SAMPLES_HEADER: [&str; 6] = ["participant_id", "timestamp", "hr", "acc_x", "acc_y", "acc_z"];
pub const EVENTS_HEADER: [&str; 2] = ["participant_id", "timestamp"];

/// One 1 Hz reading. Heart rate in bpm, acceleration in m/s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp: i64,
    pub hr: Option<f64>,
    pub acc_x: Option<f64>,
    pub acc_y: Option<f64>,
    pub acc_z: Option<f64>,
}

impl Sample {
    pub fn missing(timestamp: i64) -> Self {
        Sample { timestamp, hr: None, acc_x: None, acc_y: None, acc_z: None }
    }

    /// The acceleration triple, if all three components are present.
    pub fn acc(&self) -> Option<[f64; 3]> {
        match (self.acc_x, self.acc_y, self.acc_z) {
            (Some(x), Some(y), Some(z)) => Some([x, y, z]),
            _ => None,
        }
    }

    fn acc_present_count(&self) -> usize {
        [self.acc_x, self.acc_y, self.acc_z].iter().filter(|v| v.is_some()).count()
    }
}

/// A self-reported event at a point in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EventMark {
    pub timestamp: i64,
}

/// All samples and event marks of one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub participant_id: String,
    pub samples: Vec<Sample>,
    pub events: Vec<EventMark>,
}

impl Recording {
    /// First and last sample timestamps.
    pub fn span(&self) -> Option<(i64, i64)> {
        Some((self.samples.first()?.timestamp, self.samples.last()?.timestamp))
    }
}

/// A broken invariant found by [`validate_recording`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: &'static str,
    pub timestamp: i64,
    pub rule: &'static str,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at t={}: {}", self.field, self.timestamp, self.rule)
    }
}

pub const RULE_HR_POSITIVE: &str = "heart rate must be finite and positive";
pub const RULE_ACC_ALL_OR_NONE: &str = "acceleration components must be all present or all absent";
pub const RULE_ACC_FINITE: &str = "acceleration components must be finite";
pub const RULE_TIMESTAMPS_INCREASING: &str = "sample timestamps must be strictly increasing";
pub const RULE_EVENTS_ORDERED: &str = "event timestamps must be non-decreasing";
pub const RULE_EVENT_IN_SPAN: &str = "event must lie within the recording's sample span";

/// Check every sample and recording invariant; an empty list means valid.
pub fn validate_recording(r: &Recording) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut prev: Option<i64> = None;
    for s in &r.samples {
        if let Some(hr) = s.hr {
            if !(hr.is_finite() && hr > 0.0) {
                out.push(Violation { field: "hr", timestamp: s.timestamp, rule: RULE_HR_POSITIVE });
            }
        }
        match s.acc_present_count() {
            0 => {}
            3 => {
                if s.acc().unwrap().iter().any(|v| !v.is_finite()) {
                    out.push(Violation { field: "acc", timestamp: s.timestamp, rule: RULE_ACC_FINITE });
                }
            }
            _ => out.push(Violation { field: "acc", timestamp: s.timestamp, rule: RULE_ACC_ALL_OR_NONE }),
        }
        if let Some(p) = prev {
            if s.timestamp <= p {
                out.push(Violation { field: "timestamp", timestamp: s.timestamp, rule: RULE_TIMESTAMPS_INCREASING });
            }
        }
        prev = Some(s.timestamp);
    }
    let span = r.span();
    let mut prev_event: Option<i64> = None;
    for e in &r.events {
        if let Some(p) = prev_event {
            if e.timestamp < p {
                out.push(Violation { field: "event", timestamp: e.timestamp, rule: RULE_EVENTS_ORDERED });
            }
        }
        prev_event = Some(e.timestamp);
        let inside = matches!(span, Some((lo, hi)) if e.timestamp >= lo && e.timestamp <= hi);
        if !inside {
            out.push(Violation { field: "event", timestamp: e.timestamp, rule: RULE_EVENT_IN_SPAN });
        }
    }
    out
}

fn parse_timestamp(raw: &str, path: &Path, line: u64) -> Result<i64> {
    raw.trim()
        .parse::<i64>()
        .map_err(|_| Error::parse(path, line, format!("timestamp {raw:?} is not an integer number of seconds")))
}

fn parse_optional(raw: &str, column: &str, path: &Path, line: u64) -> Result<Option<f64>> {
    let raw = raw.trim();
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::parse(path, line, format!("{column} value {raw:?} is not a number")))
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes())
}

fn check_header(record: Option<csv::StringRecord>, expected: &[&str], path: &Path) -> Result<()> {
    let header = record.ok_or_else(|| Error::parse(path, 1, "missing header row"))?;
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(Error::parse(
            path,
            1,
            format!("header must be exactly `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

/// Load the samples and events files and group them into one recording per
/// participant, ordered by participant id with samples sorted by time.
pub fn load_recordings(samples_path: &Path, events_path: &Path) -> Result<Vec<Recording>> {
    let samples_text = read_to_string(samples_path)?;
    let events_text = read_to_string(events_path)?;
    parse_recordings(&samples_text, samples_path, &events_text, events_path)
}

/// Parse file contents already in memory; `*_path` is used for messages only.
pub fn parse_recordings(
    samples_text: &str,
    samples_path: &Path,
    events_text: &str,
    events_path: &Path,
) -> Result<Vec<Recording>> {
    let mut by_participant: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    let mut seen: HashSet<(String, i64)> = HashSet::new();

    let mut rdr = reader(samples_text);
    let mut records = rdr.records();
    check_header(records.next().transpose().map_err(|e| csv_err(e, samples_path))?, &SAMPLES_HEADER, samples_path)?;
    for rec in records {
        let rec = rec.map_err(|e| csv_err(e, samples_path))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != SAMPLES_HEADER.len() {
            return Err(Error::parse(
                samples_path,
                line,
                format!("expected {} fields, found {}", SAMPLES_HEADER.len(), rec.len()),
            ));
        }
        let pid = rec[0].trim().to_string();
        if pid.is_empty() {
            return Err(Error::parse(samples_path, line, "participant_id is empty"));
        }
        let timestamp = parse_timestamp(&rec[1], samples_path, line)?;
        let sample = Sample {
            timestamp,
            hr: parse_optional(&rec[2], "hr", samples_path, line)?,
            acc_x: parse_optional(&rec[3], "acc_x", samples_path, line)?,
            acc_y: parse_optional(&rec[4], "acc_y", samples_path, line)?,
            acc_z: parse_optional(&rec[5], "acc_z", samples_path, line)?,
        };
        if let Some(hr) = sample.hr {
            if !(hr.is_finite() && hr > 0.0) {
                return Err(Error::parse(samples_path, line, RULE_HR_POSITIVE));
            }
        }
        match sample.acc_present_count() {
            0 => {}
            3 => {
                if sample.acc().unwrap().iter().any(|v| !v.is_finite()) {
                    return Err(Error::parse(samples_path, line, RULE_ACC_FINITE));
                }
            }
            _ => return Err(Error::parse(samples_path, line, RULE_ACC_ALL_OR_NONE)),
        }
        if !seen.insert((pid.clone(), timestamp)) {
            return Err(Error::parse(
                samples_path,
                line,
                format!("duplicate sample for participant {pid} at timestamp {timestamp}"),
            ));
        }
        by_participant.entry(pid).or_default().push(sample);
    }

    let mut events: BTreeMap<String, Vec<EventMark>> = BTreeMap::new();
    let mut rdr = reader(events_text);
    let mut records = rdr.records();
    check_header(records.next().transpose().map_err(|e| csv_err(e, events_path))?, &EVENTS_HEADER, events_path)?;
    for rec in records {
        let rec = rec.map_err(|e| csv_err(e, events_path))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != EVENTS_HEADER.len() {
            return Err(Error::parse(
                events_path,
                line,
                format!("expected {} fields, found {}", EVENTS_HEADER.len(), rec.len()),
            ));
        }
        let pid = rec[0].trim().to_string();
        if !by_participant.contains_key(&pid) {
            return Err(Error::parse(events_path, line, format!("event for unknown participant {pid:?}")));
        }
        let timestamp = parse_timestamp(&rec[1], events_path, line)?;
        events.entry(pid).or_default().push(EventMark { timestamp });
    }

    Ok(by_participant
        .into_iter()
        .map(|(participant_id, mut samples)| {
            samples.sort_by_key(|s| s.timestamp);
            let mut ev = events.remove(&participant_id).unwrap_or_default();
            ev.sort();
            Recording { participant_id, samples, events: ev }
        })
        .collect())
}

fn csv_err(e: csv::Error, path: &Path) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::parse(path, line, e.to_string())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Render recordings in the samples file format (shortest round-trip reals).
pub fn samples_csv(recordings: &[Recording]) -> String {
    let mut out = SAMPLES_HEADER.join(",");
    out.push('\n');
    for r in recordings {
        for s in &r.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.participant_id,
                s.timestamp,
                fmt_opt(s.hr),
                fmt_opt(s.acc_x),
                fmt_opt(s.acc_y),
                fmt_opt(s.acc_z)
            ));
        }
    }
    out
}

pub fn events_csv(recordings: &[Recording]) -> String {
    let mut out = EVENTS_HEADER.join(",");
    out.push('\n');
    for r in recordings {
        for e in &r.events {
            out.push_str(&format!("{},{}\n", r.participant_id, e.timestamp));
        }
    }
    out
}

/// Write both files atomically.
pub fn write_recordings(recordings: &[Recording], samples_path: &Path, events_path: &Path) -> Result<()> {
    write_atomic(samples_path, samples_csv(recordings).as_bytes())?;
    write_atomic(events_path, events_csv(recordings).as_bytes())
}
