//! Participant-level train/test split and minority-class upsampling.

use std::collections::BTreeSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::preprocess::Label;
use crate::util::{read_to_string, write_atomic};

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: Vec<FeatureVector>,
    pub test: Vec<FeatureVector>,
    pub train_participants: BTreeSet<String>,
    pub test_participants: BTreeSet<String>,
    pub seed: u64,
}

/// Sorted distinct participant ids.
pub fn participants(data: &[FeatureVector]) -> Vec<String> {
    data.iter().map(|v| v.participant_id.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Shuffle participants with `seed` and send the first
/// round-half-up(`train_fraction` · P) to the training side.
pub fn split_by_participant(data: &[FeatureVector], train_fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train_fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut ids = participants(data);
    if ids.len() < 2 {
        return Err(Error::Invalid(format!("cannot split {} participant(s) into train and test", ids.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let p = ids.len();
    let n_train = ((train_fraction * p as f64 + 0.5).floor() as usize).clamp(1, p - 1);
    let train_participants: BTreeSet<String> = ids[..n_train].iter().cloned().collect();
    let test_participants: BTreeSet<String> = ids[n_train..].iter().cloned().collect();
    Ok(apply_assignment(data, train_participants, test_participants, seed))
}

fn apply_assignment(
    data: &[FeatureVector],
    train_participants: BTreeSet<String>,
    test_participants: BTreeSet<String>,
    seed: u64,
) -> SplitResult {
    let (train, test) = data.iter().cloned().partition(|v| train_participants.contains(&v.participant_id));
    SplitResult { train, test, train_participants, test_participants, seed }
}

/// `participant_id,role` manifest with role `train` or `test`.
pub fn split_manifest_csv(split: &SplitResult) -> String {
    let mut rows: Vec<(&String, &str)> = split
        .train_participants
        .iter()
        .map(|p| (p, "train"))
        .chain(split.test_participants.iter().map(|p| (p, "test")))
        .collect();
    rows.sort();
    let mut out = String::from("participant_id,role\n");
    for (p, role) in rows {
        out.push_str(&format!("{p},{role}\n"));
    }
    out
}

pub fn write_split_manifest(path: &Path, split: &SplitResult) -> Result<()> {
    write_atomic(path, split_manifest_csv(split).as_bytes())
}

/// Re-apply a manifest to feature vectors. Every participant must be listed.
pub fn read_split_manifest(path: &Path, data: &[FeatureVector], seed: u64) -> Result<SplitResult> {
    let text = read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, h)| h.trim_end()) != Some("participant_id,role") {
        return Err(Error::parse(path, 1, "header must be exactly `participant_id,role`"));
    }
    let (mut train, mut test) = (BTreeSet::new(), BTreeSet::new());
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i as u64 + 1;
        let (p, role) =
            line.split_once(',').ok_or_else(|| Error::parse(path, line_no, "expected `participant_id,role`"))?;
        let inserted = match role.trim() {
            "train" => !test.contains(p) && train.insert(p.to_string()),
            "test" => !train.contains(p) && test.insert(p.to_string()),
            other => return Err(Error::parse(path, line_no, format!("role must be train or test, found {other:?}"))),
        };
        if !inserted {
            return Err(Error::parse(path, line_no, format!("participant {p} listed more than once")));
        }
    }
    if let Some(v) = data.iter().find(|v| !train.contains(&v.participant_id) && !test.contains(&v.participant_id)) {
        return Err(Error::Invalid(format!(
            "{}: participant {} is not assigned to train or test",
            path.display(),
            v.participant_id
        )));
    }
    Ok(apply_assignment(data, train, test, seed))
}

/// Target class ratio `majority_units : minority_units`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResampleSpec {
    pub majority_units: u32,
    pub minority_units: u32,
    #[serde(default)]
    pub seed: u64,
}

impl ResampleSpec {
    pub fn new(majority_units: u32, minority_units: u32, seed: u64) -> Self {
        ResampleSpec { majority_units, minority_units, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.majority_units == 0 || self.minority_units == 0 {
            return Err(Error::Config(format!(
                "resample ratio {}:{} violates the ResampleSpec invariant (both units must be positive)",
                self.majority_units, self.minority_units
            )));
        }
        Ok(())
    }

    /// ⌊majority · minority_units / majority_units⌋.
    pub fn target(&self, majority: usize) -> usize {
        (majority as u128 * self.minority_units as u128 / self.majority_units as u128) as usize
    }
}

/// Append minority rows drawn with replacement until the minority count
/// reaches [`ResampleSpec::target`]. The originals are kept in place; a
/// minority already at or above target is left unchanged.
pub fn upsample_minority(train: &[FeatureVector], spec: &ResampleSpec) -> Result<Vec<FeatureVector>> {
    spec.validate()?;
    let pos: Vec<usize> = (0..train.len()).filter(|&i| train[i].label.is_positive()).collect();
    let n_pos = pos.len();
    let n_neg = train.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Invalid("upsampling needs both classes in the training data".into()));
    }
    let minority_label = if n_pos <= n_neg { Label::Hyperarousal } else { Label::NonHyperarousal };
    let minority: Vec<usize> = (0..train.len()).filter(|&i| train[i].label == minority_label).collect();
    let majority = train.len() - minority.len();
    let target = spec.target(majority);
    let mut out = train.to_vec();
    if minority.len() >= target {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    out.reserve(target - minority.len());
    for _ in minority.len()..target {
        out.push(train[minority[rng.random_range(0..minority.len())]].clone());
    }
    Ok(out)
}

/// One metric per ratio, each measured on the same untouched validation
/// participants held out of `train`.
pub fn ratio_sweep<F>(
    train: &[FeatureVector],
    ratios: &[ResampleSpec],
    validation_fraction: f64,
    seed: u64,
    mut evaluator: F,
) -> Result<Vec<(ResampleSpec, f64)>>
where
    F: FnMut(&[FeatureVector], &[FeatureVector]) -> Result<f64>,
{
    if ratios.is_empty() {
        return Err(Error::Config("ratio sweep needs at least one ratio".into()));
    }
    let inner = split_by_participant(train, 1.0 - validation_fraction, seed)?;
    ratios
        .iter()
        .map(|r| {
            let resampled = upsample_minority(&inner.train, r)?;
            Ok((*r, evaluator(&resampled, &inner.test)?))
        })
        .collect()
}

/// The ratios compared in the resampling sensitivity analysis.
pub fn standard_ratios(seed: u64) -> Vec<ResampleSpec> {
    [(1, 1), (2, 1), (3, 1), (3, 2), (4, 3)].into_iter().map(|(a, b)| ResampleSpec::new(a, b, seed)).collect()
}
