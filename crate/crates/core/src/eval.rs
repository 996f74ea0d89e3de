//! ROC analysis, operating-point confusion matrices and the 5×2
//! cross-validated paired t-test.

use std::fmt::{self, Write as _};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::sampling::participants;
use crate::util::derive_indexed;

/// Counts at one threshold; a score at or above the threshold is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fn_: usize,
    pub fp: usize,
    pub tn: usize,
    pub tpr: f64,
    pub fpr: f64,
    pub threshold: f64,
}

impl ConfusionMatrix {
    fn from_counts(tp: usize, fn_: usize, fp: usize, tn: usize, threshold: f64) -> Self {
        let ratio = |a: usize, b: usize| if a + b == 0 { 0.0 } else { a as f64 / (a + b) as f64 };
        ConfusionMatrix { tp, fn_, fp, tn, tpr: ratio(tp, fn_), fpr: ratio(fp, tn), threshold }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.fp + self.tn
    }
}

/// (tp + tn) / total.
pub fn accuracy(m: &ConfusionMatrix) -> f64 {
    (m.tp + m.tn) as f64 / m.total() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// From (0, 0) at threshold +∞ to (1, 1), one point per distinct score.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Invalid("ROC analysis needs both classes".into()));
    }
    Ok((pos, neg))
}

fn check_inputs(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Invalid(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Invalid("scores contain NaN".into()));
    }
    class_counts(labels)
}

/// Cumulative (threshold, tp, fp) after admitting every score ≥ threshold,
/// descending, starting with (+∞, 0, 0).
fn sweep(scores: &[f64], labels: &[bool]) -> Vec<(f64, usize, usize)> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut out = vec![(f64::INFINITY, 0, 0)];
    let (mut tp, mut fp) = (0, 0);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            if labels[order[k]] {
                tp += 1;
            } else {
                fp += 1;
            }
            k += 1;
        }
        out.push((s, tp, fp));
    }
    out
}

/// Empirical ROC with tied scores grouped into one step; AUC by trapezoids,
/// which equals P(s⁺ > s⁻) + ½P(s⁺ = s⁻).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let steps = sweep(scores, labels);
    let points: Vec<RocPoint> = steps
        .iter()
        .map(|&(threshold, tp, fp)| RocPoint { fpr: fp as f64 / neg as f64, tpr: tp as f64 / pos as f64, threshold })
        .collect();
    // integrate in counts for exactness, normalize once
    let mut area2 = 0u128;
    for w in steps.windows(2) {
        let (_, tp0, fp0) = w[0];
        let (_, tp1, fp1) = w[1];
        area2 += ((fp1 - fp0) * (tp0 + tp1)) as u128;
    }
    let auc = area2 as f64 / (2.0 * pos as f64 * neg as f64);
    Ok(RocCurve { points, auc })
}

/// Confusion matrix for `score >= threshold`.
pub fn matrix_at_threshold(scores: &[f64], labels: &[bool], threshold: f64) -> ConfusionMatrix {
    let (mut tp, mut fn_, mut fp, mut tn) = (0, 0, 0, 0);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (false, true) => fn_ += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
        }
    }
    ConfusionMatrix::from_counts(tp, fn_, fp, tn, threshold)
}

/// Threshold-selection rule for one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Regime {
    /// Largest threshold with TPR ≥ floor (least FPR under the floor).
    TprFloor(f64),
    /// Smallest threshold with FPR ≤ cap (most TPR under the cap).
    FprCap(f64),
}

impl Regime {
    /// Detect every event, balanced, and few false positives.
    pub fn standard_set() -> Vec<Regime> {
        vec![Regime::TprFloor(1.0), Regime::TprFloor(0.5), Regime::FprCap(0.1)]
    }

    pub fn is_satisfied_by(&self, m: &ConfusionMatrix) -> bool {
        match *self {
            Regime::TprFloor(f) => m.tpr >= f,
            Regime::FprCap(c) => m.fpr <= c,
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::TprFloor(v) => write!(f, "tpr_floor={v}"),
            Regime::FprCap(v) => write!(f, "fpr_cap={v}"),
        }
    }
}

pub fn matrix_at_operating_point(scores: &[f64], labels: &[bool], regime: Regime) -> Result<ConfusionMatrix> {
    let (pos, neg) = check_inputs(scores, labels)?;
    let steps = sweep(scores, labels);
    let matrix = |&(threshold, tp, fp): &(f64, usize, usize)| {
        ConfusionMatrix::from_counts(tp, pos - tp, fp, neg - fp, threshold)
    };
    let chosen = match regime {
        Regime::TprFloor(_) => steps.iter().map(matrix).find(|m| regime.is_satisfied_by(m)),
        Regime::FprCap(_) => steps.iter().rev().map(matrix).find(|m| regime.is_satisfied_by(m)),
    };
    chosen.ok_or_else(|| Error::Invalid(format!("no threshold satisfies {regime}")))
}

/// Result of the 5×2cv paired t-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvComparison {
    pub t_statistic: f64,
    pub p_value: f64,
    pub degrees_of_freedom: u32,
    /// Accuracy differences A − B, `[replication][fold]`.
    pub differences: [[f64; 2]; 5],
    /// Zero variance with a nonzero numerator; t is ±∞.
    pub degenerate: bool,
}

impl CvComparison {
    /// t = p₁⁽¹⁾ / √(⅕ Σ sᵢ²) with sᵢ² = Σⱼ (pᵢ⁽ʲ⁾ − p̄ᵢ)², two-sided p from t(5).
    pub fn from_differences(differences: [[f64; 2]; 5]) -> Self {
        let var_sum: f64 = differences
            .iter()
            .map(|[a, b]| {
                let mean = 0.5 * (a + b);
                (a - mean).powi(2) + (b - mean).powi(2)
            })
            .sum();
        let numerator = differences[0][0];
        let denom = (var_sum / 5.0).sqrt();
        let (t, degenerate) = if denom > 0.0 {
            (numerator / denom, false)
        } else if numerator == 0.0 {
            (0.0, false)
        } else {
            (numerator.signum() * f64::INFINITY, true)
        };
        let p_value = if t.is_infinite() {
            0.0
        } else {
            let dist = StudentsT::new(0.0, 1.0, 5.0).expect("valid t distribution");
            (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0)
        };
        CvComparison { t_statistic: t, p_value, degrees_of_freedom: 5, differences, degenerate }
    }
}

/// Participant-disjoint halves for each of five replications, as indices
/// into `data`: `[replication] = (half_a, half_b)`.
pub fn cv5x2_folds(data: &[FeatureVector], seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let ids = participants(data);
    if ids.len() < 2 {
        return Err(Error::Invalid("5x2 cross-validation needs at least two participants".into()));
    }
    Ok((0..5)
        .map(|rep| {
            let mut shuffled = ids.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_indexed(seed, "cv5x2-replication", rep));
            shuffled.shuffle(&mut rng);
            let half: std::collections::BTreeSet<&String> = shuffled[..ids.len() / 2].iter().collect();
            (0..data.len()).partition(|&i| half.contains(&data[i].participant_id))
        })
        .collect())
}

fn select(data: &[FeatureVector], idx: &[usize]) -> Vec<FeatureVector> {
    idx.iter().map(|&i| data[i].clone()).collect()
}

/// Run `score(train, test, seed)` on each of the ten 5×2 folds; fold 1 of a
/// replication trains on its first half, fold 2 on the second.
pub fn cv5x2_scores<F>(score: F, data: &[FeatureVector], seed: u64) -> Result<[[f64; 2]; 5]>
where
    F: Fn(&[FeatureVector], &[FeatureVector], u64) -> Result<f64> + Sync,
{
    let folds = cv5x2_folds(data, seed)?;
    let results: Vec<Result<f64>> = (0..10)
        .into_par_iter()
        .map(|k| {
            let (rep, fold) = (k / 2, k % 2);
            let (a, b) = &folds[rep];
            let (train, test) = if fold == 0 { (a, b) } else { (b, a) };
            score(&select(data, train), &select(data, test), derive_indexed(seed, "cv5x2-fold", k as u64))
        })
        .collect();
    let mut out = [[0.0; 2]; 5];
    for (k, r) in results.into_iter().enumerate() {
        out[k / 2][k % 2] = r?;
    }
    Ok(out)
}

/// Compare two learners by accuracy on identical folds.
pub fn cv5x2_ttest<A, B>(a: A, b: B, data: &[FeatureVector], seed: u64) -> Result<CvComparison>
where
    A: Fn(&[FeatureVector], &[FeatureVector], u64) -> Result<f64> + Sync,
    B: Fn(&[FeatureVector], &[FeatureVector], u64) -> Result<f64> + Sync,
{
    let sa = cv5x2_scores(a, data, seed)?;
    let sb = cv5x2_scores(b, data, seed)?;
    Ok(CvComparison::from_differences(difference_table(&sa, &sb)))
}

pub fn difference_table(a: &[[f64; 2]; 5], b: &[[f64; 2]; 5]) -> [[f64; 2]; 5] {
    let mut d = [[0.0; 2]; 5];
    for i in 0..5 {
        for j in 0..2 {
            d[i][j] = a[i][j] - b[i][j];
        }
    }
    d
}

/// Everything reported for one model on the test set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelEvaluation {
    pub model: String,
    pub n_positive: usize,
    pub n_negative: usize,
    pub roc: RocCurve,
    pub accuracy_at_half: f64,
    pub accuracy_balanced: f64,
    pub matrices: Vec<(Regime, ConfusionMatrix)>,
}

pub fn evaluate_scores(model: &str, scores: &[f64], labels: &[bool], regimes: &[Regime]) -> Result<ModelEvaluation> {
    let roc = roc_auc(scores, labels)?;
    let (pos, neg) = class_counts(labels)?;
    let matrices =
        regimes.iter().map(|&r| Ok((r, matrix_at_operating_point(scores, labels, r)?))).collect::<Result<Vec<_>>>()?;
    let balanced = matrix_at_operating_point(scores, labels, Regime::TprFloor(0.5))?;
    Ok(ModelEvaluation {
        model: model.to_string(),
        n_positive: pos,
        n_negative: neg,
        roc,
        accuracy_at_half: accuracy(&matrix_at_threshold(scores, labels, 0.5)),
        accuracy_balanced: accuracy(&balanced),
        matrices,
    })
}

fn fmt_threshold(t: f64) -> String {
    if t.is_infinite() {
        "inf".into()
    } else {
        format!("{t:.6}")
    }
}

/// Plain-text report: one section per model.
pub fn render_evaluation(evals: &[ModelEvaluation]) -> String {
    let mut out = String::new();
    for e in evals {
        let _ = writeln!(out, "[model {}]", e.model);
        let _ = writeln!(
            out,
            "test_windows = {} (positive {}, negative {})",
            e.n_positive + e.n_negative,
            e.n_positive,
            e.n_negative
        );
        let _ = writeln!(out, "auc = {:.6}", e.roc.auc);
        let _ = writeln!(out, "accuracy_at_0.5 = {:.6}", e.accuracy_at_half);
        let _ = writeln!(out, "accuracy_at_balanced = {:.6}", e.accuracy_balanced);
        let _ = writeln!(
            out,
            "{:<14} {:>10} {:>7} {:>7} {:>7} {:>7} {:>6} {:>6}",
            "regime", "threshold", "TP", "FN", "FP", "TN", "TPR", "FPR"
        );
        for (r, m) in &e.matrices {
            let _ = writeln!(
                out,
                "{:<14} {:>10} {:>7} {:>7} {:>7} {:>7} {:>6.3} {:>6.3}",
                r.to_string(),
                fmt_threshold(m.threshold),
                m.tp,
                m.fn_,
                m.fp,
                m.tn,
                m.tpr,
                m.fpr
            );
        }
        out.push('\n');
    }
    out
}

/// Pairwise 5×2cv table.
pub fn render_comparisons(rows: &[(String, String, CvComparison)]) -> String {
    let mut out = String::from("[pairwise 5x2cv paired t-test, accuracy at 0.5]\n");
    let _ = writeln!(out, "{:<22} {:<22} {:>10} {:>10} {:>4}", "model_a", "model_b", "t", "p", "df");
    for (a, b, c) in rows {
        let t = if c.degenerate {
            format!("{}inf*", if c.t_statistic < 0.0 { "-" } else { "" })
        } else {
            format!("{:.4}", c.t_statistic)
        };
        let _ = writeln!(out, "{a:<22} {b:<22} {t:>10} {:>10.6} {:>4}", c.p_value, c.degrees_of_freedom);
    }
    out
}
