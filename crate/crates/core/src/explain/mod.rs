//! Path-dependent TreeSHAP attributions for tree ensembles, with summary
//! and dependence exports.

mod plot;
mod treeshap;

pub use plot::{dependence_svg, summary_svg};
pub use treeshap::tree_shap_values;

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Feature, FeatureVector, FEATURE_NAMES, N_FEATURES};
use crate::models::{ModelParams, TrainedModel, FOREST_MARGIN_CLAMP};
use crate::util::{fmt_real, write_atomic};

/// Attributions of one instance in margin (log-odds) units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub participant_id: String,
    pub window_start: i64,
    pub values: Vec<f64>,
    pub base_value: f64,
}

impl ShapExplanation {
    /// base + Σφ, which reproduces the model margin.
    pub fn output(&self) -> f64 {
        self.base_value + self.values.iter().sum::<f64>()
    }
}

fn logit(p: f64) -> f64 {
    (p.ln() - (1.0 - p).ln()).clamp(-FOREST_MARGIN_CLAMP, FOREST_MARGIN_CLAMP)
}

/// Attributions for a raw feature row, returned as `(values, base_value)`.
///
/// Boosting is explained directly in margin space. The forest is explained
/// in leaf-fraction space and the values are rescaled so that they sum to
/// logit(f(x)) − logit(E f).
pub fn explain_row(model: &TrainedModel, x: &[f64]) -> Result<(Vec<f64>, f64)> {
    if x.len() != model.feature_names.len() {
        return Err(Error::Invalid(format!(
            "instance has {} features, model expects {}",
            x.len(),
            model.feature_names.len()
        )));
    }
    match &model.params {
        ModelParams::Boost { base_margin, trees } => {
            let mut phi = vec![0.0; x.len()];
            let mut base = *base_margin;
            for t in trees {
                base += tree_shap_values(t, x, &mut phi);
            }
            Ok((phi, base))
        }
        ModelParams::Forest { trees } => {
            let mut phi = vec![0.0; x.len()];
            let mut base_fraction = 0.0;
            for t in trees {
                base_fraction += tree_shap_values(t, x, &mut phi);
            }
            let n = trees.len() as f64;
            base_fraction /= n;
            phi.iter_mut().for_each(|v| *v /= n);
            let fx = trees.iter().map(|t| t.predict(x)).sum::<f64>() / n;
            let (m_base, m_x) = (logit(base_fraction), logit(fx));
            let scale = if (fx - base_fraction).abs() > 1e-12 {
                (m_x - m_base) / (fx - base_fraction)
            } else if m_base.abs() < FOREST_MARGIN_CLAMP {
                1.0 / (base_fraction * (1.0 - base_fraction))
            } else {
                0.0
            };
            phi.iter_mut().for_each(|v| *v *= scale);
            Ok((phi, m_base))
        }
        _ => Err(Error::UnsupportedModel(format!("TreeSHAP needs a tree ensemble, got {}", model.name()))),
    }
}

pub fn tree_shap(model: &TrainedModel, x: &FeatureVector) -> Result<ShapExplanation> {
    let (values, base_value) = explain_row(model, &x.values)?;
    Ok(ShapExplanation { participant_id: x.participant_id.clone(), window_start: x.window_start, values, base_value })
}

/// Explain every instance, in input order.
pub fn explain_all(model: &TrainedModel, data: &[FeatureVector]) -> Result<Vec<ShapExplanation>> {
    if model.trees().is_none() {
        return Err(Error::UnsupportedModel(format!("TreeSHAP needs a tree ensemble, got {}", model.name())));
    }
    data.par_iter().map(|v| tree_shap(model, v)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSummary {
    pub feature: Feature,
    pub mean_abs_shap: f64,
    /// (feature value, shap value) per instance, in input order.
    pub points: Vec<(f64, f64)>,
}

/// Features by descending mean |shap|, ties by name.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryData {
    pub features: Vec<FeatureSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependenceData {
    pub feature: Feature,
    pub points: Vec<(f64, f64)>,
}

fn check_pairs(explanations: &[ShapExplanation], features: &[FeatureVector]) -> Result<()> {
    if explanations.is_empty() {
        return Err(Error::Invalid("no explanations to summarize".into()));
    }
    if explanations.len() != features.len() {
        return Err(Error::Invalid(format!(
            "{} explanations for {} feature vectors",
            explanations.len(),
            features.len()
        )));
    }
    if let Some(e) = explanations.iter().find(|e| e.values.len() != N_FEATURES) {
        return Err(Error::Invalid(format!("explanation has {} values, expected {N_FEATURES}", e.values.len())));
    }
    Ok(())
}

pub fn summarize(explanations: &[ShapExplanation], features: &[FeatureVector]) -> Result<SummaryData> {
    check_pairs(explanations, features)?;
    let n = explanations.len() as f64;
    let mut out: Vec<FeatureSummary> = Feature::ALL
        .iter()
        .map(|&f| {
            let j = f.index();
            FeatureSummary {
                feature: f,
                mean_abs_shap: explanations.iter().map(|e| e.values[j].abs()).sum::<f64>() / n,
                points: features.iter().zip(explanations).map(|(v, e)| (v.values[j], e.values[j])).collect(),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then_with(|| a.feature.name().cmp(b.feature.name()))
    });
    Ok(SummaryData { features: out })
}

pub fn dependence(
    explanations: &[ShapExplanation],
    features: &[FeatureVector],
    feature_name: &str,
) -> Result<DependenceData> {
    let feature = Feature::from_name(feature_name).ok_or_else(|| {
        Error::Invalid(format!("unknown feature {feature_name:?}; expected one of {FEATURE_NAMES:?}"))
    })?;
    check_pairs(explanations, features)?;
    let j = feature.index();
    Ok(DependenceData {
        feature,
        points: features.iter().zip(explanations).map(|(v, e)| (v.values[j], e.values[j])).collect(),
    })
}

/// `feature,mean_abs_shap,rank`, rank 1 first.
pub fn summary_csv(s: &SummaryData) -> String {
    let mut out = String::from("feature,mean_abs_shap,rank\n");
    for (rank, f) in s.features.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", f.feature.name(), fmt_real(f.mean_abs_shap), rank + 1);
    }
    out
}

/// `feature,instance,feature_value,shap_value`, grouped by feature in
/// canonical order.
pub fn values_csv(explanations: &[ShapExplanation], features: &[FeatureVector]) -> Result<String> {
    check_pairs(explanations, features)?;
    let mut out = String::from("feature,instance,feature_value,shap_value\n");
    for f in Feature::ALL {
        let j = f.index();
        for (i, (v, e)) in features.iter().zip(explanations).enumerate() {
            let _ = writeln!(out, "{},{},{},{}", f.name(), i, fmt_real(v.values[j]), fmt_real(e.values[j]));
        }
    }
    Ok(out)
}

/// Write `shap_summary.csv` and `shap_values.csv` into `dir`.
pub fn write_exports(dir: &Path, explanations: &[ShapExplanation], features: &[FeatureVector]) -> Result<SummaryData> {
    let summary = summarize(explanations, features)?;
    write_atomic(&dir.join("shap_summary.csv"), summary_csv(&summary).as_bytes())?;
    write_atomic(&dir.join("shap_values.csv"), values_csv(explanations, features)?.as_bytes())?;
    Ok(summary)
}

#[cfg(test)]
mod tests;
