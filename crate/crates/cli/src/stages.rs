//! The subcommands as library functions; each reads its declared inputs
//! from the run configuration and writes its outputs atomically.

use std::fmt;
use std::path::Path;

use arousal_core::data::{events_csv, parse_recordings, samples_csv};
use arousal_core::eval::{
    self, accuracy, difference_table, evaluate_scores, matrix_at_threshold, render_comparisons, render_evaluation,
    CvComparison, ModelEvaluation,
};
use arousal_core::explain::{self, dependence_svg, summary_svg};
use arousal_core::features::{read_features, write_features};
use arousal_core::preprocess::{impute_recording, windows_csv, windows_from_grid};
use arousal_core::sampling::{ratio_sweep, read_split_manifest, standard_ratios, write_split_manifest};
use arousal_core::synth::{generate, write_truth};
use arousal_core::util::{read_to_string, write_atomic};
use arousal_core::{
    extract_features, load_model, load_recordings, save_model, split_by_participant, train_features, upsample_minority,
    validate_recording, Error, FeatureVector, ModelSpec, Recording, SplitResult, TrainedModel,
};
use rayon::prelude::*;

use crate::config::{self, RunConfig};

/// A failure tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}`: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

impl StageError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.source.is_config() {
            2
        } else {
            1
        }
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait InStage<T> {
    fn stage(self, stage: &'static str) -> StageResult<T>;
}

impl<T> InStage<T> for arousal_core::Result<T> {
    fn stage(self, stage: &'static str) -> StageResult<T> {
        self.map_err(|source| StageError { stage, source })
    }
}

fn ensure_dir(path: &Path) -> arousal_core::Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> arousal_core::Result<()> {
    write_atomic(path, text.as_bytes())
}

/// Generate synthetic recordings with `synth.*` and a derived seed.
pub fn synth(cfg: &RunConfig) -> StageResult<Vec<Recording>> {
    const STAGE: &str = "synth";
    let mut sc = cfg.synth.clone();
    sc.seed = cfg.stage_seed("synth");
    let (recordings, truth) = generate(&sc).stage(STAGE)?;
    ensure_dir(&cfg.out).stage(STAGE)?;
    write_text(&cfg.samples_path(), &samples_csv(&recordings)).stage(STAGE)?;
    write_text(&cfg.events_path(), &events_csv(&recordings)).stage(STAGE)?;
    write_truth(&cfg.artifact(config::TRUTH), &truth).stage(STAGE)?;
    log::info!("synth: {} participants, {} events", recordings.len(), truth.len());
    Ok(recordings)
}

fn check_valid(recordings: &[Recording], samples: &Path) -> arousal_core::Result<()> {
    for r in recordings {
        if let Some(v) = validate_recording(r).first() {
            return Err(Error::Invalid(format!(
                "{}: participant {} field {} at t={} violates rule `{}`",
                samples.display(),
                r.participant_id,
                v.field,
                v.timestamp,
                v.rule
            )));
        }
    }
    Ok(())
}

/// Impute every recording onto its dense grid; write the imputed samples
/// and the window dump.
pub fn preprocess(cfg: &RunConfig) -> StageResult<Vec<Recording>> {
    const STAGE: &str = "preprocess";
    let samples = cfg.samples_path();
    let recordings = load_recordings(&samples, &cfg.events_path()).stage(STAGE)?;
    check_valid(&recordings, &samples).stage(STAGE)?;
    let imputed: Vec<Recording> = recordings
        .par_iter()
        .map(|r| Recording {
            participant_id: r.participant_id.clone(),
            samples: impute_recording(r, &cfg.imputation),
            events: r.events.clone(),
        })
        .collect();
    let windows: Vec<_> = imputed.par_iter().flat_map_iter(|r| window_recording(r, cfg)).collect();
    ensure_dir(&cfg.out).stage(STAGE)?;
    write_text(&cfg.artifact(config::IMPUTED), &samples_csv(&imputed)).stage(STAGE)?;
    write_text(&cfg.artifact(config::WINDOWS), &windows_csv(&windows)).stage(STAGE)?;
    log::info!("preprocess: {} windows kept", windows.len());
    Ok(imputed)
}

fn window_recording(r: &Recording, cfg: &RunConfig) -> Vec<arousal_core::Window> {
    let events: Vec<i64> = r.events.iter().map(|e| e.timestamp).collect();
    windows_from_grid(&r.participant_id, &r.samples, &events, &cfg.windows)
}

/// Window the imputed grids and extract one feature vector per window.
pub fn features(cfg: &RunConfig) -> StageResult<Vec<FeatureVector>> {
    const STAGE: &str = "features";
    let imputed = cfg.artifact(config::IMPUTED);
    let events = cfg.events_path();
    let recordings = parse_recordings(
        &read_to_string(&imputed).stage(STAGE)?,
        &imputed,
        &read_to_string(&events).stage(STAGE)?,
        &events,
    )
    .stage(STAGE)?;
    let per_recording: Vec<(Vec<FeatureVector>, usize)> = recordings
        .par_iter()
        .map(|r| {
            let mut rejected = 0;
            let vectors = window_recording(r, cfg)
                .iter()
                .filter_map(|w| match extract_features(w) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        log::debug!("{e}");
                        rejected += 1;
                        None
                    }
                })
                .collect();
            (vectors, rejected)
        })
        .collect();
    let rejected: usize = per_recording.iter().map(|p| p.1).sum();
    let vectors: Vec<FeatureVector> = per_recording.into_iter().flat_map(|p| p.0).collect();
    if rejected > 0 {
        log::warn!("features: {rejected} windows lacked enough observed data and were skipped");
    }
    if vectors.is_empty() {
        return Err(Error::Invalid(format!("{}: no windows produced any features", imputed.display()))).stage(STAGE);
    }
    write_features(&cfg.artifact(config::FEATURES), &vectors).stage(STAGE)?;
    Ok(vectors)
}

fn load_features(cfg: &RunConfig, stage: &'static str) -> StageResult<Vec<FeatureVector>> {
    read_features(&cfg.artifact(config::FEATURES)).stage(stage)
}

/// Assign participants to train and test.
pub fn split(cfg: &RunConfig) -> StageResult<SplitResult> {
    const STAGE: &str = "split";
    let data = load_features(cfg, STAGE)?;
    let s = split_by_participant(&data, cfg.split.train_fraction, cfg.stage_seed("split")).stage(STAGE)?;
    write_split_manifest(&cfg.artifact(config::SPLIT), &s).stage(STAGE)?;
    Ok(s)
}

fn load_split(cfg: &RunConfig, stage: &'static str) -> StageResult<SplitResult> {
    let data = load_features(cfg, stage)?;
    read_split_manifest(&cfg.artifact(config::SPLIT), &data, cfg.stage_seed("split")).stage(stage)
}

/// Upsample the training side and fit every configured model.
pub fn train(cfg: &RunConfig) -> StageResult<Vec<TrainedModel>> {
    const STAGE: &str = "train";
    let s = load_split(cfg, STAGE)?;
    let resampled = upsample_minority(&s.train, &cfg.resample_spec(cfg.stage_seed("resample"))).stage(STAGE)?;
    let models: Vec<TrainedModel> = cfg
        .models
        .par_iter()
        .map(|spec| train_features(spec, &resampled, cfg.stage_seed(&format!("train-{}", spec.name()))))
        .collect::<arousal_core::Result<_>>()
        .stage(STAGE)?;
    ensure_dir(&cfg.out.join("models")).stage(STAGE)?;
    for m in &models {
        save_model(m, &cfg.model_path(m.name())).stage(STAGE)?;
    }
    Ok(models)
}

fn load_models(cfg: &RunConfig, stage: &'static str) -> StageResult<Vec<TrainedModel>> {
    cfg.models.iter().map(|spec| load_model(&cfg.model_path(spec.name())).stage(stage)).collect()
}

fn roc_csv(e: &ModelEvaluation) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &e.roc.points {
        out.push_str(&format!(
            "{},{},{}\n",
            arousal_core::util::fmt_real(p.threshold),
            arousal_core::util::fmt_real(p.fpr),
            arousal_core::util::fmt_real(p.tpr)
        ));
    }
    out
}

/// Score the untouched test participants with every model.
pub fn evaluate(cfg: &RunConfig) -> StageResult<Vec<ModelEvaluation>> {
    const STAGE: &str = "evaluate";
    let s = load_split(cfg, STAGE)?;
    let models = load_models(cfg, STAGE)?;
    let labels: Vec<bool> = s.test.iter().map(|v| v.label.is_positive()).collect();
    let evals = models
        .iter()
        .map(|m| {
            let scores = m.predict_proba_all(&s.test)?;
            evaluate_scores(m.name(), &scores, &labels, &cfg.evaluation.regimes)
        })
        .collect::<arousal_core::Result<Vec<_>>>()
        .stage(STAGE)?;
    write_text(&cfg.artifact(config::EVALUATION), &render_evaluation(&evals)).stage(STAGE)?;
    for e in &evals {
        write_text(&cfg.artifact(&format!("roc_{}.csv", e.model)), &roc_csv(e)).stage(STAGE)?;
    }
    Ok(evals)
}

/// Accuracy at 0.5 of `spec` trained on an upsampled fold.
fn fold_accuracy(
    cfg: &RunConfig,
    spec: &ModelSpec,
    train: &[FeatureVector],
    test: &[FeatureVector],
    seed: u64,
) -> arousal_core::Result<f64> {
    let resampled = upsample_minority(train, &cfg.resample_spec(arousal_core::util::derive_seed(seed, "resample")))?;
    let model = train_features(spec, &resampled, arousal_core::util::derive_seed(seed, spec.name()))?;
    let scores = model.predict_proba_all(test)?;
    let labels: Vec<bool> = test.iter().map(|v| v.label.is_positive()).collect();
    Ok(accuracy(&matrix_at_threshold(&scores, &labels, 0.5)))
}

/// Pairwise 5×2cv paired t-tests over all participants.
pub fn compare(cfg: &RunConfig) -> StageResult<Vec<(String, String, CvComparison)>> {
    const STAGE: &str = "compare";
    let data = load_features(cfg, STAGE)?;
    let seed = cfg.stage_seed("cv5x2");
    let tables = cfg
        .models
        .iter()
        .map(|spec| eval::cv5x2_scores(|tr, te, s| fold_accuracy(cfg, spec, tr, te, s), &data, seed))
        .collect::<arousal_core::Result<Vec<_>>>()
        .stage(STAGE)?;
    let mut rows = Vec::new();
    for i in 0..cfg.models.len() {
        for j in i + 1..cfg.models.len() {
            let c = CvComparison::from_differences(difference_table(&tables[i], &tables[j]));
            rows.push((cfg.models[i].name().to_string(), cfg.models[j].name().to_string(), c));
        }
    }
    write_text(&cfg.artifact(config::COMPARISON), &render_comparisons(&rows)).stage(STAGE)?;
    Ok(rows)
}

/// Validation AUC of the sweep model for each standard resampling ratio.
pub fn sweep(cfg: &RunConfig) -> StageResult<Vec<(arousal_core::ResampleSpec, f64)>> {
    const STAGE: &str = "ratio_sweep";
    let s = load_split(cfg, STAGE)?;
    let spec = *cfg
        .models
        .iter()
        .find(|m| m.name() == cfg.evaluation.sweep_model)
        .ok_or_else(|| Error::Config(format!("sweep model {:?} is not configured", cfg.evaluation.sweep_model)))
        .stage(STAGE)?;
    let seed = cfg.stage_seed("ratio-sweep");
    let table =
        ratio_sweep(&s.train, &standard_ratios(seed), cfg.evaluation.sweep_validation_fraction, seed, |tr, va| {
            let m = train_features(&spec, tr, seed)?;
            let labels: Vec<bool> = va.iter().map(|v| v.label.is_positive()).collect();
            Ok(eval::roc_auc(&m.predict_proba_all(va)?, &labels)?.auc)
        })
        .stage(STAGE)?;
    let mut out = String::from("majority_units,minority_units,auc\n");
    for (r, auc) in &table {
        out.push_str(&format!("{},{},{}\n", r.majority_units, r.minority_units, arousal_core::util::fmt_real(*auc)));
    }
    write_text(&cfg.artifact(config::RATIO_SWEEP), &out).stage(STAGE)?;
    Ok(table)
}

/// TreeSHAP on the test set for the configured tree-ensemble model.
pub fn explain(cfg: &RunConfig) -> StageResult<explain::SummaryData> {
    const STAGE: &str = "explain";
    let s = load_split(cfg, STAGE)?;
    let model = load_model(&cfg.model_path(&cfg.explain.model)).stage(STAGE)?;
    let explanations = explain::explain_all(&model, &s.test).stage(STAGE)?;
    let summary = explain::write_exports(&cfg.out, &explanations, &s.test).stage(STAGE)?;
    if cfg.explain.plots {
        write_text(&cfg.artifact("shap_summary.svg"), &summary_svg(&summary)).stage(STAGE)?;
        for name in &cfg.explain.dependence {
            let d = explain::dependence(&explanations, &s.test, name).stage(STAGE)?;
            write_text(&cfg.artifact(&format!("shap_dependence_{name}.svg")), &dependence_svg(&d)).stage(STAGE)?;
        }
    }
    Ok(summary)
}

/// Everything `pipeline` produced, for callers that want the numbers.
#[derive(Debug, Clone)]
pub struct PipelineSummary {
    pub evaluations: Vec<ModelEvaluation>,
    pub comparisons: Vec<(String, String, CvComparison)>,
}

/// Run every stage in order. `synth` supplies the recordings unless
/// `inputs` names existing files.
pub fn pipeline(cfg: &RunConfig) -> StageResult<PipelineSummary> {
    if cfg.inputs.samples.is_none() && cfg.inputs.events.is_none() {
        synth(cfg)?;
    }
    preprocess(cfg)?;
    features(cfg)?;
    split(cfg)?;
    train(cfg)?;
    let evaluations = evaluate(cfg)?;
    let comparisons = if cfg.evaluation.compare { compare(cfg)? } else { Vec::new() };
    if cfg.evaluation.ratio_sweep {
        sweep(cfg)?;
    }
    if cfg.explain.enabled {
        explain(cfg)?;
    }
    let mut report = render_evaluation(&evaluations);
    if !comparisons.is_empty() {
        report.push_str(&render_comparisons(&comparisons));
    }
    write_text(&cfg.artifact(config::REPORT), &report).stage("pipeline")?;
    Ok(PipelineSummary { evaluations, comparisons })
}
