//! Run configuration, read from one TOML file.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use arousal_core::eval::Regime;
use arousal_core::synth::SynthConfig;
use arousal_core::util::{derive_seed, read_to_string};
use arousal_core::{Error, ImputationConfig, ModelSpec, ResampleSpec, Result, WindowConfig, FEATURE_NAMES};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream; `--seed` overrides it.
    pub seed: Option<u64>,
    /// Directory for all artifacts; `--out` overrides it.
    pub out: PathBuf,
    pub inputs: Inputs,
    pub synth: SynthConfig,
    pub imputation: ImputationConfig,
    pub windows: WindowConfig,
    pub split: SplitConfig,
    pub resample: RatioConfig,
    pub models: Vec<ModelSpec>,
    pub evaluation: EvaluationConfig,
    pub explain: ExplainConfig,
}

/// Sample and event files; default to `samples.csv` and `events.csv`
/// inside the output directory (where `synth` writes them).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub samples: Option<PathBuf>,
    pub events: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train_fraction: 0.70 }
    }
}

/// Majority:minority ratio targeted by training-set upsampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioConfig {
    pub majority_units: u32,
    pub minority_units: u32,
}

impl Default for RatioConfig {
    fn default() -> Self {
        RatioConfig { majority_units: 4, minority_units: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub regimes: Vec<Regime>,
    /// Run the pairwise 5×2cv comparison as part of `pipeline`.
    pub compare: bool,
    /// Run the resampling-ratio sensitivity sweep as part of `pipeline`.
    pub ratio_sweep: bool,
    pub sweep_model: String,
    pub sweep_validation_fraction: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            regimes: Regime::standard_set(),
            compare: true,
            ratio_sweep: false,
            sweep_model: "gradient_boost".into(),
            sweep_validation_fraction: 0.30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Run the explain stage as part of `pipeline`.
    pub enabled: bool,
    /// Name of the tree-ensemble model to explain.
    pub model: String,
    pub plots: bool,
    /// Features that get a dependence plot.
    pub dependence: Vec<String>,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            enabled: true,
            model: "gradient_boost".into(),
            plots: true,
            dependence: ["hrmean", "hrsd", "hrmin", "linaccmean"].map(String::from).to_vec(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: Some(0),
            out: PathBuf::from("out"),
            inputs: Inputs::default(),
            synth: SynthConfig::default(),
            imputation: ImputationConfig::default(),
            windows: WindowConfig::default(),
            split: SplitConfig::default(),
            resample: RatioConfig::default(),
            models: ModelSpec::standard_set(),
            evaluation: EvaluationConfig::default(),
            explain: ExplainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let bad = |e: toml::de::Error| Error::Config(format!("{}: {}", path.display(), e.message()));
        let table: toml::Table = toml::from_str(text).map_err(bad)?;
        let stated_seed = table.contains_key("seed");
        let mut cfg: RunConfig = table.try_into().map_err(bad)?;
        // an explicit config must state its seed
        if !stated_seed {
            cfg.seed = None;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?, path)
    }

    pub fn root_seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    /// Seed of one named stage, derived from the root seed.
    pub fn stage_seed(&self, name: &str) -> u64 {
        derive_seed(self.root_seed(), name)
    }

    pub fn resample_spec(&self, seed: u64) -> ResampleSpec {
        ResampleSpec::new(self.resample.majority_units, self.resample.minority_units, seed)
    }

    pub fn samples_path(&self) -> PathBuf {
        self.inputs.samples.clone().unwrap_or_else(|| self.out.join(SAMPLES))
    }

    pub fn events_path(&self) -> PathBuf {
        self.inputs.events.clone().unwrap_or_else(|| self.out.join(EVENTS))
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn model_path(&self, name: &str) -> PathBuf {
        self.out.join("models").join(format!("{name}.json"))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed.is_none() {
            return Err(Error::Config("seed is missing: set `seed` in the config or pass --seed".into()));
        }
        self.synth.validate()?;
        self.imputation.validate()?;
        self.windows.validate()?;
        self.resample_spec(0).validate()?;
        let f = self.split.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("split.train_fraction {f} must lie strictly between 0 and 1")));
        }
        let v = self.evaluation.sweep_validation_fraction;
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::Config(format!(
                "evaluation.sweep_validation_fraction {v} must lie strictly between 0 and 1"
            )));
        }
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        let mut names = BTreeSet::new();
        for m in &self.models {
            m.validate()?;
            if !names.insert(m.name()) {
                return Err(Error::Config(format!("model {} is listed twice", m.name())));
            }
        }
        if self.evaluation.regimes.is_empty() {
            return Err(Error::Config("evaluation.regimes must not be empty".into()));
        }
        for r in &self.evaluation.regimes {
            let ok = match *r {
                Regime::TprFloor(v) | Regime::FprCap(v) => (0.0..=1.0).contains(&v),
            };
            if !ok {
                return Err(Error::Config(format!("regime {r} must use a rate in [0, 1]")));
            }
        }
        if self.explain.enabled && !self.models.iter().any(|m| m.name() == self.explain.model && m.is_tree_ensemble()) {
            return Err(Error::Config(format!(
                "explain.model {:?} must name a configured tree-ensemble model",
                self.explain.model
            )));
        }
        if let Some(unknown) = self.explain.dependence.iter().find(|n| !FEATURE_NAMES.contains(&n.as_str())) {
            return Err(Error::Config(format!("explain.dependence names unknown feature {unknown:?}")));
        }
        let (samples, events) = (self.samples_path(), self.events_path());
        if samples == events {
            return Err(Error::Config(format!("samples and events both point at {}", samples.display())));
        }
        for input in [&samples, &events] {
            if OUTPUTS.iter().any(|o| &self.artifact(o) == input) {
                return Err(Error::Config(format!("input {} collides with an output artifact", input.display())));
            }
        }
        Ok(())
    }
}

pub const SAMPLES: &str = "samples.csv";
pub const EVENTS: &str = "events.csv";
pub const TRUTH: &str = "truth.csv";
pub const IMPUTED: &str = "imputed_samples.csv";
pub const WINDOWS: &str = "windows.csv";
pub const FEATURES: &str = "features.csv";
pub const SPLIT: &str = "split.csv";
pub const EVALUATION: &str = "evaluation.txt";
pub const COMPARISON: &str = "comparison.txt";
pub const RATIO_SWEEP: &str = "ratio_sweep.csv";
pub const REPORT: &str = "report.txt";

/// Outputs of stages after `synth`; inputs must not alias them.
const OUTPUTS: [&str; 9] = [IMPUTED, WINDOWS, FEATURES, SPLIT, EVALUATION, COMPARISON, RATIO_SWEEP, REPORT, TRUTH];
