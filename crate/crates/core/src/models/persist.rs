//! Model files: a JSON document `{schema_version, spec, standardizer,
//! parameters, feature_names, training_seed}`. Reals use the shortest
//! representation that round-trips, so reloaded models score bit-identically.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelParams, ModelSpec, Standardizer, TrainedModel};
use crate::error::{Error, Result};
use crate::util::{read_to_string, write_atomic};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    schema_version: u32,
    spec: ModelSpec,
    standardizer: Option<Standardizer>,
    parameters: ModelParams,
    feature_names: Vec<String>,
    training_seed: u64,
}

pub fn model_to_json(m: &TrainedModel) -> String {
    let doc = ModelFile {
        schema_version: SCHEMA_VERSION,
        spec: m.spec,
        standardizer: m.standardizer.clone(),
        parameters: m.params.clone(),
        feature_names: m.feature_names.clone(),
        training_seed: m.training_seed,
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("model parameters are finite");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str, path: &Path) -> Result<TrainedModel> {
    let value: serde_json::Value = serde_json::from_str(text)
        .map_err(|e| Error::parse(path, e.line() as u64, format!("corrupted model file: {e}")))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::parse(path, 1, "model file has no schema_version"))?;
    if found != SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion { found: found as u32, expected: SCHEMA_VERSION });
    }
    let doc: ModelFile =
        serde_json::from_value(value).map_err(|e| Error::parse(path, 0, format!("invalid model file: {e}")))?;
    Ok(TrainedModel {
        spec: doc.spec,
        feature_names: doc.feature_names,
        training_seed: doc.training_seed,
        standardizer: doc.standardizer,
        params: doc.parameters,
    })
}

pub fn save_model(m: &TrainedModel, path: &Path) -> Result<()> {
    write_atomic(path, model_to_json(m).as_bytes())
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    model_from_json(&read_to_string(path)?, path)
}
