//! Detection of self-reported hyperarousal events from 1 Hz wearable heart
//! rate and acceleration.
//!
//! The pipeline runs raw recordings through Kalman gap imputation, 60 s
//! sliding windows, nine time-domain features, participant-level splitting
//! with minority upsampling, four classifiers, ROC and operating-point
//! evaluation, the 5×2 cross-validated paired t-test, and TreeSHAP
//! explanations. [`synth`] generates recordings with known ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod features;
pub mod models;
pub mod preprocess;
pub mod sampling;
pub mod synth;
pub mod util;

pub use data::{load_recordings, validate_recording, EventMark, Recording, Sample, Violation};
pub use error::{Error, Result};
pub use features::{acc_magnitude, extract_features, Feature, FeatureVector, FEATURE_NAMES, N_FEATURES};
pub use models::{load_model, save_model, train, train_features, ModelSpec, TrainedModel};
pub use preprocess::{impute_series, make_windows, ImputationConfig, Label, Window, WindowConfig};
pub use sampling::{split_by_participant, upsample_minority, ResampleSpec, SplitResult};
