//! Pipeline orchestration behind the `arousal` command.

pub mod config;
pub mod stages;

pub use config::RunConfig;
pub use stages::{PipelineSummary, StageError, StageResult};
