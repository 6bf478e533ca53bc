//! The training stages: masked-token pretraining, SimCSE, TSDAE and
//! supervised paragraph/requirement matching, plus the pipeline runner.
//!
//! Each stage takes a checkpoint and returns a new one whose encoder
//! weights are those of the best validation step.

mod config;
mod data;
mod decoder;
pub mod losses;
mod stages;

pub use config::{StageConfig, StageKind};
pub use data::{prepare_mlm_batch, prepare_tsdae_batch, StageData};
pub use decoder::{decoder_layout, decoder_logits};
pub use stages::{mlm_stage, run_pipeline, run_stage, simcse_stage, supervised_stage, tsdae_stage, ReportLine, StageReport};
