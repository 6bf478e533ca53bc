//! Zero-shot text matching between financial-report paragraphs and
//! regulatory checklist requirements.
//!
//! Paragraphs and requirement descriptions are embedded by one
//! shared-weight transformer encoder (mean-pooled token states) and ranked
//! by cosine similarity. The encoder is trained in stages: masked-token
//! pretraining, an unsupervised sentence-embedding stage (SimCSE or TSDAE),
//! and supervised paragraph/requirement contrastive matching.
//!
//! Module map:
//!
//! - [`numcore`]: dense tensors, reverse-mode autodiff, Adam.
//! - [`textprep`]: subword vocabulary, encoding, corruption operators.
//! - [`encoder`]: transformer encoder, pooling, cosine head, checkpoints.
//! - [`training`]: the four training stages and the pipeline runner.
//! - [`matcher`]: embedding indices and exact top-k recommendation.
//! - [`evalkit`]: one-shot recall@k, seen/unseen splits, reports.
//! - [`corpus`]: records, line-delimited I/O, statistics, synthetic data.

pub mod corpus;
pub mod encoder;
pub mod error;
pub mod evalkit;
pub mod matcher;
pub mod numcore;
pub mod textprep;
pub mod training;
pub(crate) mod util;

pub use error::{Error, Result};
