//! One-shot recall@k, seen/unseen split construction and result tables.

mod recall;
mod report;
mod splits;

pub use recall::one_shot_recall;
pub use report::{evaluate_checkpoint, evaluate_embeddings, render_table, EvalCell, EvalReport, ALL_LANGUAGES};
pub use splits::{check_splits, make_splits, DatasetSplit, SplitName, SplitRecord};
