//! Temporal-split evaluation: top-K retrieval, Hit-Rate@K per item type
//! and the ablation runner.

mod ablation;
mod retrieval;
mod split;

pub use ablation::{
    evaluate_rows, export_foundation, run_ablations, train_foundation, AblationReport, AblationRow, Dataset, ExperimentConfig, Foundation, Variant,
};
pub use retrieval::{hit_rate_at_k, recommend_top_k, HitRate, ItemIndex};
pub use split::{temporal_split, temporal_split_at, EvalSplit};
