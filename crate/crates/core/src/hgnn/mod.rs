//! Heterogeneous GraphSAGE encoder over the co-interaction graph.

mod model;
mod store;
mod train;

pub use model::{hgnn_forward, infer_new_item, HgnnParams, NewItem};
pub use store::{export_embeddings, ItemEmbeddingStore};
pub use train::{
    batch_loss, edge_auc, margin_loss, rank_auc, sample_non_edges, train_hgnn, EpochMetrics, HgnnConfig,
    HgnnTraining, TrainingTuple,
};

#[cfg(test)]
mod tests;
