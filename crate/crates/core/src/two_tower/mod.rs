//! Type-agnostic two-tower retrieval model adapting the foundation
//! embeddings to user-level recommendation.

mod checkpoint;
mod features;
mod model;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use features::{build_user_profile, resolve_item_embedding, FeatureContext, ItemFeatureBundle, UserProfile};
pub use model::{item_tower_batch, item_tower_forward, user_tower_batch, user_tower_forward, TowerDims, TwoTowerParams};
pub use train::{in_batch_softmax_loss, train_two_tower, two_tower_loss, TwoTowerConfig, TwoTowerMetrics, TwoTowerTraining};
