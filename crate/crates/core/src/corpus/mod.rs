//! Interaction logs, the item catalog, text features and synthetic data.

mod catalog;
mod events;
mod features;
mod synthetic;

pub use catalog::{parse_catalog, write_catalog, Catalog, ItemRecord, ItemType, ItemTypes};
pub use events::{check_events, parse_interactions, write_interactions, InteractionEvent, SECONDS_PER_DAY};
pub use features::{dominant_mixture, text_features, FeatureProvider, TopicFeatureModel};
pub use synthetic::{generate_synthetic, LatentTruth, SyntheticConfig, SyntheticDataset};
