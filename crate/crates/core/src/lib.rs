//! Graph foundation embeddings for personalization.
//!
//! A heterogeneous GraphSAGE model is pretrained with a link-prediction
//! objective on an item-item co-interaction graph ([`hgnn`], [`cograph`]).
//! Its embeddings feed a type-agnostic two-tower retrieval model
//! ([`two_tower`]) evaluated with temporal-split Hit-Rate@K ([`eval`]).

pub mod cograph;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod hgnn;
pub mod kv;
pub mod numerics;
pub mod rng;
pub mod two_tower;

pub use error::{Error, Result};
pub use numerics::Matrix;
