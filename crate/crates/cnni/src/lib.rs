//! Clustering with a feed-forward network trained against an internal
//! clustering validity index.
//!
//! Instead of back-propagating a supervised error, the network's flat
//! parameter vector is searched derivative-free: perturb one coordinate,
//! re-label the data with the network, re-score an index (silhouette,
//! its minimax-distance variant, or a K-means-style loss), and keep the
//! move iff the score improves. The crate bundles the network, the
//! distance and index machinery, three search algorithms, synthetic
//! datasets, and the evaluation layer (decision boundaries, adjusted
//! Rand index, Lloyd's baseline, model selection).

pub mod data;
pub mod distance;
pub mod error;
pub mod evaluation;
pub mod network;
pub mod objectives;
pub mod optimizers;

pub use error::{Error, Result};
