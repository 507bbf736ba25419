//! Bias disparity in recommender systems.
//!
//! Measures how a user group's preference for an item category changes
//! between the input data and a recommender's output, runs a user-based
//! KNN recommender, simulates recommendation feedback loops, and corrects
//! output bias with the GULM re-ranker.

pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod gulm;
pub mod ingest;
pub mod metrics;
pub mod recommender;
pub mod rng;
pub mod synthgen;
pub mod table;

pub use error::{Error, Result};
pub use metrics::{InteractionMatrix, Labeling};
