//! Pairwise neural ranking of community-QA comments using machine
//! translation evaluation features.

pub mod corpus;
pub mod evaluator;
pub mod embeddings;
pub mod error;
pub mod features;
pub mod mte;
pub mod network;
pub mod pipeline;
pub mod ranker;
pub mod synthetic;
pub mod textproc;
pub mod trainer;

pub use error::{Error, Result};
