//! Topic-conditioned tweet sentiment analysis.
//!
//! The pipeline has two trained stages. [`word2topic`] learns, for every
//! vocabulary word, a 100-wide embedding and a per-topic sentiment score from
//! the label matrix built in [`vocab`]. [`classifier`] then reads tweets as
//! sequences of those embeddings and predicts sentiment toward a topic with a
//! stack of bidirectional LSTMs. [`insight`] exposes the per-topic word
//! scores directly, [`baseline`] compares embeddings under a linear model and
//! [`evalkit`] scores predictions.

pub mod autograd;
pub mod baseline;
pub mod checkpoint;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod evalkit;
pub mod exec;
pub mod files;
pub mod gradsuite;
pub mod insight;
pub mod synthetic;
pub mod vocab;
pub mod word2topic;

pub use error::{Error, Result};
pub use exec::Execution;
