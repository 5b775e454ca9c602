//! Training and evaluation engine for a bilateral sliced graph contrastive
//! recommender.
//!
//! Three propagation branches run over the normalized user-item graph: a
//! plain residual GCN, a noise-perturbed GCN, and a low-rank hypergraph GCN.
//! The user side of the GCN view is contrasted against one auxiliary view and
//! the item side against another, a dispersing self-contrast spreads the
//! readouts apart, and BPR drives the ranking objective. Gradients are
//! derived by hand and checked against central finite differences.

pub mod augmentations;
pub mod evaluation;
pub mod dataset;
mod error;
pub mod losses;
pub mod propagation;
pub mod rng;
pub mod sparse;
pub mod training;

pub use error::{Error, Result};
