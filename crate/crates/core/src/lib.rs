//! Geodesic distances between phylogenetic trees in BHV tree space, and
//! the exploratory tools built on them: δ-hyperbolicity, classical MDS,
//! distance-based tree estimation, sequence simulation, bootstrap
//! summaries and annealing toward orthant boundaries.
//!
//! Trees are rooted; an unrooted input is read as hanging from its
//! top-level node. All trees compared with each other must share one leaf
//! set.

pub mod alignment;
pub mod cli;
pub mod embedding;
pub mod error;
pub mod geodesic;
pub mod hyperbolicity;
pub mod inference;
pub mod matrix;
pub mod newick;
pub mod simulate;
pub mod splits;
pub mod tree;
pub mod treebuild;

pub use error::{Error, Result};
pub use tree::Tree;
