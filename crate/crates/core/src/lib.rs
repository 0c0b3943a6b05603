//! Weighted least-squares branch lengths on phylogenetic trees.
//!
//! Given a tree topology, a dissimilarity map over its leaves, and a
//! variance model for the pairwise measurements, this crate estimates edge
//! lengths by weighted least squares. A dense Gauss–Markov reference
//! implementation lives in [`oracle`]; [`fastwls`] provides `O(n^2)`
//! combinatorial estimators for multiplicative variance models and collapsed
//! small-system solves for semi-multiplicative ones, falling back to the
//! dense path otherwise.
//!
//! Everything numeric is generic over [`Scalar`] (implemented for `f32` and
//! `f64`); the crate root exports `f64` aliases for the common types.

pub mod dissim;
pub mod error;
pub mod fastwls;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod scalar;
pub mod sim;
pub mod tree;

pub use error::{TreeError, WlsError};
pub use fastwls::{all_edge_lengths, EstimationMethod, FastSolution};
pub use scalar::Scalar;
pub use tree::{PhyloTree, TreeBuilder};

/// Pairwise map over leaves with `f64` entries.
pub type Dissimilarity = dissim::DissimilarityMap<f64>;
/// Per-edge values (lengths, weights) with `f64` entries.
pub type EdgeValues = tree::TreeAdditiveMap<f64>;
/// Variance model over `f64`.
pub type Variance = dissim::VarianceModel<f64>;
