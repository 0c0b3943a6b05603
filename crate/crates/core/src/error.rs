//! Error types shared across the library.

use thiserror::Error;

/// Errors raised by tree construction and combinatorial queries.
#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum TreeError {
    /// Two leaves carry the same label.
    #[error("duplicate leaf label '{0}'")]
    DuplicateLeafLabel(String),
    /// A leaf label was looked up but does not exist in the tree.
    #[error("unknown leaf label '{0}'")]
    UnknownLeaf(String),
    /// The node/edge set does not describe a single connected acyclic graph.
    #[error("invalid tree structure: {0}")]
    InvalidStructure(String),
    /// An operation that requires a fully resolved (binary) tree met a
    /// higher-degree vertex.
    #[error("tree is not binary: node {node} has degree {degree}")]
    NotBinary { node: usize, degree: usize },
    /// The tree has fewer leaves than the operation supports.
    #[error("operation requires at least {need} leaves, tree has {got}")]
    TooFewLeaves { need: usize, got: usize },
    /// An edge or leaf index was out of range.
    #[error("{kind} index {index} out of range (count {count})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        count: usize,
    },
}

/// Errors raised by the estimators and variance model construction.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum WlsError {
    /// A dissimilarity or variance map does not match the tree's leaf count.
    #[error("map over {got} leaves does not match tree with {expected} leaves")]
    SizeMismatch { expected: usize, got: usize },
    /// Variances must be strictly positive off the diagonal.
    #[error("non-positive variance {value} for leaf pair ({i}, {j})")]
    NonPositiveVariance { i: usize, j: usize, value: f64 },
    /// A model parameter is outside its admissible range.
    #[error("invalid variance model: {0}")]
    InvalidModel(String),
    /// A value fed to the Jukes-Cantor transforms is outside the domain.
    #[error("value {value} outside domain of {what}")]
    OutOfDomain { what: &'static str, value: f64 },
    /// A linear system could not be factored (singular or indefinite).
    #[error("numerical failure: {context}")]
    NumericalFailure { context: String },
    /// The closed-form path was requested for a model it does not cover.
    #[error("closed-form estimator requires a path-multiplicative variance model, got {0}")]
    NotMultiplicative(String),
    /// Propagated tree error.
    #[error(transparent)]
    Tree(#[from] TreeError),
}
