//! Reading and writing trees, dissimilarity matrices, and taxon weights.
//!
//! Trees travel as Newick strings, matrices in the square PHYLIP layout.
//! Parsers report positions (byte offset for Newick, line number for
//! matrices) so malformed files can be fixed instead of guessed at.

mod matrix;
mod newick;

pub use matrix::{read_phylip, read_taxon_weights, write_phylip, LabeledMatrix};
pub use newick::{parse_newick, write_newick, NewickDocument};

use std::path::Path;

use thiserror::Error;

use crate::error::TreeError;
use crate::tree::PhyloTree;

/// Errors from the text formats.
#[derive(Debug, Error)]
pub enum ParseError {
    /// Newick syntax problem, located by byte offset in the input.
    #[error("newick error at byte {offset}: {message}")]
    Newick { offset: usize, message: String },
    /// Matrix layout or number problem, located by input line (1-based).
    #[error("matrix error at line {line}: {message}")]
    Matrix { line: usize, message: String },
    /// The parsed pieces do not fit together (labels, sizes).
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    /// The parsed structure is not a valid unrooted tree.
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads and parses a Newick file.
pub fn read_newick_file(path: impl AsRef<Path>) -> Result<NewickDocument, ParseError> {
    parse_newick(&std::fs::read_to_string(path)?)
}

/// Reads and parses a square PHYLIP matrix file.
pub fn read_phylip_file(path: impl AsRef<Path>) -> Result<LabeledMatrix, ParseError> {
    read_phylip(&std::fs::read_to_string(path)?)
}

/// Reorders a labeled matrix to the leaf order of `tree`.
///
/// Every tree leaf must appear among the labels and vice versa.
pub fn align_to_tree(
    tree: &PhyloTree,
    labeled: &LabeledMatrix,
) -> Result<crate::dissim::DissimilarityMap<f64>, ParseError> {
    let n = tree.leaf_count();
    if labeled.labels.len() != n {
        return Err(ParseError::Inconsistent(format!(
            "tree has {} leaves but the matrix lists {} taxa",
            n,
            labeled.labels.len()
        )));
    }
    let mut to_leaf = vec![usize::MAX; n];
    for (row, label) in labeled.labels.iter().enumerate() {
        match tree.leaf_id(label) {
            Some(leaf) => to_leaf[row] = leaf,
            None => {
                return Err(ParseError::Inconsistent(format!(
                    "matrix taxon {label:?} is not a leaf of the tree"
                )))
            }
        }
    }
    // The map row -> leaf is injective into 0..n, hence a bijection.
    let mut out = crate::dissim::DissimilarityMap::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            out.set(to_leaf[i], to_leaf[j], labeled.matrix.get(i, j));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn align_reorders_by_label() {
        let doc = parse_newick("((a:1,b:1):1,c:1,d:1);").unwrap();
        let text = "4\nd 0 1 2 3\nc 1 0 4 5\nb 2 4 0 6\na 3 5 6 0\n";
        let labeled = read_phylip(text).unwrap();
        let d = align_to_tree(&doc.tree, &labeled).unwrap();
        let (a, b) = (doc.tree.leaf_id("a").unwrap(), doc.tree.leaf_id("b").unwrap());
        let (c, dd) = (doc.tree.leaf_id("c").unwrap(), doc.tree.leaf_id("d").unwrap());
        assert_eq!(d.get(dd, c), 1.0);
        assert_eq!(d.get(dd, b), 2.0);
        assert_eq!(d.get(c, a), 5.0);
        assert_eq!(d.get(b, a), 6.0);
    }

    #[test]
    fn align_rejects_label_mismatches() {
        let doc = parse_newick("((a:1,b:1):1,c:1,d:1);").unwrap();
        let labeled = read_phylip("4\nx 0 1 2 3\nc 1 0 4 5\nb 2 4 0 6\na 3 5 6 0\n").unwrap();
        assert!(matches!(
            align_to_tree(&doc.tree, &labeled),
            Err(ParseError::Inconsistent(_))
        ));
        let small = read_phylip("3\na 0 1 2\nb 1 0 3\nc 2 3 0\n").unwrap();
        assert!(align_to_tree(&doc.tree, &small).is_err());
    }
}
