//! Variance models for weighted least-squares estimation.
//!
//! Every model produces a symmetric positive map over leaf pairs. Models
//! whose entries factor along tree paths (a product of per-edge weights) are
//! *multiplicative* and unlock closed-form estimators; [`VarianceModel`]
//! advertises this through [`VarianceModel::certified_multiplicative`].

use super::DissimilarityMap;
use crate::error::WlsError;
use crate::scalar::Scalar;
use crate::tree::{PhyloTree, TreeAdditiveMap};

/// How pairwise variances are assigned.
#[derive(Clone, Debug)]
pub enum VarianceModel<T> {
    /// Ordinary least squares: unit variance for every pair.
    Ols,
    /// Balanced minimum evolution: `V[i][j] = 2^(path edges between i and j)`.
    Bme,
    /// Reciprocal per-edge weights multiplied along the path:
    /// `V[i][j] = prod over path edges of 1/w_e`. The weights act as
    /// per-edge precisions, so heavier edges mean smaller variances.
    TreeMultiplicative { weights: TreeAdditiveMap<T> },
    /// `V[i][j] = t_i * t_j` for per-taxon weights `t`.
    TaxonWeighted { weights: Vec<T> },
    /// `V[i][j] = (c1 + c2 (k - 1)) * 2^k` with `k` the path edge count.
    PauplinFamily { c1: T, c2: T },
    /// Fitch–Margoliash: `V[i][j] = d[i][j]^2` from observed distances.
    FitchMargoliash { distances: DissimilarityMap<T> },
    /// Jukes–Cantor sampling variance from per-pair true distances and a
    /// common sequence length.
    JukesCantor {
        seq_len: usize,
        deltas: DissimilarityMap<T>,
    },
    /// Explicit per-pair variances.
    Raw { variances: DissimilarityMap<T> },
}

impl<T: Scalar> VarianceModel<T> {
    /// True when the model is multiplicative along tree paths by
    /// construction, so closed-form estimation applies without any runtime
    /// check. `PauplinFamily` is only multiplicative at `c2 = 0`; the other
    /// data-driven models make no structural promise.
    pub fn certified_multiplicative(&self) -> bool {
        match self {
            VarianceModel::Ols
            | VarianceModel::Bme
            | VarianceModel::TreeMultiplicative { .. }
            | VarianceModel::TaxonWeighted { .. } => true,
            VarianceModel::PauplinFamily { c2, .. } => c2.is_zero(),
            VarianceModel::FitchMargoliash { .. }
            | VarianceModel::JukesCantor { .. }
            | VarianceModel::Raw { .. } => false,
        }
    }
}

/// Materializes the variance map of `model` over the leaf pairs of `tree`.
///
/// Fails when the model's data does not match the tree (sizes, unknown
/// edges) or produces a non-positive variance.
pub fn build_variance<T: Scalar>(
    model: &VarianceModel<T>,
    tree: &PhyloTree,
) -> Result<DissimilarityMap<T>, WlsError> {
    let n = tree.leaf_count();
    let v = match model {
        VarianceModel::Ols => DissimilarityMap::from_fn(n, |_, _| T::one()),
        VarianceModel::Bme => {
            path_product(tree, |_| T::cast(2.0), |acc| acc)?
        }
        VarianceModel::TreeMultiplicative { weights } => {
            if weights.values().len() != tree.edge_count() {
                return Err(WlsError::SizeMismatch {
                    expected: tree.edge_count(),
                    got: weights.values().len(),
                });
            }
            if let Some(bad) = weights.values().iter().find(|&&w| w <= T::zero()) {
                return Err(WlsError::InvalidModel(format!(
                    "edge weight {} is not positive",
                    bad.to_f64().unwrap_or(f64::NAN)
                )));
            }
            path_product(tree, |e| T::one() / weights.get(e), |acc| acc)?
        }
        VarianceModel::TaxonWeighted { weights } => {
            if weights.len() != n {
                return Err(WlsError::SizeMismatch {
                    expected: n,
                    got: weights.len(),
                });
            }
            for (i, &w) in weights.iter().enumerate() {
                if w <= T::zero() {
                    return Err(WlsError::NonPositiveVariance {
                        i,
                        j: i,
                        value: w.to_f64().unwrap_or(f64::NAN),
                    });
                }
            }
            DissimilarityMap::from_fn(n, |i, j| weights[i] * weights[j])
        }
        VarianceModel::PauplinFamily { c1, c2 } => {
            let counts = tree.path_edge_counts();
            DissimilarityMap::from_fn(n, |i, j| {
                let k = T::cast(counts.get(i, j));
                let two = T::cast(2.0);
                (*c1 + *c2 * (k - T::one())) * two.powf(k)
            })
        }
        VarianceModel::FitchMargoliash { distances } => {
            if distances.n() != n {
                return Err(WlsError::SizeMismatch {
                    expected: n,
                    got: distances.n(),
                });
            }
            DissimilarityMap::from_fn(n, |i, j| {
                let d = distances.get(i, j);
                d * d
            })
        }
        VarianceModel::JukesCantor { seq_len, deltas } => {
            if deltas.n() != n {
                return Err(WlsError::SizeMismatch {
                    expected: n,
                    got: deltas.n(),
                });
            }
            let mut out = DissimilarityMap::zeros(n);
            for i in 0..n {
                for j in (i + 1)..n {
                    out.set(i, j, super::jc_variance(deltas.get(i, j), *seq_len)?);
                }
            }
            out
        }
        VarianceModel::Raw { variances } => {
            if variances.n() != n {
                return Err(WlsError::SizeMismatch {
                    expected: n,
                    got: variances.n(),
                });
            }
            variances.clone()
        }
    };
    v.validate_positive()?;
    Ok(v)
}

/// `V[i][j] = finish(prod over path edges of factor(e))`, computed with one
/// tree walk per source leaf.
fn path_product<T: Scalar>(
    tree: &PhyloTree,
    factor: impl Fn(crate::tree::EdgeId) -> T,
    finish: impl Fn(T) -> T,
) -> Result<DissimilarityMap<T>, WlsError> {
    let n = tree.leaf_count();
    let mut out = DissimilarityMap::zeros(n);
    for i in 0..n {
        let acc = tree.fold_paths_from(i, T::one(), |p, e| *p * factor(e));
        for j in (i + 1)..n {
            let value = acc[j].ok_or_else(|| WlsError::NumericalFailure {
                context: "path accumulation did not reach a leaf".into(),
            })?;
            out.set(i, j, finish(value));
        }
    }
    Ok(out)
}
