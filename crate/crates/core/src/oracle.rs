//! Dense Gauss–Markov reference estimators.
//!
//! With `S` the pair-edge incidence matrix, `D` the observed dissimilarity
//! map and `V` the (diagonal) pairwise variances, the weighted least-squares
//! edge lengths are `(S' V^-1 S)^-1 S' V^-1 D`. For a linear functional `f`
//! of the edge lengths, the best linear unbiased estimator is `p' D` where
//! `p = V^-1 S mu` and `mu` solves `(S' V^-1 S) mu = f`; its variance is
//! `mu' f` (up to the common scale of `V`). `Lambda = S mu` is itself a
//! tree-additive map, which is what the fast estimators exploit.
//!
//! Everything here is cubic in the edge count and quadratic in leaf pairs:
//! correct, simple, and the yardstick the `fastwls` module is tested against.

use crate::dissim::DissimilarityMap;
use crate::error::WlsError;
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;
use crate::tree::{EdgeId, PhyloTree, TreeAdditiveMap};

/// Output of [`wls_solve_dense`].
#[derive(Clone, Debug)]
pub struct DenseSolution<T> {
    /// Estimated edge lengths.
    pub lengths: TreeAdditiveMap<T>,
    /// Fitted dissimilarities `S l`.
    pub fitted: DissimilarityMap<T>,
    /// Weighted residual sum of squares `sum (D - fitted)^2 / V`.
    pub weighted_rss: T,
}

/// BLUE of a linear functional of the edge lengths.
#[derive(Clone, Debug)]
pub struct BlueCoefficients<T> {
    /// The functional `f`, one coefficient per edge.
    pub functional: Vec<T>,
    /// Solution of the normal equations `(S' V^-1 S) mu = f`.
    pub mu: Vec<T>,
    /// `Lambda = S mu`: the tree-additive map induced by `mu`.
    pub lagrange: DissimilarityMap<T>,
    /// Pair coefficients `p = V^-1 Lambda`; the estimate is `p' D`.
    pub p: DissimilarityMap<T>,
    /// Estimator variance `mu' f` (in units of the common variance scale).
    pub variance: T,
}

impl<T: Scalar> BlueCoefficients<T> {
    /// Applies the estimator to observed data: `p' D`.
    pub fn estimate(&self, d: &DissimilarityMap<T>) -> T {
        debug_assert_eq!(d.n(), self.p.n());
        self.p
            .values()
            .iter()
            .zip(d.values())
            .fold(T::zero(), |acc, (&p, &obs)| acc + p * obs)
    }
}

/// Builds the normal equations `(S' V^-1 S, S' V^-1 D)` by walking each
/// pair's path once.
fn normal_equations<T: Scalar>(
    tree: &PhyloTree,
    v: &DissimilarityMap<T>,
    d: Option<&DissimilarityMap<T>>,
) -> Result<(Matrix<T>, Vec<T>), WlsError> {
    let n = tree.leaf_count();
    if v.n() != n {
        return Err(WlsError::SizeMismatch { expected: n, got: v.n() });
    }
    if let Some(d) = d {
        if d.n() != n {
            return Err(WlsError::SizeMismatch { expected: n, got: d.n() });
        }
    }
    v.validate_positive()?;
    let m = tree.edge_count();
    let mut u = Matrix::zeros(m, m);
    let mut rhs = vec![T::zero(); m];
    for i in 0..n {
        for j in (i + 1)..n {
            let path = tree.path_edges(i, j)?;
            let w = v.get(i, j).recip();
            let wd = d.map(|d| w * d.get(i, j));
            for (k, &e) in path.iter().enumerate() {
                if let Some(wd) = wd {
                    rhs[e] += wd;
                }
                u.add_to(e, e, w);
                for &f in &path[k + 1..] {
                    u.add_to(e, f, w);
                    u.add_to(f, e, w);
                }
            }
        }
    }
    Ok((u, rhs))
}

/// Weighted least-squares edge lengths, the dense reference path.
pub fn wls_solve_dense<T: Scalar>(
    tree: &PhyloTree,
    d: &DissimilarityMap<T>,
    v: &DissimilarityMap<T>,
) -> Result<DenseSolution<T>, WlsError> {
    let (u, rhs) = normal_equations(tree, v, Some(d))?;
    let chol = Cholesky::factor(&u)?;
    let lengths = TreeAdditiveMap::new(tree, chol.solve_refined(&u, &rhs))
        .expect("solution length matches edge count");
    let fitted = tree.evaluate_additive(&lengths);
    let mut rss = T::zero();
    for (i, j, obs) in d.iter_pairs() {
        let r = obs - fitted.get(i, j);
        rss += r * r / v.get(i, j);
    }
    Ok(DenseSolution { lengths, fitted, weighted_rss: rss })
}

/// BLUE coefficients for the functional `f` over edge lengths.
pub fn blue_coefficients<T: Scalar>(
    tree: &PhyloTree,
    v: &DissimilarityMap<T>,
    f: &[T],
) -> Result<BlueCoefficients<T>, WlsError> {
    if f.len() != tree.edge_count() {
        return Err(WlsError::SizeMismatch {
            expected: tree.edge_count(),
            got: f.len(),
        });
    }
    let (u, _) = normal_equations(tree, v, None)?;
    let chol = Cholesky::factor(&u)?;
    blue_from_mu(tree, v, f.to_vec(), chol.solve_refined(&u, f))
}

fn blue_from_mu<T: Scalar>(
    tree: &PhyloTree,
    v: &DissimilarityMap<T>,
    functional: Vec<T>,
    mu: Vec<T>,
) -> Result<BlueCoefficients<T>, WlsError> {
    let map = TreeAdditiveMap::new(tree, mu)?;
    let lagrange = tree.evaluate_additive(&map);
    let p = DissimilarityMap::from_fn(tree.leaf_count(), |i, j| {
        lagrange.get(i, j) / v.get(i, j)
    });
    let mu = map.into_values();
    let variance = mu
        .iter()
        .zip(&functional)
        .fold(T::zero(), |acc, (&m, &f)| acc + m * f);
    Ok(BlueCoefficients { functional, mu, lagrange, p, variance })
}

/// BLUE of the total tree length (`f` all ones).
pub fn tree_length_blue<T: Scalar>(
    tree: &PhyloTree,
    v: &DissimilarityMap<T>,
) -> Result<BlueCoefficients<T>, WlsError> {
    blue_coefficients(tree, v, &vec![T::one(); tree.edge_count()])
}

/// A nonzero BLUE coefficient on a pair irrelevant to the edge.
#[derive(Clone, Debug)]
pub struct IipFinding<T> {
    pub edge: EdgeId,
    pub pair: (usize, usize),
    /// The offending coefficient `p[pair]`.
    pub coefficient: T,
    /// `|coefficient| / max(1, largest coefficient of the edge's estimator)`:
    /// the violation with the crate's usual absolute floor, since bumping the
    /// pair's dissimilarity by one changes the estimate by the coefficient.
    pub relative: T,
}

/// Outcome of [`check_iip`].
#[derive(Clone, Debug)]
pub struct IipReport<T> {
    pub pass: bool,
    pub tolerance: T,
    /// Irrelevant (edge, pair) combinations inspected.
    pub pairs_checked: usize,
    pub worst: Option<IipFinding<T>>,
    /// Findings above tolerance, worst first (capped at 16).
    pub offenders: Vec<IipFinding<T>>,
}

const MAX_IIP_OFFENDERS: usize = 16;

/// Checks the irrelevant-pairs property.
///
/// A pair is *relevant* to an edge when its two leaves lie in different
/// clades among those adjacent to the edge (the four hanging off an internal
/// edge's endpoints, or the leaf plus the two behind the attachment vertex
/// of a leaf edge). The property holds when every edge-length BLUE puts
/// (relatively) zero weight on all of its irrelevant pairs — exactly the
/// case when `V` is semi-multiplicative on the tree. Requires a binary tree.
pub fn check_iip<T: Scalar>(
    tree: &PhyloTree,
    v: &DissimilarityMap<T>,
    tolerance: T,
) -> Result<IipReport<T>, WlsError> {
    use crate::tree::EdgeContext;

    let n = tree.leaf_count();
    let m = tree.edge_count();
    let (u, _) = normal_equations(tree, v, None)?;
    let chol = Cholesky::factor(&u)?;

    let mut worst: Option<IipFinding<T>> = None;
    let mut offenders: Vec<IipFinding<T>> = Vec::new();
    let mut pairs_checked = 0usize;
    for edge in 0..m {
        let mut f = vec![T::zero(); m];
        f[edge] = T::one();
        let blue = blue_from_mu(tree, v, f.clone(), chol.solve_refined(&u, &f))?;
        // Coefficients are dimensionless with a pinned scale (those on pairs
        // through the edge sum to exactly 1), so compare with the crate's
        // usual relative-with-absolute-floor rule: divide by the largest
        // coefficient magnitude or 1, whichever is bigger. A bare relative
        // scale would inflate harmless roundoff on deep trees where every
        // coefficient is small.
        let scale = blue
            .p
            .values()
            .iter()
            .fold(T::one(), |acc, &p| acc.max(p.abs()));
        // Tag each leaf with its adjacent clade; a pair is irrelevant iff
        // both leaves carry the same tag.
        let mut clade_of = vec![0usize; n];
        match tree.clades_around_edge(edge)? {
            EdgeContext::Internal { a, b, c, d } => {
                for (tag, clade) in [a, b, c, d].iter().enumerate() {
                    for &l in &clade.leaves {
                        clade_of[l] = tag;
                    }
                }
            }
            EdgeContext::Leaf { leaf, a, b } => {
                for (tag, clade) in [a, b].iter().enumerate() {
                    for &l in &clade.leaves {
                        clade_of[l] = tag;
                    }
                }
                clade_of[leaf] = 2;
            }
        }
        for (i, j, p) in blue.p.iter_pairs() {
            if clade_of[i] != clade_of[j] {
                continue; // spans two clades: relevant pair
            }
            pairs_checked += 1;
            let relative = p.abs() / scale;
            let finding = IipFinding { edge, pair: (i, j), coefficient: p, relative };
            if worst
                .as_ref()
                .map(|w| relative > w.relative)
                .unwrap_or(true)
            {
                worst = Some(finding.clone());
            }
            if relative > tolerance {
                offenders.push(finding);
            }
        }
    }
    offenders.sort_by(|a, b| {
        b.relative
            .partial_cmp(&a.relative)
            .expect("finite coefficients")
            .then_with(|| (a.edge, a.pair).cmp(&(b.edge, b.pair)))
    });
    offenders.truncate(MAX_IIP_OFFENDERS);
    Ok(IipReport {
        pass: offenders.is_empty(),
        tolerance,
        pairs_checked,
        worst,
        offenders,
    })
}
