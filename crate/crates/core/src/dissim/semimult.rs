//! Semi-multiplicativity of a variance map with respect to a tree.
//!
//! A positive map `V` is semi-multiplicative when for every pair of disjoint
//! clades `A`, `B` not induced by the same edge,
//! `V[a1][b1] * V[a2][b2] = V[a1][b2] * V[a2][b1]` for all `a1, a2` in `A`
//! and `b1, b2` in `B` — i.e. the cross block of `V` has rank one. This is
//! exactly the class of variance models whose weighted least-squares edge
//! estimators ignore all leaf pairs whose path avoids the edge.
//!
//! Checking every clade pair directly is quartic; it suffices to check, for
//! each clade `A`, the two clades hanging off the far endpoint of `A`'s
//! defining edge. Every other disjoint clade is contained in one of those
//! two, and a rank-one block stays rank one on sub-blocks.

use rayon::prelude::*;

use super::DissimilarityMap;
use crate::error::WlsError;
use crate::scalar::Scalar;
use crate::tree::{EdgeId, PhyloTree};

/// A violating quadruple of leaves across a clade pair.
#[derive(Clone, Debug)]
pub struct SemiMultFinding<T> {
    /// Defining edges of the two clades.
    pub clade_edges: (EdgeId, EdgeId),
    /// Leaves `(a1, a2, b1, b2)` with `a`s in the first clade.
    pub quadruple: [usize; 4],
    /// `|V[a1][b1] V[a2][b2] - V[a1][b2] V[a2][b1]|` normalized by the
    /// geometric mean of the two products.
    pub relative_violation: T,
}

/// Ratio table entry for the worst clade pair: the share of leaf `leaf`'s
/// reciprocal variance within its clade, seen from the reference leaf of the
/// opposite clade. Independent of the reference leaf exactly when the map is
/// semi-multiplicative.
#[derive(Clone, Debug)]
pub struct XiRatio<T> {
    pub leaf: usize,
    pub ratio: T,
}

/// Outcome of [`check_semi_multiplicative`].
#[derive(Clone, Debug)]
pub struct SemiMultReport<T> {
    pub pass: bool,
    pub tolerance: T,
    /// Number of clade pairs with a nontrivial (2x2 or larger) cross block.
    pub pairs_checked: usize,
    /// Worst quadruple by relative violation.
    pub worst: Option<SemiMultFinding<T>>,
    /// Violations above tolerance, worst first (capped at 16).
    pub offenders: Vec<SemiMultFinding<T>>,
    /// Ratio table for the worst clade pair (empty when no pair was checked).
    pub xi: Vec<XiRatio<T>>,
}

const MAX_OFFENDERS: usize = 16;

/// Checks semi-multiplicativity of the positive map `v` with respect to
/// `tree` at a relative tolerance.
pub fn check_semi_multiplicative<T: Scalar>(
    v: &DissimilarityMap<T>,
    tree: &PhyloTree,
    tolerance: T,
) -> Result<SemiMultReport<T>, WlsError> {
    if v.n() != tree.leaf_count() {
        return Err(WlsError::SizeMismatch {
            expected: tree.leaf_count(),
            got: v.n(),
        });
    }
    v.validate_positive()?;

    // Adjacent clade pairs, indexed by internal vertex: for each pair of
    // edges (e, g) at vertex t, the clades away from t. Deterministic order.
    let internal: Vec<usize> = (0..tree.node_count())
        .filter(|&node| !tree.is_leaf_node(node))
        .collect();

    struct PairOutcome<T> {
        leaves_a: Vec<usize>,
        leaves_b: Vec<usize>,
        findings: Vec<SemiMultFinding<T>>,
        worst: Option<SemiMultFinding<T>>,
        checked: bool,
    }

    let outcomes: Vec<PairOutcome<T>> = internal
        .par_iter()
        .flat_map_iter(|&t| {
            let nb = tree.neighbors(t).to_vec();
            let mut local = Vec::new();
            for ai in 0..nb.len() {
                for bi in (ai + 1)..nb.len() {
                    let (za, ea) = nb[ai];
                    let (zb, eb) = nb[bi];
                    let clade_a = tree.clade(ea, za).expect("valid edge");
                    let clade_b = tree.clade(eb, zb).expect("valid edge");
                    let nontrivial = clade_a.size() >= 2 && clade_b.size() >= 2;
                    let mut findings = Vec::new();
                    let mut worst: Option<SemiMultFinding<T>> = None;
                    if nontrivial {
                        let a0 = clade_a.leaves[0];
                        let b0 = clade_b.leaves[0];
                        for &a in &clade_a.leaves[1..] {
                            for &b in &clade_b.leaves[1..] {
                                let lhs = v.get(a0, b0) * v.get(a, b);
                                let rhs = v.get(a0, b) * v.get(a, b0);
                                let rel = (lhs - rhs).abs() / (lhs * rhs).sqrt();
                                let finding = SemiMultFinding {
                                    clade_edges: (ea, eb),
                                    quadruple: [a0, a, b0, b],
                                    relative_violation: rel,
                                };
                                if worst
                                    .as_ref()
                                    .map(|w| rel > w.relative_violation)
                                    .unwrap_or(true)
                                {
                                    worst = Some(finding.clone());
                                }
                                if rel > tolerance {
                                    findings.push(finding);
                                }
                            }
                        }
                    }
                    local.push(PairOutcome {
                        leaves_a: clade_a.leaves,
                        leaves_b: clade_b.leaves,
                        findings,
                        worst,
                        checked: nontrivial,
                    });
                }
            }
            local
        })
        .collect();

    let pairs_checked = outcomes.iter().filter(|o| o.checked).count();
    let worst = outcomes
        .iter()
        .filter_map(|o| o.worst.clone())
        .max_by(|a, b| {
            a.relative_violation
                .partial_cmp(&b.relative_violation)
                .expect("finite violations")
                .then_with(|| b.quadruple.cmp(&a.quadruple))
        });

    // Ratio table for the clade pair hosting the worst quadruple.
    let mut xi = Vec::new();
    if let Some(w) = &worst {
        if let Some(outcome) = outcomes.iter().find(|o| {
            o.worst
                .as_ref()
                .map(|ow| {
                    ow.quadruple == w.quadruple
                        && ow.clade_edges == w.clade_edges
                })
                .unwrap_or(false)
        }) {
            let b0 = outcome.leaves_b[0];
            let z: T = outcome
                .leaves_a
                .iter()
                .fold(T::zero(), |acc, &a| acc + v.get(b0, a).recip());
            for &a in &outcome.leaves_a {
                xi.push(XiRatio {
                    leaf: a,
                    ratio: v.get(b0, a).recip() / z,
                });
            }
        }
    }

    let mut offenders: Vec<SemiMultFinding<T>> =
        outcomes.into_iter().flat_map(|o| o.findings).collect();
    offenders.sort_by(|a, b| {
        b.relative_violation
            .partial_cmp(&a.relative_violation)
            .expect("finite violations")
            .then_with(|| a.quadruple.cmp(&b.quadruple))
    });
    offenders.truncate(MAX_OFFENDERS);

    Ok(SemiMultReport {
        pass: offenders.is_empty(),
        tolerance,
        pairs_checked,
        worst,
        offenders,
        xi,
    })
}

/// Worst relative violation of the semi-multiplicativity condition; zero for
/// exactly semi-multiplicative maps.
pub fn semi_mult_deviation<T: Scalar>(
    v: &DissimilarityMap<T>,
    tree: &PhyloTree,
) -> Result<T, WlsError> {
    let report = check_semi_multiplicative(v, tree, T::zero())?;
    Ok(report
        .worst
        .map(|w| w.relative_violation)
        .unwrap_or(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissim::{build_variance, VarianceModel};
    use crate::tree::TreeBuilder;

    /// Five-leaf caterpillar: cherries (a,b) and (d,e), c in the middle.
    fn five_leaves() -> PhyloTree {
        let mut b = TreeBuilder::new();
        let a = b.add_leaf("a");
        let bb = b.add_leaf("b");
        let c = b.add_leaf("c");
        let d = b.add_leaf("d");
        let e = b.add_leaf("e");
        let x = b.add_internal();
        let y = b.add_internal();
        let z = b.add_internal();
        b.add_edge(a, x);
        b.add_edge(bb, x);
        b.add_edge(x, y);
        b.add_edge(c, y);
        b.add_edge(y, z);
        b.add_edge(d, z);
        b.add_edge(e, z);
        b.build().unwrap()
    }

    #[test]
    fn multiplicative_map_passes_exactly() {
        let tree = five_leaves();
        let v = build_variance(&VarianceModel::Bme, &tree).unwrap();
        let report = check_semi_multiplicative(&v, &tree, 1e-12).unwrap();
        assert!(report.pass);
        assert!(report.pairs_checked > 0);
        assert_eq!(semi_mult_deviation(&v, &tree).unwrap(), 0.0);
    }

    #[test]
    fn scaling_one_cross_entry_is_detected() {
        let tree = five_leaves();
        let mut v = build_variance(&VarianceModel::Bme, &tree).unwrap();
        let (a, d) = (tree.leaf_id("a").unwrap(), tree.leaf_id("d").unwrap());
        v.set(a, d, v.get(a, d) * 1.5);
        let report = check_semi_multiplicative(&v, &tree, 1e-10).unwrap();
        assert!(!report.pass);
        let worst = report.worst.unwrap();
        assert!(worst.relative_violation > 0.3);
        assert!(!report.xi.is_empty());
        assert!(!report.offenders.is_empty());
    }

    #[test]
    fn quartets_admit_any_positive_map() {
        // With four leaves every nontrivial clade pair shares its defining
        // edge, so no constraint remains and any positive map passes.
        let mut b = TreeBuilder::new();
        let a = b.add_leaf("a");
        let bb = b.add_leaf("b");
        let c = b.add_leaf("c");
        let d = b.add_leaf("d");
        let x = b.add_internal();
        let y = b.add_internal();
        b.add_edge(a, x);
        b.add_edge(bb, x);
        b.add_edge(c, y);
        b.add_edge(d, y);
        b.add_edge(x, y);
        let tree = b.build().unwrap();
        let v = DissimilarityMap::from_fn(4, |i, j| 1.0 + (i * 7 + j) as f64);
        let report = check_semi_multiplicative(&v, &tree, 1e-12).unwrap();
        assert!(report.pass);
        assert_eq!(report.pairs_checked, 0);
    }

    #[test]
    fn rejects_nonpositive_maps() {
        let tree = five_leaves();
        let mut v = DissimilarityMap::from_fn(5, |_, _| 1.0f64);
        v.set(0, 1, 0.0);
        assert!(matches!(
            check_semi_multiplicative(&v, &tree, 1e-9),
            Err(WlsError::NonPositiveVariance { .. })
        ));
    }

    /// Brute force over all disjoint clade pairs (via edge pairs) and all
    /// quadruples; the adjacent-clade reduction must agree with it.
    fn brute_force_worst(v: &DissimilarityMap<f64>, tree: &PhyloTree) -> f64 {
        let mut worst = 0.0f64;
        for e in 0..tree.edge_count() {
            for f in 0..tree.edge_count() {
                if e == f {
                    continue;
                }
                let (eu, ev) = tree.edge_endpoints(e);
                let (fu, fv) = tree.edge_endpoints(f);
                // Try both orientations of each edge; keep disjoint clades.
                for hu in [eu, ev] {
                    for hv in [fu, fv] {
                        let ca = tree.clade(e, hu).unwrap();
                        let cb = tree.clade(f, hv).unwrap();
                        if ca.leaves.iter().any(|l| cb.leaves.contains(l)) {
                            continue;
                        }
                        for i1 in 0..ca.leaves.len() {
                            for i2 in (i1 + 1)..ca.leaves.len() {
                                for j1 in 0..cb.leaves.len() {
                                    for j2 in (j1 + 1)..cb.leaves.len() {
                                        let (a1, a2) = (ca.leaves[i1], ca.leaves[i2]);
                                        let (b1, b2) = (cb.leaves[j1], cb.leaves[j2]);
                                        let lhs = v.get(a1, b1) * v.get(a2, b2);
                                        let rhs = v.get(a1, b2) * v.get(a2, b1);
                                        let rel = (lhs - rhs).abs() / (lhs * rhs).sqrt();
                                        worst = worst.max(rel);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        worst
    }

    #[test]
    fn reduction_agrees_with_brute_force() {
        let tree = five_leaves();
        // Exactly multiplicative: both report zero violation.
        let v = build_variance(&VarianceModel::Bme, &tree).unwrap();
        assert_eq!(brute_force_worst(&v, &tree), 0.0);
        assert_eq!(semi_mult_deviation(&v, &tree).unwrap(), 0.0);

        // Clearly violating: both must flag it (magnitudes may differ since
        // the reduction checks reference-anchored quadruples only).
        let mut v = build_variance(&VarianceModel::Bme, &tree).unwrap();
        let (a, d) = (tree.leaf_id("a").unwrap(), tree.leaf_id("d").unwrap());
        v.set(a, d, v.get(a, d) * 2.0);
        assert!(brute_force_worst(&v, &tree) > 0.1);
        assert!(semi_mult_deviation(&v, &tree).unwrap() > 0.1);
    }
}
