//! Fast combinatorial weighted least-squares estimators.
//!
//! The dense reference in [`crate::oracle`] costs `O(n^3)` and up. When the
//! variance map factors along tree paths (multiplicative), every edge length
//! has a closed form in terms of clade-level aggregates; when it is merely
//! semi-multiplicative, each edge can be solved exactly on a collapsed tree
//! with at most eight leaves. Both need only the [`CladeAggregates`] tables,
//! built once in `O(n^2)`.
//!
//! For every unordered pair of distinct edges `{e, f}` there is exactly one
//! way to read it as a pair of disjoint clades: take each edge's side facing
//! away from the other. The tables store, per pair,
//! `Z = sum 1/V[i][j]` and `N = sum D[i][j]/V[i][j]` over the cross pairs of
//! those clades; `dbar = N / Z` is the variance-weighted average
//! dissimilarity. A two-pass dynamic program fills them: pass one merges
//! disjoint subtree pairs bottom-up, pass two peels complements down each
//! ancestor chain.

use rayon::prelude::*;

use crate::dissim::{
    build_variance, check_semi_multiplicative, pair_count, pair_index, DissimilarityMap,
    VarianceModel,
};
use crate::error::{TreeError, WlsError};
use crate::oracle::{blue_coefficients, wls_solve_dense};
use crate::scalar::Scalar;
use crate::tree::{EdgeContext, EdgeId, NodeId, PhyloTree, TreeAdditiveMap};

/// Tolerance at which the estimator router accepts a variance map as
/// semi-multiplicative.
pub const SEMI_MULT_ROUTING_TOLERANCE: f64 = 1e-10;

/// Rooted view of the tree used by the aggregate passes.
struct Rooted {
    /// Edge toward the root, per node (`None` at the root).
    parent_edge: Vec<Option<EdgeId>>,
    /// Endpoint of each edge farther from the root.
    down_node: Vec<NodeId>,
    /// Endpoint of each edge closer to the root.
    up_node: Vec<NodeId>,
    /// Edges to children, per node.
    child_edges: Vec<Vec<EdgeId>>,
    /// Leaves in the subtree below each edge.
    size: Vec<usize>,
    tin: Vec<usize>,
    tout: Vec<usize>,
}

impl Rooted {
    fn build(tree: &PhyloTree, root: NodeId) -> Rooted {
        let nodes = tree.node_count();
        let edges = tree.edge_count();
        let mut r = Rooted {
            parent_edge: vec![None; nodes],
            down_node: vec![0; edges],
            up_node: vec![0; edges],
            child_edges: vec![Vec::new(); nodes],
            size: vec![0; edges],
            tin: vec![0; nodes],
            tout: vec![0; nodes],
        };
        let mut leaves_below = vec![0usize; nodes];
        let mut timer = 0usize;
        enum Ev {
            Enter(NodeId, Option<EdgeId>),
            Exit(NodeId),
        }
        let mut stack = vec![Ev::Enter(root, None)];
        while let Some(ev) = stack.pop() {
            match ev {
                Ev::Enter(node, via) => {
                    r.tin[node] = timer;
                    timer += 1;
                    r.parent_edge[node] = via;
                    stack.push(Ev::Exit(node));
                    for &(nb, e) in tree.neighbors(node) {
                        if Some(e) == via {
                            continue;
                        }
                        r.down_node[e] = nb;
                        r.up_node[e] = node;
                        r.child_edges[node].push(e);
                        stack.push(Ev::Enter(nb, Some(e)));
                    }
                }
                Ev::Exit(node) => {
                    r.tout[node] = timer;
                    timer += 1;
                    let mut below = usize::from(tree.is_leaf_node(node));
                    for &e in &r.child_edges[node] {
                        below += leaves_below[r.down_node[e]];
                    }
                    leaves_below[node] = below;
                    if let Some(e) = r.parent_edge[node] {
                        r.size[e] = below;
                    }
                }
            }
        }
        r
    }

    /// True when the subtree below `e` contains the subtree below `f`.
    fn is_ancestor(&self, e: EdgeId, f: EdgeId) -> bool {
        let (a, b) = (self.down_node[e], self.down_node[f]);
        self.tin[a] <= self.tin[b] && self.tout[b] <= self.tout[a]
    }

    fn incomparable(&self, e: EdgeId, f: EdgeId) -> bool {
        !self.is_ancestor(e, f) && !self.is_ancestor(f, e)
    }

    /// Next edge on the path from `e` toward the root.
    fn anc_edge(&self, e: EdgeId) -> Option<EdgeId> {
        self.parent_edge[self.up_node[e]]
    }
}

/// Per-edge-pair weighted sums over the unique disjoint clade reading.
pub struct CladeAggregates<T> {
    edges: usize,
    z: Vec<T>,
    num: Vec<T>,
}

impl<T: Scalar> CladeAggregates<T> {
    fn idx(&self, e: EdgeId, f: EdgeId) -> usize {
        pair_index(self.edges, e, f)
    }

    /// `sum of 1/V` over cross pairs of the two clades.
    pub fn z(&self, e: EdgeId, f: EdgeId) -> T {
        self.z[self.idx(e, f)]
    }

    /// Variance-weighted average dissimilarity between the two clades.
    pub fn dbar(&self, e: EdgeId, f: EdgeId) -> T {
        let i = self.idx(e, f);
        self.num[i] / self.z[i]
    }
}

/// Builds the aggregate tables in `O(n^2)` time and space.
pub fn compute_aggregates<T: Scalar>(
    tree: &PhyloTree,
    d: &DissimilarityMap<T>,
    v: &DissimilarityMap<T>,
) -> Result<CladeAggregates<T>, WlsError> {
    let n = tree.leaf_count();
    if n < 3 {
        return Err(TreeError::TooFewLeaves { need: 3, got: n }.into());
    }
    if d.n() != n {
        return Err(WlsError::SizeMismatch { expected: n, got: d.n() });
    }
    if v.n() != n {
        return Err(WlsError::SizeMismatch { expected: n, got: v.n() });
    }
    v.validate_positive()?;

    let root = (0..tree.node_count())
        .find(|&x| !tree.is_leaf_node(x))
        .expect("trees with three leaves have an internal vertex");
    let r = Rooted::build(tree, root);
    let m = tree.edge_count();
    let mut agg = CladeAggregates {
        edges: m,
        z: vec![T::zero(); pair_count(m)],
        num: vec![T::zero(); pair_count(m)],
    };

    // Pass one: incomparable pairs (both clades are downward subtrees),
    // in increasing order of combined subtree size so that the children of
    // the larger side are always ready.
    let max_size = *r.size.iter().max().expect("at least one edge");
    let mut by_size: Vec<Vec<EdgeId>> = vec![Vec::new(); max_size + 1];
    for e in 0..m {
        by_size[r.size[e]].push(e);
    }
    for total in 2..=(2 * max_size) {
        let lo = total.saturating_sub(max_size).max(1);
        for s_small in lo..=(total / 2) {
            let s_large = total - s_small;
            if s_large > max_size {
                continue;
            }
            for (ei, &e) in by_size[s_small].iter().enumerate() {
                let partners = &by_size[s_large];
                let start = if s_small == s_large { ei + 1 } else { 0 };
                for &f in &partners[start..] {
                    if !r.incomparable(e, f) {
                        continue;
                    }
                    let at = pair_index(m, e, f);
                    if s_large == 1 {
                        let i = tree.node_leaf(r.down_node[e]).expect("leaf edge");
                        let j = tree.node_leaf(r.down_node[f]).expect("leaf edge");
                        let w = v.get(i, j).recip();
                        agg.z[at] = w;
                        agg.num[at] = w * d.get(i, j);
                    } else {
                        let mut z = T::zero();
                        let mut num = T::zero();
                        for &g in &r.child_edges[r.down_node[f]] {
                            let sub = pair_index(m, e, g);
                            z += agg.z[sub];
                            num += agg.num[sub];
                        }
                        agg.z[at] = z;
                        agg.num[at] = num;
                    }
                }
            }
        }
    }

    // Pass two: nested pairs (downward subtree of `e` against the complement
    // of an ancestor edge), walking each ancestor chain from the top. The
    // complement grows one sibling subtree at a time.
    let mut chain = Vec::new();
    for e in 0..m {
        chain.clear();
        let mut x = e;
        while let Some(p) = r.anc_edge(x) {
            chain.push(p);
            x = p;
        }
        for (step, &f) in chain.iter().rev().enumerate() {
            let at = pair_index(m, e, f);
            let mut z = T::zero();
            let mut num = T::zero();
            if step == 0 {
                // Topmost ancestor: the complement is the union of the other
                // root subtrees.
                for &g in &r.child_edges[r.up_node[f]] {
                    if g == f {
                        continue;
                    }
                    let sub = pair_index(m, e, g);
                    z += agg.z[sub];
                    num += agg.num[sub];
                }
            } else {
                let parent = r.anc_edge(f).expect("non-top chain entry");
                let sub = pair_index(m, e, parent);
                z += agg.z[sub];
                num += agg.num[sub];
                for &g in &r.child_edges[r.up_node[f]] {
                    if g == f {
                        continue;
                    }
                    let sib = pair_index(m, e, g);
                    z += agg.z[sib];
                    num += agg.num[sib];
                }
            }
            agg.z[at] = z;
            agg.num[at] = num;
        }
    }
    Ok(agg)
}

/// Closed-form WLS length of one edge; exact when the variance map is
/// multiplicative along tree paths. Requires a binary tree.
pub fn edge_length_closed_form<T: Scalar>(
    tree: &PhyloTree,
    agg: &CladeAggregates<T>,
    edge: EdgeId,
) -> Result<T, WlsError> {
    let half = T::cast(0.5);
    match tree.clades_around_edge(edge)? {
        EdgeContext::Internal { a, b, c, d } => {
            let (ea, eb, ec, ed) = (a.edge, b.edge, c.edge, d.edge);
            let (z_ac, z_ad) = (agg.z(ea, ec), agg.z(ea, ed));
            let (z_bc, z_bd) = (agg.z(eb, ec), agg.z(eb, ed));
            let z_tot = z_ac + z_ad + z_bc + z_bd;
            let w_acbd = (z_ad + z_bc) / z_tot;
            let w_adbc = (z_ac + z_bd) / z_tot;
            let two_l = w_acbd * (agg.dbar(ea, ec) + agg.dbar(eb, ed))
                + w_adbc * (agg.dbar(ea, ed) + agg.dbar(eb, ec))
                - agg.dbar(ea, eb)
                - agg.dbar(ec, ed);
            Ok(half * two_l)
        }
        EdgeContext::Leaf { leaf, a, b } => {
            let ei = tree.leaf_edge(leaf);
            let two_l =
                agg.dbar(a.edge, ei) + agg.dbar(b.edge, ei) - agg.dbar(a.edge, b.edge);
            Ok(half * two_l)
        }
    }
}

/// Exact WLS length of one edge for semi-multiplicative variance maps,
/// computed on the collapsed tree around the edge (at most eight leaves).
/// Each collapsed leaf stands for a clade; the reduced system sees the
/// weighted average dissimilarities with variance `1/Z`.
pub fn edge_length_collapsed<T: Scalar>(
    tree: &PhyloTree,
    agg: &CladeAggregates<T>,
    edge: EdgeId,
) -> Result<T, WlsError> {
    let collapsed = tree.collapse_around_edge(edge)?;
    let k = collapsed.tree.leaf_count();
    let clade_edge = |i: usize| collapsed.leaf_clades[i].edge;
    let v_red = DissimilarityMap::from_fn(k, |i, j| agg.z(clade_edge(i), clade_edge(j)).recip());
    let d_red = DissimilarityMap::from_fn(k, |i, j| agg.dbar(clade_edge(i), clade_edge(j)));
    let mut f = vec![T::zero(); collapsed.tree.edge_count()];
    f[collapsed.target_edge] = T::one();
    let blue = blue_coefficients(&collapsed.tree, &v_red, &f)?;
    Ok(blue.estimate(&d_red))
}

/// Which estimator produced a [`FastSolution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimationMethod {
    /// Per-edge closed form (variance multiplicative by construction).
    ClosedForm,
    /// Collapsed  small-system solves (variance checked semi-multiplicative).
    Collapsed,
    /// Dense Gauss–Markov fallback.
    Dense,
}

/// Edge lengths plus the route that computed them.
#[derive(Clone, Debug)]
pub struct FastSolution<T> {
    pub lengths: TreeAdditiveMap<T>,
    pub method: EstimationMethod,
}

/// Estimates all edge lengths under `model`, choosing the fastest exact
/// route: closed form for certified-multiplicative models, collapsed solves
/// when the materialized map passes the semi-multiplicativity check at
/// [`SEMI_MULT_ROUTING_TOLERANCE`], dense otherwise.
pub fn all_edge_lengths<T: Scalar>(
    tree: &PhyloTree,
    d: &DissimilarityMap<T>,
    model: &VarianceModel<T>,
) -> Result<FastSolution<T>, WlsError> {
    let v = build_variance(model, tree)?;
    all_edge_lengths_with(tree, d, &v, model.certified_multiplicative())
}

/// Like [`all_edge_lengths`] for an already materialized variance map.
/// `certified_multiplicative` short-circuits the semi-multiplicativity check
/// when the caller can vouch for the model's structure.
pub fn all_edge_lengths_with<T: Scalar>(
    tree: &PhyloTree,
    d: &DissimilarityMap<T>,
    v: &DissimilarityMap<T>,
    certified_multiplicative: bool,
) -> Result<FastSolution<T>, WlsError> {
    let n = tree.leaf_count();
    if d.n() != n {
        return Err(WlsError::SizeMismatch { expected: n, got: d.n() });
    }
    if n == 2 {
        return Ok(FastSolution {
            lengths: TreeAdditiveMap::new(tree, vec![d.get(0, 1)])?,
            method: EstimationMethod::ClosedForm,
        });
    }
    // The combinatorial routes need binary internal vertices.
    if tree.is_binary() {
        if certified_multiplicative {
            let agg = compute_aggregates(tree, d, v)?;
            let values = (0..tree.edge_count())
                .into_par_iter()
                .map(|e| edge_length_closed_form(tree, &agg, e))
                .collect::<Result<Vec<T>, WlsError>>()?;
            return Ok(FastSolution {
                lengths: TreeAdditiveMap::new(tree, values)?,
                method: EstimationMethod::ClosedForm,
            });
        }
        let tol = T::cast(SEMI_MULT_ROUTING_TOLERANCE);
        if check_semi_multiplicative(v, tree, tol)?.pass {
            let agg = compute_aggregates(tree, d, v)?;
            let values = (0..tree.edge_count())
                .into_par_iter()
                .map(|e| edge_length_collapsed(tree, &agg, e))
                .collect::<Result<Vec<T>, WlsError>>()?;
            return Ok(FastSolution {
                lengths: TreeAdditiveMap::new(tree, values)?,
                method: EstimationMethod::Collapsed,
            });
        }
    }
    let dense = wls_solve_dense(tree, d, v)?;
    Ok(FastSolution {
        lengths: dense.lengths,
        method: EstimationMethod::Dense,
    })
}

/// Topology-only balanced tree length: `sum of D[i][j] * 2^(1 - k)` with `k`
/// the number of edges between the leaves. Equals the BLUE of the total tree
/// length under the balanced variance `V = 2^k`.
pub fn pauplin_tree_length<T: Scalar>(tree: &PhyloTree, d: &DissimilarityMap<T>) -> T {
    let counts = tree.path_edge_counts();
    let two = T::cast(2.0);
    let mut total = T::zero();
    for (i, j, obs) in d.iter_pairs() {
        total += obs * two.powf(T::cast(1.0 - counts.get(i, j)));
    }
    total
}
