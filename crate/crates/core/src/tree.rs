//! Unrooted phylogenetic trees with labeled leaves.
//!
//! Trees are stored as an adjacency structure over nodes; leaves are the
//! degree-one nodes and carry unique string labels. Leaf, node and edge
//! handles are plain indices that stay stable for the lifetime of the tree,
//! so dissimilarity maps and edge-length vectors can be indexed directly.

use std::collections::HashMap;

use crate::dissim::{DissimilarityMap, QuartetSplit};
use crate::error::TreeError;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Index of a node (leaf or internal vertex).
pub type NodeId = usize;
/// Index of an undirected edge.
pub type EdgeId = usize;
/// Index of a leaf in the tree's leaf ordering.
pub type LeafId = usize;

/// An unrooted tree over labeled leaves.
#[derive(Clone, Debug)]
pub struct PhyloTree {
    adj: Vec<Vec<(NodeId, EdgeId)>>,
    edges: Vec<(NodeId, NodeId)>,
    /// Leaf order: `leaves[leaf_id]` is the node hosting that leaf.
    leaves: Vec<NodeId>,
    labels: Vec<String>,
    leaf_of_node: Vec<Option<LeafId>>,
    label_index: HashMap<String, LeafId>,
}

/// Incremental construction of a [`PhyloTree`].
///
/// Used by the Newick parser, the simulators, and the collapse operation.
#[derive(Default, Debug)]
pub struct TreeBuilder {
    labels: Vec<Option<String>>,
    edges: Vec<(NodeId, NodeId)>,
}

impl TreeBuilder {
    pub fn new() -> Self {
        TreeBuilder::default()
    }

    /// Adds a labeled node; it must end up with degree one.
    pub fn add_leaf(&mut self, label: impl Into<String>) -> NodeId {
        self.labels.push(Some(label.into()));
        self.labels.len() - 1
    }

    /// Adds an unlabeled internal node; it must end up with degree three or more.
    pub fn add_internal(&mut self) -> NodeId {
        self.labels.push(None);
        self.labels.len() - 1
    }

    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> EdgeId {
        self.edges.push((u, v));
        self.edges.len() - 1
    }

    /// Validates connectivity, degrees and label uniqueness, producing the tree.
    pub fn build(self) -> Result<PhyloTree, TreeError> {
        let n_nodes = self.labels.len();
        if n_nodes == 0 {
            return Err(TreeError::InvalidStructure("empty tree".into()));
        }
        if self.edges.len() + 1 != n_nodes {
            return Err(TreeError::InvalidStructure(format!(
                "{} edges for {} nodes (want nodes - 1)",
                self.edges.len(),
                n_nodes
            )));
        }
        let mut adj: Vec<Vec<(NodeId, EdgeId)>> = vec![Vec::new(); n_nodes];
        for (eid, &(u, v)) in self.edges.iter().enumerate() {
            if u >= n_nodes || v >= n_nodes || u == v {
                return Err(TreeError::InvalidStructure(format!(
                    "edge {eid} connects invalid node pair ({u}, {v})"
                )));
            }
            adj[u].push((v, eid));
            adj[v].push((u, eid));
        }
        // Connectivity: edge count already matches a tree, so one sweep suffices.
        let mut seen = vec![false; n_nodes];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        if count != n_nodes {
            return Err(TreeError::InvalidStructure("graph is disconnected".into()));
        }
        let mut leaves = Vec::new();
        let mut labels = Vec::new();
        let mut leaf_of_node = vec![None; n_nodes];
        let mut label_index = HashMap::new();
        for (node, label) in self.labels.iter().enumerate() {
            let degree = adj[node].len();
            match label {
                Some(name) => {
                    if degree != 1 {
                        return Err(TreeError::InvalidStructure(format!(
                            "labeled node '{name}' has degree {degree}, leaves must have degree 1"
                        )));
                    }
                    let leaf_id = leaves.len();
                    if label_index.insert(name.clone(), leaf_id).is_some() {
                        return Err(TreeError::DuplicateLeafLabel(name.clone()));
                    }
                    leaf_of_node[node] = Some(leaf_id);
                    leaves.push(node);
                    labels.push(name.clone());
                }
                None => {
                    if degree < 3 {
                        return Err(TreeError::InvalidStructure(format!(
                            "internal node {node} has degree {degree}, expected at least 3"
                        )));
                    }
                }
            }
        }
        if leaves.len() < 2 {
            return Err(TreeError::TooFewLeaves {
                need: 2,
                got: leaves.len(),
            });
        }
        Ok(PhyloTree {
            adj,
            edges: self.edges,
            leaves,
            labels,
            leaf_of_node,
            label_index,
        })
    }
}

impl PhyloTree {
    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn leaf_label(&self, leaf: LeafId) -> &str {
        &self.labels[leaf]
    }

    pub fn leaf_labels(&self) -> impl Iterator<Item = &str> {
        self.labels.iter().map(String::as_str)
    }

    pub fn leaf_id(&self, label: &str) -> Option<LeafId> {
        self.label_index.get(label).copied()
    }

    pub fn leaf_node(&self, leaf: LeafId) -> NodeId {
        self.leaves[leaf]
    }

    pub fn node_leaf(&self, node: NodeId) -> Option<LeafId> {
        self.leaf_of_node[node]
    }

    pub fn is_leaf_node(&self, node: NodeId) -> bool {
        self.leaf_of_node[node].is_some()
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adj[node].len()
    }

    /// Neighbors of `node` as `(neighbor, connecting edge)` pairs, in a
    /// deterministic (construction) order.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adj[node]
    }

    pub fn edge_endpoints(&self, edge: EdgeId) -> (NodeId, NodeId) {
        self.edges[edge]
    }

    /// True when every internal vertex has degree exactly three.
    pub fn is_binary(&self) -> bool {
        self.adj
            .iter()
            .enumerate()
            .all(|(node, nb)| self.is_leaf_node(node) || nb.len() == 3)
    }

    /// The unique edge incident to a leaf.
    pub fn leaf_edge(&self, leaf: LeafId) -> EdgeId {
        self.adj[self.leaves[leaf]][0].1
    }

    /// True when one endpoint of `edge` is a leaf.
    pub fn is_leaf_edge(&self, edge: EdgeId) -> bool {
        let (u, v) = self.edges[edge];
        self.is_leaf_node(u) || self.is_leaf_node(v)
    }

    pub fn internal_edges(&self) -> Vec<EdgeId> {
        (0..self.edge_count())
            .filter(|&e| !self.is_leaf_edge(e))
            .collect()
    }

    fn check_leaf(&self, leaf: LeafId) -> Result<(), TreeError> {
        if leaf >= self.leaf_count() {
            return Err(TreeError::IndexOutOfRange {
                kind: "leaf",
                index: leaf,
                count: self.leaf_count(),
            });
        }
        Ok(())
    }

    fn check_edge(&self, edge: EdgeId) -> Result<(), TreeError> {
        if edge >= self.edge_count() {
            return Err(TreeError::IndexOutOfRange {
                kind: "edge",
                index: edge,
                count: self.edge_count(),
            });
        }
        Ok(())
    }

    /// Edges on the path between two distinct leaves, ordered from `i` to `j`.
    pub fn path_edges(&self, i: LeafId, j: LeafId) -> Result<Vec<EdgeId>, TreeError> {
        self.check_leaf(i)?;
        self.check_leaf(j)?;
        if i == j {
            return Err(TreeError::InvalidStructure(
                "path endpoints must be distinct leaves".into(),
            ));
        }
        let start = self.leaves[i];
        let goal = self.leaves[j];
        // Parent pointers from a DFS rooted at `start`.
        let mut parent_edge: Vec<Option<(NodeId, EdgeId)>> = vec![None; self.node_count()];
        let mut stack = vec![start];
        let mut seen = vec![false; self.node_count()];
        seen[start] = true;
        while let Some(u) = stack.pop() {
            if u == goal {
                break;
            }
            for &(v, e) in &self.adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    parent_edge[v] = Some((u, e));
                    stack.push(v);
                }
            }
        }
        let mut path = Vec::new();
        let mut cur = goal;
        while cur != start {
            let (prev, e) = parent_edge[cur].expect("connected tree");
            path.push(e);
            cur = prev;
        }
        path.reverse();
        Ok(path)
    }

    /// Folds an accumulator along the path from `from` to every other leaf.
    ///
    /// `step(acc, edge)` is applied once per edge walking away from `from`;
    /// the returned vector holds the accumulated value per leaf (`None` for
    /// `from` itself). One call costs O(nodes), so all-pairs quantities cost
    /// O(n^2) via n calls.
    pub fn fold_paths_from<A: Clone>(
        &self,
        from: LeafId,
        init: A,
        mut step: impl FnMut(&A, EdgeId) -> A,
    ) -> Vec<Option<A>> {
        let mut out = vec![None; self.leaf_count()];
        let start = self.leaves[from];
        let mut stack: Vec<(NodeId, NodeId, A)> = vec![(start, usize::MAX, init)];
        while let Some((u, came_from, acc)) = stack.pop() {
            if u != start {
                if let Some(leaf) = self.leaf_of_node[u] {
                    out[leaf] = Some(acc.clone());
                    continue;
                }
            }
            for &(v, e) in &self.adj[u] {
                if v != came_from {
                    stack.push((v, u, step(&acc, e)));
                }
            }
        }
        out
    }

    /// Number of edges on the path between every leaf pair.
    pub fn path_edge_counts(&self) -> DissimilarityMap<f64> {
        let n = self.leaf_count();
        let mut d = DissimilarityMap::zeros(n);
        for i in 0..n {
            let counts = self.fold_paths_from(i, 0u32, |acc, _| acc + 1);
            for (j, c) in counts.into_iter().enumerate() {
                if let Some(c) = c {
                    if i < j {
                        d.set(i, j, c as f64);
                    }
                }
            }
        }
        d
    }

    /// Pair-edge incidence matrix: one row per leaf pair (in pair-index order),
    /// one column per edge, entry 1 when the edge lies on the pair's path.
    pub fn incidence_matrix<T: Scalar>(&self) -> Result<Matrix<T>, TreeError> {
        let n = self.leaf_count();
        if n < 3 {
            return Err(TreeError::TooFewLeaves { need: 3, got: n });
        }
        let mut m = Matrix::zeros(n * (n - 1) / 2, self.edge_count());
        let mut row = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                for e in self.path_edges(i, j)? {
                    m.set(row, e, T::one());
                }
                row += 1;
            }
        }
        Ok(m)
    }

    /// The quartet split induced by the tree on four distinct leaves:
    /// which of the other three leaves shares a side with the first one.
    pub fn induced_quartet_split(
        &self,
        i: LeafId,
        j: LeafId,
        k: LeafId,
        l: LeafId,
    ) -> Result<QuartetSplit, TreeError> {
        for leaf in [i, j, k, l] {
            self.check_leaf(leaf)?;
        }
        if i == j || i == k || i == l || j == k || j == l || k == l {
            return Err(TreeError::InvalidStructure(
                "quartet leaves must be distinct".into(),
            ));
        }
        let disjoint = |p: &[EdgeId], q: &[EdgeId]| p.iter().all(|e| !q.contains(e));
        let pij = self.path_edges(i, j)?;
        let pkl = self.path_edges(k, l)?;
        if disjoint(&pij, &pkl) {
            return Ok(QuartetSplit::FirstSecond);
        }
        let pik = self.path_edges(i, k)?;
        let pjl = self.path_edges(j, l)?;
        if disjoint(&pik, &pjl) {
            return Ok(QuartetSplit::FirstThird);
        }
        Ok(QuartetSplit::FirstFourth)
    }

    /// Leaves of the clade on the `head` side of `edge`.
    fn clade_leaves(&self, edge: EdgeId, head: NodeId) -> Vec<LeafId> {
        let (u, v) = self.edges[edge];
        debug_assert!(head == u || head == v);
        let mut leaves = Vec::new();
        let mut stack = vec![(head, if head == u { v } else { u })];
        while let Some((node, came_from)) = stack.pop() {
            if let Some(leaf) = self.leaf_of_node[node] {
                leaves.push(leaf);
                continue;
            }
            for &(w, _) in &self.adj[node] {
                if w != came_from {
                    stack.push((w, node));
                }
            }
        }
        leaves.sort_unstable();
        leaves
    }

    /// Materializes the clade on the `head` side of `edge`.
    pub fn clade(&self, edge: EdgeId, head: NodeId) -> Result<Clade, TreeError> {
        self.check_edge(edge)?;
        let (u, v) = self.edges[edge];
        if head != u && head != v {
            return Err(TreeError::InvalidStructure(format!(
                "node {head} is not an endpoint of edge {edge}"
            )));
        }
        Ok(Clade {
            edge,
            head,
            leaves: self.clade_leaves(edge, head),
        })
    }

    /// The clades adjacent to an edge: the two (or, for a leaf edge, the one
    /// leaf plus two) maximal clades hanging off its endpoints.
    pub fn clades_around_edge(&self, edge: EdgeId) -> Result<EdgeContext, TreeError> {
        self.check_edge(edge)?;
        let (u, v) = self.edges[edge];
        let side_clades = |endpoint: NodeId| -> Result<Vec<Clade>, TreeError> {
            if self.adj[endpoint].len() != 3 {
                return Err(TreeError::NotBinary {
                    node: endpoint,
                    degree: self.adj[endpoint].len(),
                });
            }
            self.adj[endpoint]
                .iter()
                .filter(|&&(_, e)| e != edge)
                .map(|&(z, g)| self.clade(g, z))
                .collect()
        };
        match (self.is_leaf_node(u), self.is_leaf_node(v)) {
            (false, false) => {
                let mut ab = side_clades(u)?;
                let mut cd = side_clades(v)?;
                let d = cd.pop().unwrap();
                let c = cd.pop().unwrap();
                let b = ab.pop().unwrap();
                let a = ab.pop().unwrap();
                Ok(EdgeContext::Internal { a, b, c, d })
            }
            (true, false) | (false, true) => {
                let (leaf_node, inner) = if self.is_leaf_node(u) { (u, v) } else { (v, u) };
                let mut ab = side_clades(inner)?;
                let b = ab.pop().unwrap();
                let a = ab.pop().unwrap();
                Ok(EdgeContext::Leaf {
                    leaf: self.leaf_of_node[leaf_node].unwrap(),
                    a,
                    b,
                })
            }
            (true, true) => Err(TreeError::TooFewLeaves {
                need: 3,
                got: self.leaf_count(),
            }),
        }
    }

    /// Evaluates a tree-additive map: `D[i][j]` is the sum of edge values on
    /// the path between leaves `i` and `j`. Values may be negative.
    pub fn evaluate_additive<T: Scalar>(&self, map: &TreeAdditiveMap<T>) -> DissimilarityMap<T> {
        assert_eq!(
            map.values.len(),
            self.edge_count(),
            "edge value count does not match tree"
        );
        let n = self.leaf_count();
        let mut d = DissimilarityMap::zeros(n);
        for i in 0..n {
            let sums = self.fold_paths_from(i, T::zero(), |acc, e| *acc + map.values[e]);
            for (j, s) in sums.into_iter().enumerate() {
                if let Some(s) = s {
                    if i < j {
                        d.set(i, j, s);
                    }
                }
            }
        }
        d
    }

    /// Canonical key for the bipartition an edge induces: the sorted labels of
    /// the side that does not contain the lexicographically smallest leaf.
    pub fn split_key(&self, edge: EdgeId) -> Vec<String> {
        let smallest = (0..self.leaf_count())
            .min_by(|&a, &b| self.labels[a].cmp(&self.labels[b]))
            .expect("tree has leaves");
        let (u, v) = self.edges[edge];
        let side_u = self.clade_leaves(edge, u);
        let side = if side_u.contains(&smallest) {
            self.clade_leaves(edge, v)
        } else {
            side_u
        };
        let mut labels: Vec<String> = side.iter().map(|&l| self.labels[l].clone()).collect();
        labels.sort();
        labels
    }

    /// Contracts everything at edge-distance two or more from `edge` into
    /// single reduced leaves, keeping the local structure around `edge` exact.
    ///
    /// Reduced leaves correspond to the clades hanging off the second
    /// neighborhood of `edge` (and to leaves adjacent to it); the result has
    /// at most 8 leaves and 13 edges. Reduced leaves are labeled by the
    /// smallest original leaf label inside their clade.
    pub fn collapse_around_edge(&self, edge: EdgeId) -> Result<CollapsedTree, TreeError> {
        self.check_edge(edge)?;
        if self.leaf_count() < 3 {
            return Err(TreeError::TooFewLeaves {
                need: 3,
                got: self.leaf_count(),
            });
        }
        let mut builder = TreeBuilder::new();
        let mut leaf_clades: Vec<Clade> = Vec::new();
        let mut edge_map: Vec<EdgeId> = Vec::new();
        let mut pending_edges: Vec<(NodeId, NodeId, EdgeId)> = Vec::new();

        let clade_label = |clade: &Clade| -> String {
            clade
                .leaves
                .iter()
                .map(|&l| self.labels[l].as_str())
                .min()
                .expect("clade is nonempty")
                .to_string()
        };
        let add_clade_leaf = |builder: &mut TreeBuilder,
                              leaf_clades: &mut Vec<Clade>,
                              clade: Clade|
         -> NodeId {
            let node = builder.add_leaf(clade_label(&clade));
            leaf_clades.push(clade);
            node
        };

        // Image of one endpoint of `edge`, expanding its side up to depth two.
        let expand_endpoint = |builder: &mut TreeBuilder,
                               leaf_clades: &mut Vec<Clade>,
                               pending: &mut Vec<(NodeId, NodeId, EdgeId)>,
                               endpoint: NodeId|
         -> Result<NodeId, TreeError> {
            if let Some(leaf) = self.leaf_of_node[endpoint] {
                let clade = Clade {
                    edge,
                    head: endpoint,
                    leaves: vec![leaf],
                };
                return Ok(add_clade_leaf(builder, leaf_clades, clade));
            }
            if self.adj[endpoint].len() != 3 {
                return Err(TreeError::NotBinary {
                    node: endpoint,
                    degree: self.adj[endpoint].len(),
                });
            }
            let image = builder.add_internal();
            for &(z, g) in &self.adj[endpoint] {
                if g == edge {
                    continue;
                }
                if self.is_leaf_node(z) {
                    let node = add_clade_leaf(builder, leaf_clades, self.clade(g, z)?);
                    pending.push((image, node, g));
                } else {
                    if self.adj[z].len() != 3 {
                        return Err(TreeError::NotBinary {
                            node: z,
                            degree: self.adj[z].len(),
                        });
                    }
                    let z_image = builder.add_internal();
                    pending.push((image, z_image, g));
                    for &(w, h) in &self.adj[z] {
                        if h == g {
                            continue;
                        }
                        let node = add_clade_leaf(builder, leaf_clades, self.clade(h, w)?);
                        pending.push((z_image, node, h));
                    }
                }
            }
            Ok(image)
        };

        let (u, v) = self.edges[edge];
        let u_image = expand_endpoint(&mut builder, &mut leaf_clades, &mut pending_edges, u)?;
        let v_image = expand_endpoint(&mut builder, &mut leaf_clades, &mut pending_edges, v)?;
        pending_edges.push((u_image, v_image, edge));
        for &(a, b, original) in &pending_edges {
            builder.add_edge(a, b);
            edge_map.push(original);
        }
        let target_edge = edge_map.len() - 1;
        let tree = builder.build()?;
        Ok(CollapsedTree {
            tree,
            leaf_clades,
            edge_map,
            target_edge,
        })
    }
}

/// One side of an edge: the set of leaves reachable from `head` without
/// crossing `edge`. `head` doubles as the side marker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clade {
    pub edge: EdgeId,
    pub head: NodeId,
    /// Sorted leaf ids in the clade.
    pub leaves: Vec<LeafId>,
}

impl Clade {
    pub fn size(&self) -> usize {
        self.leaves.len()
    }
}

/// The maximal clades surrounding an edge.
#[derive(Clone, Debug)]
pub enum EdgeContext {
    /// Internal edge: `a`, `b` hang off one endpoint, `c`, `d` off the other.
    Internal { a: Clade, b: Clade, c: Clade, d: Clade },
    /// Leaf edge: the leaf plus the two clades at its internal endpoint.
    Leaf { leaf: LeafId, a: Clade, b: Clade },
}

/// An assignment of a value (e.g. a branch length) to every edge.
///
/// Values may be negative; least-squares estimates are not sign-constrained.
#[derive(Clone, Debug, PartialEq)]
pub struct TreeAdditiveMap<T> {
    values: Vec<T>,
}

impl<T: Scalar> TreeAdditiveMap<T> {
    pub fn new(tree: &PhyloTree, values: Vec<T>) -> Result<Self, TreeError> {
        if values.len() != tree.edge_count() {
            return Err(TreeError::IndexOutOfRange {
                kind: "edge value",
                index: values.len(),
                count: tree.edge_count(),
            });
        }
        Ok(TreeAdditiveMap { values })
    }

    pub fn uniform(tree: &PhyloTree, value: T) -> Self {
        TreeAdditiveMap {
            values: vec![value; tree.edge_count()],
        }
    }

    pub fn get(&self, edge: EdgeId) -> T {
        self.values[edge]
    }

    pub fn set(&mut self, edge: EdgeId, value: T) {
        self.values[edge] = value;
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Result of [`PhyloTree::collapse_around_edge`].
#[derive(Clone, Debug)]
pub struct CollapsedTree {
    /// The reduced tree (at most 8 leaves / 13 edges).
    pub tree: PhyloTree,
    /// Original clade behind each reduced leaf, indexed by reduced [`LeafId`].
    pub leaf_clades: Vec<Clade>,
    /// Original edge behind each reduced edge, indexed by reduced [`EdgeId`].
    pub edge_map: Vec<EdgeId>,
    /// The reduced edge corresponding to the collapse target.
    pub target_edge: EdgeId,
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::linalg::Cholesky;

    /// Quartet (((a,b),(c,d)) unrooted) with deterministic edge order:
    /// 0: a, 1: b, 2: c, 3: d leaf edges, 4: internal.
    pub(crate) fn quartet() -> PhyloTree {
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
        b.build().unwrap()
    }

    /// Complete binary tree on 2^depth leaves labeled A, B, C, ...
    pub(crate) fn complete_binary(depth: u32) -> PhyloTree {
        assert!(depth >= 2);
        let n = 1usize << depth;
        let mut b = TreeBuilder::new();
        let mut level: Vec<NodeId> = (0..n)
            .map(|i| b.add_leaf(((b'A' + i as u8) as char).to_string()))
            .collect();
        while level.len() > 2 {
            let mut next = Vec::new();
            for pair in level.chunks(2) {
                let parent = b.add_internal();
                b.add_edge(pair[0], parent);
                b.add_edge(pair[1], parent);
                next.push(parent);
            }
            level = next;
        }
        b.add_edge(level[0], level[1]);
        b.build().unwrap()
    }

    #[test]
    fn quartet_paths() {
        let t = quartet();
        let a = t.leaf_id("a").unwrap();
        let d = t.leaf_id("d").unwrap();
        let path = t.path_edges(a, d).unwrap();
        assert_eq!(path.len(), 3);
        assert_eq!(path, vec![0, 4, 3]);
    }

    #[test]
    fn eight_leaf_opposite_corners_are_five_edges_apart() {
        // Unrooted: leaf, cherry vertex, quarter vertex, the central edge,
        // then back down — five edges in total.
        let t = complete_binary(3);
        let a = t.leaf_id("A").unwrap();
        let h = t.leaf_id("H").unwrap();
        assert_eq!(t.path_edges(a, h).unwrap().len(), 5);
    }

    #[test]
    fn rejects_duplicate_labels() {
        let mut b = TreeBuilder::new();
        let x = b.add_leaf("a");
        let y = b.add_leaf("a");
        b.add_edge(x, y);
        assert!(matches!(b.build(), Err(TreeError::DuplicateLeafLabel(_))));
    }

    #[test]
    fn rejects_disconnected_and_cyclic_structures() {
        let mut b = TreeBuilder::new();
        let n1 = b.add_leaf("a");
        let n2 = b.add_leaf("b");
        let n3 = b.add_leaf("c");
        let n4 = b.add_leaf("d");
        b.add_edge(n1, n2);
        b.add_edge(n3, n4);
        b.add_edge(n1, n2); // parallel edge => cycle
        assert!(b.build().is_err());
    }

    #[test]
    fn incidence_matrix_rows_match_paths() {
        let t = quartet();
        let m = t.incidence_matrix::<f64>().unwrap();
        assert_eq!((m.rows(), m.cols()), (6, 5));
        // Row of pair (a, d): leaf edges 0 and 3 plus internal edge 4.
        let row_ad = 2; // pairs in order: ab, ac, ad, ...
        for e in 0..5 {
            let expect = if [0usize, 3, 4].contains(&e) { 1.0 } else { 0.0 };
            assert_eq!(m.get(row_ad, e), expect);
        }
    }

    #[test]
    fn incidence_matrix_has_full_column_rank() {
        // 10 leaves => 45 x 17; S^t S factors iff the columns are independent.
        let mut b = TreeBuilder::new();
        let leaves: Vec<NodeId> = (0..10).map(|i| b.add_leaf(format!("t{i}"))).collect();
        let mut spine = Vec::new();
        for _ in 0..8 {
            spine.push(b.add_internal());
        }
        b.add_edge(leaves[0], spine[0]);
        b.add_edge(leaves[1], spine[0]);
        for w in 0..7 {
            b.add_edge(spine[w], spine[w + 1]);
        }
        for (i, &leaf) in leaves.iter().enumerate().skip(2).take(7) {
            b.add_edge(leaf, spine[i - 1]);
        }
        b.add_edge(leaves[9], spine[7]);
        let t = b.build().unwrap();
        let s = t.incidence_matrix::<f64>().unwrap();
        assert_eq!((s.rows(), s.cols()), (45, 17));
        let mut gram = Matrix::zeros(17, 17);
        for r in 0..s.rows() {
            for e in 0..17 {
                if s.get(r, e) == 0.0 {
                    continue;
                }
                for f in 0..17 {
                    if s.get(r, f) != 0.0 {
                        gram.add_to(e, f, 1.0);
                    }
                }
            }
        }
        assert!(Cholesky::factor(&gram).is_ok(), "rank must be 17");
    }

    #[test]
    fn evaluate_additive_quartet() {
        let t = quartet();
        let unit = TreeAdditiveMap::uniform(&t, 1.0f64);
        let d = t.evaluate_additive(&unit);
        let (a, b, c) = (
            t.leaf_id("a").unwrap(),
            t.leaf_id("b").unwrap(),
            t.leaf_id("c").unwrap(),
        );
        assert_eq!(d.get(a, b), 2.0);
        assert_eq!(d.get(a, c), 3.0);

        // Negative internal length is allowed and flows through the sums.
        let mut m = TreeAdditiveMap::uniform(&t, 1.0f64);
        m.set(4, -0.5);
        let d = t.evaluate_additive(&m);
        assert_eq!(d.get(a, c), 1.5);
        assert_eq!(d.get(a, b), 2.0);
    }

    #[test]
    fn clades_around_internal_quartet_edge_are_singletons() {
        let t = quartet();
        match t.clades_around_edge(4).unwrap() {
            EdgeContext::Internal { a, b, c, d } => {
                let mut sizes = vec![a.size(), b.size(), c.size(), d.size()];
                sizes.sort_unstable();
                assert_eq!(sizes, vec![1, 1, 1, 1]);
                let mut all: Vec<LeafId> = [a, b, c, d]
                    .iter()
                    .flat_map(|c| c.leaves.clone())
                    .collect();
                all.sort_unstable();
                assert_eq!(all, vec![0, 1, 2, 3]);
            }
            other => panic!("expected internal context, got {other:?}"),
        }
    }

    #[test]
    fn clades_around_central_edge_of_eight_leaves() {
        let t = complete_binary(3);
        let central = t
            .internal_edges()
            .into_iter()
            .find(|&e| {
                let (u, v) = t.edge_endpoints(e);
                let clade = t.clade(e, u).unwrap();
                clade.size() == 4 && !t.is_leaf_node(v)
            })
            .expect("central edge exists");
        match t.clades_around_edge(central).unwrap() {
            EdgeContext::Internal { a, b, c, d } => {
                for clade in [&a, &b, &c, &d] {
                    assert_eq!(clade.size(), 2);
                }
            }
            other => panic!("expected internal context, got {other:?}"),
        }
    }

    #[test]
    fn clades_partition_the_leaf_set() {
        let t = complete_binary(3);
        for e in 0..t.edge_count() {
            let mut all: Vec<LeafId> = match t.clades_around_edge(e).unwrap() {
                EdgeContext::Internal { a, b, c, d } => [a, b, c, d]
                    .iter()
                    .flat_map(|c| c.leaves.clone())
                    .collect(),
                EdgeContext::Leaf { leaf, a, b } => {
                    let mut v = vec![leaf];
                    v.extend(a.leaves);
                    v.extend(b.leaves);
                    v
                }
            };
            all.sort_unstable();
            assert_eq!(all, (0..t.leaf_count()).collect::<Vec<_>>());
        }
    }

    #[test]
    fn collapse_quartet_internal_edge_is_identity() {
        let t = quartet();
        let c = t.collapse_around_edge(4).unwrap();
        assert_eq!(c.tree.leaf_count(), 4);
        assert_eq!(c.tree.edge_count(), 5);
        assert!(c.leaf_clades.iter().all(|cl| cl.size() == 1));
        assert_eq!(c.edge_map[c.target_edge], 4);
    }

    #[test]
    fn collapse_central_edge_of_eight_leaves_keeps_everything() {
        let t = complete_binary(3);
        let central = t
            .internal_edges()
            .into_iter()
            .find(|&e| t.clade(e, t.edge_endpoints(e).0).unwrap().size() == 4)
            .unwrap();
        let c = t.collapse_around_edge(central).unwrap();
        assert_eq!(c.tree.leaf_count(), 8);
        assert_eq!(c.tree.edge_count(), 13);
        assert!(c.leaf_clades.iter().all(|cl| cl.size() == 1));
    }

    #[test]
    fn collapse_central_edge_of_sixteen_leaves_gives_two_leaf_clades() {
        let t = complete_binary(4);
        let central = t
            .internal_edges()
            .into_iter()
            .find(|&e| t.clade(e, t.edge_endpoints(e).0).unwrap().size() == 8)
            .unwrap();
        let c = t.collapse_around_edge(central).unwrap();
        assert_eq!(c.tree.leaf_count(), 8);
        assert_eq!(c.tree.edge_count(), 13);
        assert!(c.leaf_clades.iter().all(|cl| cl.size() == 2));
        // The reduced leaves partition the original leaf set.
        let mut all: Vec<LeafId> = c
            .leaf_clades
            .iter()
            .flat_map(|cl| cl.leaves.clone())
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn collapse_leaf_edge_has_at_most_five_leaves() {
        let t = complete_binary(3);
        let leaf_edge = t.leaf_edge(t.leaf_id("A").unwrap());
        let c = t.collapse_around_edge(leaf_edge).unwrap();
        assert!(c.tree.leaf_count() <= 5);
        assert_eq!(c.edge_map[c.target_edge], leaf_edge);
    }

    #[test]
    fn induced_quartet_split_matches_structure() {
        let t = complete_binary(3);
        let (a, b, c, d) = (
            t.leaf_id("A").unwrap(),
            t.leaf_id("B").unwrap(),
            t.leaf_id("C").unwrap(),
            t.leaf_id("D").unwrap(),
        );
        assert_eq!(
            t.induced_quartet_split(a, b, c, d).unwrap(),
            QuartetSplit::FirstSecond
        );
        assert_eq!(
            t.induced_quartet_split(a, c, b, d).unwrap(),
            QuartetSplit::FirstThird
        );
        assert_eq!(
            t.induced_quartet_split(a, c, d, b).unwrap(),
            QuartetSplit::FirstFourth
        );
    }
}
