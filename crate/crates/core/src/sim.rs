//! Synthetic data: random topologies, edge lengths, and noise models.
//!
//! Everything here is `f64`: simulation exists to exercise the estimators,
//! and callers control determinism by passing a seeded RNG.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dissim::{jc_variance, DissimilarityMap};
use crate::error::WlsError;
use crate::tree::{EdgeId, PhyloTree, TreeAdditiveMap, TreeBuilder};

/// Uniformly random unrooted binary topology on `n >= 2` leaves labeled
/// `t0000`, `t0001`, ... Built by attaching each new leaf to a uniformly
/// chosen existing edge.
pub fn random_binary_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> PhyloTree {
    assert!(n >= 2, "need at least two leaves");
    let mut b = TreeBuilder::new();
    let leaves: Vec<_> = (0..n).map(|k| b.add_leaf(format!("t{k:04}"))).collect();
    let mut edges = vec![(leaves[0], leaves[1])];
    for &leaf in &leaves[2..] {
        let split = rng.random_range(0..edges.len());
        let (u, v) = edges[split];
        let mid = b.add_internal();
        edges[split] = (u, mid);
        edges.push((mid, v));
        edges.push((mid, leaf));
    }
    for (u, v) in edges {
        b.add_edge(u, v);
    }
    b.build().expect("attachment construction is always a valid tree")
}

/// Independent uniform edge lengths in `[lo, hi)`.
pub fn random_edge_lengths<R: Rng + ?Sized>(
    tree: &PhyloTree,
    lo: f64,
    hi: f64,
    rng: &mut R,
) -> TreeAdditiveMap<f64> {
    let values = (0..tree.edge_count())
        .map(|_| rng.random_range(lo..hi))
        .collect();
    TreeAdditiveMap::new(tree, values).expect("one value per edge")
}

/// Simulated observations: the additive truth, a noisy copy, and the
/// variance map the noise was drawn from.
#[derive(Clone, Debug)]
pub struct SimulatedData {
    pub truth: DissimilarityMap<f64>,
    pub observed: DissimilarityMap<f64>,
    pub variance: DissimilarityMap<f64>,
}

fn add_gaussian<R: Rng + ?Sized>(
    truth: &DissimilarityMap<f64>,
    variance: &DissimilarityMap<f64>,
    rng: &mut R,
) -> Result<DissimilarityMap<f64>, WlsError> {
    let mut observed = truth.clone();
    for (i, j, var) in variance.iter_pairs() {
        let noise = Normal::new(0.0, var.sqrt()).map_err(|_| WlsError::OutOfDomain {
            what: "noise standard deviation",
            value: var,
        })?;
        let x = truth.get(i, j) + noise.sample(rng);
        observed.set(i, j, x);
    }
    Ok(observed)
}

/// Additive distances plus Gaussian noise with constant standard deviation.
pub fn simulate_gauss_const<R: Rng + ?Sized>(
    tree: &PhyloTree,
    lengths: &TreeAdditiveMap<f64>,
    sd: f64,
    rng: &mut R,
) -> Result<SimulatedData, WlsError> {
    if !(sd >= 0.0) {
        return Err(WlsError::OutOfDomain {
            what: "noise standard deviation",
            value: sd,
        });
    }
    let truth = tree.evaluate_additive(lengths);
    let variance = DissimilarityMap::from_fn(tree.leaf_count(), |_, _| sd * sd);
    let observed = add_gaussian(&truth, &variance, rng)?;
    Ok(SimulatedData { truth, observed, variance })
}

/// Additive distances plus Gaussian noise whose per-pair variance is the
/// Jukes–Cantor sampling variance at the true distance for sequences of
/// length `seq_len`. Edge lengths must be nonnegative.
pub fn simulate_gauss_jc<R: Rng + ?Sized>(
    tree: &PhyloTree,
    lengths: &TreeAdditiveMap<f64>,
    seq_len: usize,
    rng: &mut R,
) -> Result<SimulatedData, WlsError> {
    let truth = tree.evaluate_additive(lengths);
    let n = tree.leaf_count();
    let mut variance = DissimilarityMap::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            variance.set(i, j, jc_variance(truth.get(i, j), seq_len)?);
        }
    }
    let observed = add_gaussian(&truth, &variance, rng)?;
    Ok(SimulatedData { truth, observed, variance })
}

/// Skews a variance map across an internal `edge` so it stays
/// semi-multiplicative but stops being a product along tree paths.
///
/// With clades `A`, `B` behind one endpoint and `C`, `D` behind the other,
/// every entry between `B` and `D` is multiplied by `gamma`. On any
/// constrained clade pair the factor is a row or column scaling, so all
/// rank-one conditions survive; the only block that degrades is the one
/// spanned by the two sides of `edge` itself, which semi-multiplicativity
/// exempts.
pub fn skew_semi_multiplicative(
    v: &mut DissimilarityMap<f64>,
    tree: &PhyloTree,
    edge: EdgeId,
    gamma: f64,
) -> Result<(), WlsError> {
    use crate::tree::EdgeContext;
    if gamma <= 0.0 {
        return Err(WlsError::OutOfDomain { what: "skew factor", value: gamma });
    }
    match tree.clades_around_edge(edge)? {
        EdgeContext::Internal { b, d, .. } => {
            for &x in &b.leaves {
                for &y in &d.leaves {
                    v.set(x, y, v.get(x, y) * gamma);
                }
            }
            Ok(())
        }
        EdgeContext::Leaf { .. } => Err(WlsError::InvalidModel(
            "semi-multiplicative skew needs an internal edge".into(),
        )),
    }
}
