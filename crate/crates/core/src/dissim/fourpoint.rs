//! Weak four-point condition: a dissimilarity map is tree-additive (for some
//! tree and some real, possibly negative, edge values) exactly when for every
//! quartet two of the three pair-sum combinations agree.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use super::DissimilarityMap;
use crate::scalar::Scalar;

/// Default seed for quartet sampling above the exhaustive cap.
const SAMPLE_SEED: u64 = 0x0f0c_ced4;

/// Quartet topology relative to the order the four leaves were given in:
/// which of the other three leaves sits on the same side as the first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuartetSplit {
    /// First and second leaf on one side, third and fourth on the other.
    FirstSecond,
    /// First and third together.
    FirstThird,
    /// First and fourth together.
    FirstFourth,
    /// All three pair sums agree within tolerance (star-like quartet).
    Unresolved,
}

/// A checked quartet together with its violation and inferred split.
#[derive(Clone, Debug)]
pub struct QuartetFinding<T> {
    /// Leaf indices in increasing order.
    pub leaves: [usize; 4],
    /// Smallest absolute difference between the two sums complementary to a
    /// pairing (zero for exactly additive maps).
    pub violation: T,
    /// `violation` normalized by the mean magnitude of the three pair sums.
    pub relative_violation: T,
    /// Split inferred at the check tolerance.
    pub split: QuartetSplit,
}

/// Outcome of [`check_four_point`].
#[derive(Clone, Debug)]
pub struct FourPointReport<T> {
    pub pass: bool,
    pub tolerance: T,
    /// Number of quartets evaluated.
    pub quartets_checked: usize,
    /// `Some(count)` when the map was too large for exhaustive checking and
    /// quartets were sampled deterministically instead.
    pub sampled: Option<usize>,
    /// Worst quartet by relative violation, if any quartet was evaluated.
    pub worst: Option<QuartetFinding<T>>,
    /// Offending quartets above the tolerance, worst first (capped).
    pub offenders: Vec<QuartetFinding<T>>,
}

/// Knobs for [`check_four_point_with`].
#[derive(Clone, Debug)]
pub struct FourPointOptions<T> {
    pub tolerance: T,
    /// Largest leaf count for which all quartets are enumerated.
    pub exhaustive_cap: usize,
    /// Seed for sampling when the cap is exceeded.
    pub sample_seed: u64,
    /// Maximum number of offenders retained in the report.
    pub max_offenders: usize,
}

impl<T: Scalar> Default for FourPointOptions<T> {
    fn default() -> Self {
        FourPointOptions {
            tolerance: T::cast(1e-9),
            exhaustive_cap: 25,
            sample_seed: SAMPLE_SEED,
            max_offenders: 16,
        }
    }
}

fn evaluate_quartet<T: Scalar>(
    d: &DissimilarityMap<T>,
    q: [usize; 4],
    tol: T,
) -> QuartetFinding<T> {
    let [i, j, k, l] = q;
    // Sums indexed by the pairing they correspond to.
    let sums = [
        d.get(i, j) + d.get(k, l),
        d.get(i, k) + d.get(j, l),
        d.get(i, l) + d.get(j, k),
    ];
    let scale = (sums[0].abs() + sums[1].abs() + sums[2].abs()) / T::cast(3.0);
    let rel = |x: T| if scale > T::zero() { x / scale } else { T::zero() };

    // For each candidate pairing the two complementary sums must agree; the
    // violation is the best such residual over the three pairings.
    let residuals = [
        (sums[1] - sums[2]).abs(),
        (sums[0] - sums[2]).abs(),
        (sums[0] - sums[1]).abs(),
    ];
    let violation = residuals[0].min(residuals[1]).min(residuals[2]);

    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sums[a].partial_cmp(&sums[b]).expect("finite sums"));
    let [lo, mid, hi] = order;
    let split = if rel(sums[hi] - sums[lo]) <= tol {
        QuartetSplit::Unresolved
    } else if rel(sums[hi] - sums[mid]) <= tol && rel(sums[mid] - sums[lo]) > tol {
        match lo {
            0 => QuartetSplit::FirstSecond,
            1 => QuartetSplit::FirstThird,
            _ => QuartetSplit::FirstFourth,
        }
    } else {
        QuartetSplit::Unresolved
    };

    QuartetFinding {
        leaves: q,
        violation,
        relative_violation: rel(violation),
        split,
    }
}

/// Infers the split of four distinct leaves: the pairing whose sum is
/// strictly below the other two (which must agree within `tol`), or
/// [`QuartetSplit::Unresolved`] when the sums do not separate.
pub fn quartet_topology<T: Scalar>(
    d: &DissimilarityMap<T>,
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    tol: T,
) -> QuartetSplit {
    assert!(
        i != j && i != k && i != l && j != k && j != l && k != l,
        "quartet leaves must be distinct"
    );
    evaluate_quartet(d, [i, j, k, l], tol).split
}

/// Checks the weak four-point condition over all (or, above the cap, a
/// deterministic sample of) quartets. See [`FourPointOptions`] for defaults.
pub fn check_four_point<T: Scalar>(d: &DissimilarityMap<T>, tolerance: T) -> FourPointReport<T> {
    check_four_point_with(
        d,
        &FourPointOptions {
            tolerance,
            ..FourPointOptions::default()
        },
    )
}

/// [`check_four_point`] with explicit options.
pub fn check_four_point_with<T: Scalar>(
    d: &DissimilarityMap<T>,
    opts: &FourPointOptions<T>,
) -> FourPointReport<T> {
    let n = d.n();
    let mut sampled = None;
    let quartets: Vec<[usize; 4]> = if n <= opts.exhaustive_cap {
        let mut qs = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    for l in (k + 1)..n {
                        qs.push([i, j, k, l]);
                    }
                }
            }
        }
        qs
    } else {
        let cap = opts.exhaustive_cap;
        let count = cap * (cap - 1) * (cap - 2) * (cap - 3) / 24;
        sampled = Some(count);
        let mut rng = StdRng::seed_from_u64(opts.sample_seed);
        (0..count)
            .map(|_| {
                let mut q = [0usize; 4];
                let mut filled = 0;
                while filled < 4 {
                    let cand = rng.random_range(0..n);
                    if !q[..filled].contains(&cand) {
                        q[filled] = cand;
                        filled += 1;
                    }
                }
                q.sort_unstable();
                q
            })
            .collect()
    };

    let findings: Vec<QuartetFinding<T>> = quartets
        .par_iter()
        .map(|&q| evaluate_quartet(d, q, opts.tolerance))
        .collect();

    let worst = findings
        .iter()
        .max_by(|a, b| {
            a.relative_violation
                .partial_cmp(&b.relative_violation)
                .expect("finite violations")
                .then_with(|| b.leaves.cmp(&a.leaves))
        })
        .cloned();
    let mut offenders: Vec<QuartetFinding<T>> = findings
        .into_iter()
        .filter(|f| f.relative_violation > opts.tolerance)
        .collect();
    offenders.sort_by(|a, b| {
        b.relative_violation
            .partial_cmp(&a.relative_violation)
            .expect("finite violations")
            .then_with(|| a.leaves.cmp(&b.leaves))
    });
    offenders.truncate(opts.max_offenders);

    FourPointReport {
        pass: offenders.is_empty(),
        tolerance: opts.tolerance,
        quartets_checked: quartets.len(),
        sampled,
        worst,
        offenders,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Additive quartet distances: split ab|cd, all edges 1.
    fn additive_quartet() -> DissimilarityMap<f64> {
        let mut d = DissimilarityMap::zeros(4);
        d.set(0, 1, 2.0);
        d.set(2, 3, 2.0);
        for (i, j) in [(0, 2), (0, 3), (1, 2), (1, 3)] {
            d.set(i, j, 3.0);
        }
        d
    }

    #[test]
    fn additive_quartet_passes_and_resolves() {
        let d = additive_quartet();
        let report = check_four_point(&d, 1e-9);
        assert!(report.pass);
        assert_eq!(report.quartets_checked, 1);
        assert_eq!(
            quartet_topology(&d, 0, 1, 2, 3, 1e-9),
            QuartetSplit::FirstSecond
        );
        assert_eq!(
            quartet_topology(&d, 0, 2, 1, 3, 1e-9),
            QuartetSplit::FirstThird
        );
    }

    #[test]
    fn sums_5_6_7_fail_with_violation_one() {
        // Pair sums 5, 6 and 7: no two agree, worst-case violation 1.
        let mut d = DissimilarityMap::zeros(4);
        d.set(0, 1, 2.0);
        d.set(2, 3, 3.0); // s(01|23) = 5
        d.set(0, 2, 3.0);
        d.set(1, 3, 3.0); // s(02|13) = 6
        d.set(0, 3, 3.0);
        d.set(1, 2, 4.0); // s(03|12) = 7
        let report = check_four_point(&d, 1e-9);
        assert!(!report.pass);
        let worst = report.worst.unwrap();
        assert_eq!(worst.violation, 1.0);
        assert_eq!(report.offenders.len(), 1);
    }

    #[test]
    fn near_star_map_is_unresolved() {
        let d = DissimilarityMap::from_fn(4, |_, _| 1.0f64);
        assert_eq!(
            quartet_topology(&d, 0, 1, 2, 3, 1e-9),
            QuartetSplit::Unresolved
        );
    }

    #[test]
    fn sampling_kicks_in_above_cap_and_is_deterministic() {
        let d = DissimilarityMap::from_fn(30, |i, j| (i + j) as f64);
        let opts = FourPointOptions {
            exhaustive_cap: 10,
            ..FourPointOptions::default()
        };
        let r1 = check_four_point_with(&d, &opts);
        let r2 = check_four_point_with(&d, &opts);
        assert_eq!(r1.sampled, Some(210));
        assert_eq!(r1.quartets_checked, 210);
        assert_eq!(
            r1.worst.as_ref().map(|w| w.leaves),
            r2.worst.as_ref().map(|w| w.leaves)
        );
    }
}
