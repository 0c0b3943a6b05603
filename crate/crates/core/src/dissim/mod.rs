//! Dissimilarity maps over leaf pairs and their classification checks.
//!
//! A [`DissimilarityMap`] stores one value per unordered leaf pair and is used
//! both for observed distances and for variance models. Symmetry and a zero
//! diagonal hold by construction (only the upper triangle is stored).

mod fourpoint;
mod semimult;
mod variance;

pub use fourpoint::{
    check_four_point, check_four_point_with, quartet_topology, FourPointOptions, FourPointReport,
    QuartetFinding, QuartetSplit,
};
pub use semimult::{
    check_semi_multiplicative, semi_mult_deviation, SemiMultFinding, SemiMultReport, XiRatio,
};
pub use variance::{build_variance, VarianceModel};

use crate::error::WlsError;
use crate::scalar::Scalar;

/// Number of unordered pairs over `n` items.
pub fn pair_count(n: usize) -> usize {
    n * (n - 1) / 2
}

/// Packed index of the unordered pair `{i, j}` among `n` items, ordered
/// lexicographically: (0,1), (0,2), ..., (1,2), ...
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i != j && i < n && j < n);
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    lo * n - lo * (lo + 1) / 2 + (hi - lo - 1)
}

/// A symmetric map over unordered leaf pairs with zero diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct DissimilarityMap<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DissimilarityMap<T> {
    pub fn zeros(n: usize) -> Self {
        DissimilarityMap {
            n,
            data: vec![T::zero(); pair_count(n)],
        }
    }

    /// Builds a map by evaluating `f` on every pair `i < j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut map = Self::zeros(n);
        for i in 0..n {
            for j in (i + 1)..n {
                map.set(i, j, f(i, j));
            }
        }
        map
    }

    /// Number of leaves the map is defined over.
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        if i == j {
            return T::zero();
        }
        self.data[pair_index(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: T) {
        assert!(i != j, "diagonal entries are fixed at zero");
        self.data[pair_index(self.n, i, j)] = value;
    }

    /// Iterates pairs in lexicographic order `(i, j, value)` with `i < j`.
    pub fn iter_pairs(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let n = self.n;
        (0..n)
            .flat_map(move |i| ((i + 1)..n).map(move |j| (i, j)))
            .zip(self.data.iter())
            .map(|((i, j), v)| (i, j, *v))
    }

    /// Packed upper-triangle values in pair-index order.
    pub fn values(&self) -> &[T] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Errors when any entry is not finite.
    pub fn validate_finite(&self) -> Result<(), WlsError> {
        for (i, j, v) in self.iter_pairs() {
            if !v.is_finite() {
                return Err(WlsError::InvalidModel(format!(
                    "non-finite entry at pair ({i}, {j})"
                )));
            }
        }
        Ok(())
    }

    /// Errors unless every off-diagonal entry is strictly positive and finite;
    /// required of variance maps.
    pub fn validate_positive(&self) -> Result<(), WlsError> {
        for (i, j, v) in self.iter_pairs() {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(WlsError::NonPositiveVariance {
                    i,
                    j,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }
}

/// Jukes-Cantor distance transform: maps an observed mismatch fraction
/// `y` in `[0, 3/4)` to an evolutionary distance.
pub fn jc_distance<T: Scalar>(y: T) -> Result<T, WlsError> {
    let three_quarters = T::cast(0.75);
    if y < T::zero() || y >= three_quarters {
        return Err(WlsError::OutOfDomain {
            what: "jc_distance (mismatch fraction must lie in [0, 3/4))",
            value: y.to_f64().unwrap_or(f64::NAN),
        });
    }
    let four_thirds = T::cast(4.0 / 3.0);
    Ok(-three_quarters * (T::one() - four_thirds * y).ln())
}

/// Large-sample variance of the Jukes-Cantor distance estimate at true
/// distance `delta` for sequences of length `seq_len`.
pub fn jc_variance<T: Scalar>(delta: T, seq_len: usize) -> Result<T, WlsError> {
    if seq_len == 0 {
        return Err(WlsError::InvalidModel(
            "sequence length must be positive".into(),
        ));
    }
    if delta < T::zero() || !delta.is_finite() {
        return Err(WlsError::OutOfDomain {
            what: "jc_variance (distance must be nonnegative)",
            value: delta.to_f64().unwrap_or(f64::NAN),
        });
    }
    let third = T::cast(1.0 / 3.0);
    let e8 = (T::cast(8.0) * third * delta).exp();
    let e4 = (T::cast(4.0) * third * delta).exp();
    let front = T::cast(3.0) / (T::cast(16.0) * T::cast_usize(seq_len));
    Ok(front * (T::cast(3.0) * e8 + T::cast(2.0) * e4 - T::cast(3.0)))
}
