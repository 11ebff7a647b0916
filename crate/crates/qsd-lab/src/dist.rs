//! Probability vectors on the transient states, stored sparsely.

use std::collections::BTreeMap;

use crate::error::{QsdError, Result};

/// Mass/validation tolerance used throughout the crate.
pub const MASS_TOL: f64 = 1e-12;
/// Entries below this are pruned after renormalization. Kept far below any
/// numerical tolerance so pruning never affects reported distances; it only
/// guards against denormal underflow in long conditioned evolutions.
pub const PRUNE_EPS: f64 = 1e-280;

/// A probability measure on `S = {1, 2, ...}` with sparse storage.
///
/// Invariants: all weights are nonnegative and the total mass is 1 within
/// [`MASS_TOL`]. The map is ordered by state, so iteration order (and any
/// serialized form) is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    weights: BTreeMap<usize, f64>,
}

impl Distribution {
    /// Point mass at `x`.
    pub fn delta(x: usize) -> Self {
        let mut weights = BTreeMap::new();
        weights.insert(x, 1.0);
        Self { weights }
    }

    /// Validates nonnegativity and unit mass.
    pub fn from_weights(weights: BTreeMap<usize, f64>) -> Result<Self> {
        for (&x, &w) in &weights {
            if x == 0 {
                return Err(QsdError::InvalidDistribution(
                    "state 0 is the absorbing state and cannot carry mass".into(),
                ));
            }
            if !(w >= 0.0) {
                return Err(QsdError::InvalidDistribution(format!(
                    "negative weight {w} at state {x}"
                )));
            }
        }
        let total: f64 = weights.values().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(QsdError::InvalidDistribution(format!(
                "total mass {total} differs from 1 by more than {MASS_TOL}"
            )));
        }
        Ok(Self { weights })
    }

    /// Normalizes nonnegative weights to total mass one, pruning entries below
    /// [`PRUNE_EPS`] afterwards.
    pub fn normalized(weights: BTreeMap<usize, f64>) -> Result<Self> {
        let total: f64 = weights.values().sum();
        if !(total > 0.0) {
            return Err(QsdError::InvalidDistribution(
                "cannot normalize a measure with nonpositive total mass".into(),
            ));
        }
        let mut out = BTreeMap::new();
        for (x, w) in weights {
            if x == 0 {
                return Err(QsdError::InvalidDistribution(
                    "state 0 cannot carry mass".into(),
                ));
            }
            if !(w >= 0.0) {
                return Err(QsdError::InvalidDistribution(format!(
                    "negative weight {w} at state {x}"
                )));
            }
            let v = w / total;
            if v > PRUNE_EPS {
                out.insert(x, v);
            }
        }
        // Pruning removes at most support-size * PRUNE_EPS of mass; fold the
        // deficit back so the invariant holds exactly.
        let t: f64 = out.values().sum();
        for v in out.values_mut() {
            *v /= t;
        }
        Ok(Self { weights: out })
    }

    pub fn get(&self, x: usize) -> f64 {
        self.weights.get(&x).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.weights.iter().map(|(&x, &w)| (x, w))
    }

    pub fn support_size(&self) -> usize {
        self.weights.len()
    }

    pub fn min_support(&self) -> Option<usize> {
        self.weights.keys().next().copied()
    }

    pub fn max_support(&self) -> Option<usize> {
        self.weights.keys().next_back().copied()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.values().sum()
    }

    /// Total-variation distance, `(1/2) * l1`.
    pub fn tv_distance(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for (&x, &w) in &self.weights {
            acc += (w - other.get(x)).abs();
        }
        for (&x, &w) in &other.weights {
            if !self.weights.contains_key(&x) {
                acc += w;
            }
        }
        acc / 2.0
    }

    /// Mass of `{ y : y >= x }` in the total order.
    pub fn tail_mass(&self, x: usize) -> f64 {
        self.weights.range(x..).map(|(_, &w)| w).sum()
    }

    /// Mass of an arbitrary set of states.
    pub fn mass_of<F: Fn(usize) -> bool>(&self, pred: F) -> f64 {
        self.weights
            .iter()
            .filter(|(&x, _)| pred(x))
            .map(|(_, &w)| w)
            .sum()
    }

    /// Smallest `x` with cumulative mass `>= u` (the left-continuous quantile,
    /// total order). `u` is clamped to `[0, 1]`.
    pub fn quantile(&self, u: f64) -> usize {
        let u = u.clamp(0.0, 1.0);
        let mut cum = 0.0;
        let mut last = 0;
        for (&x, &w) in &self.weights {
            cum += w;
            last = x;
            if cum >= u {
                return x;
            }
        }
        last
    }

    /// Conditional distribution given `pred`; `None` if the mass is zero.
    pub fn conditioned_on<F: Fn(usize) -> bool>(&self, pred: F) -> Option<Self> {
        let sel: BTreeMap<usize, f64> = self
            .weights
            .iter()
            .filter(|(&x, _)| pred(x))
            .map(|(&x, &w)| (x, w))
            .collect();
        Distribution::normalized(sel).ok()
    }

    /// Expectation of `f` under the distribution.
    pub fn expect<F: Fn(usize) -> f64>(&self, f: F) -> f64 {
        self.weights.iter().map(|(&x, &w)| w * f(x)).sum()
    }
}
