//! Substochastic transition kernels absorbed at the cemetery state 0.
//!
//! Only rows for the transient states `1..=n` are stored; the absorbing
//! convention `Q(0,0) = 1` is implicit. Each row keeps its on-`S` transitions
//! sparsely plus the absorption mass `Q(x,0)`.

use std::collections::BTreeMap;

use crate::dist::{Distribution, MASS_TOL};
use crate::error::{QsdError, Result};
use crate::space::StateSpace;

/// What happens to mass that would leave a finite truncation `{1..=N}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationMode {
    /// Mass that would jump above `N` is sent to the absorbing state.
    OverflowToAbsorption,
    /// Mass that would jump above `N` stays put (added to the holding term).
    OverflowToHold,
}

#[derive(Debug, Clone, Default)]
pub struct KernelRow {
    /// On-`S` targets, sorted by state, strictly positive weights.
    targets: Vec<(usize, f64)>,
    /// `Q(x, 0)`.
    absorb: f64,
}

impl KernelRow {
    pub fn targets(&self) -> &[(usize, f64)] {
        &self.targets
    }

    pub fn absorb(&self) -> f64 {
        self.absorb
    }

    pub fn get(&self, y: usize) -> f64 {
        self.targets
            .iter()
            .find(|&&(t, _)| t == y)
            .map(|&(_, w)| w)
            .unwrap_or(0.0)
    }

    fn sum(&self) -> f64 {
        self.absorb + self.targets.iter().map(|&(_, w)| w).sum::<f64>()
    }
}

/// A violation reported by [`AbsorbedKernel::validate`]. Violations are data,
/// not failures; constructing an invalid kernel directly is possible through
/// deserialization and the CLI surfaces the report.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelViolation {
    RowMass { state: usize, mass: f64 },
    CertainAbsorption { state: usize },
    NegativeEntry { state: usize, target: usize, value: f64 },
    TargetOutOfRange { state: usize, target: usize },
}

impl std::fmt::Display for KernelViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelViolation::RowMass { state, mass } => {
                write!(f, "row {state} sums to {mass}, expected 1")
            }
            KernelViolation::CertainAbsorption { state } => {
                write!(f, "Q(x,0)<1 fails at x={state}")
            }
            KernelViolation::NegativeEntry {
                state,
                target,
                value,
            } => write!(f, "negative entry Q({state},{target})={value}"),
            KernelViolation::TargetOutOfRange { state, target } => {
                write!(f, "row {state} targets state {target} outside the space")
            }
        }
    }
}

/// Transition matrix of a chain on `S ∪ {0}` absorbed at 0.
#[derive(Debug, Clone)]
pub struct AbsorbedKernel {
    space: StateSpace,
    rows: Vec<KernelRow>,
    truncation: TruncationMode,
}

impl AbsorbedKernel {
    /// Builds a kernel from per-state rows given as `(target, weight)` lists,
    /// where target 0 denotes absorption. Targets above `space.n()` are
    /// redirected according to `truncation`.
    pub fn from_rows(
        space: StateSpace,
        raw_rows: Vec<Vec<(usize, f64)>>,
        truncation: TruncationMode,
    ) -> Result<Self> {
        let n = space.n();
        if raw_rows.len() != n {
            return Err(QsdError::InvalidChainSpec(format!(
                "expected {n} rows, got {}",
                raw_rows.len()
            )));
        }
        let mut rows = Vec::with_capacity(n);
        for (i, raw) in raw_rows.into_iter().enumerate() {
            let state = i + 1;
            let mut map: BTreeMap<usize, f64> = BTreeMap::new();
            let mut absorb = 0.0;
            for (target, w) in raw {
                if !(w >= 0.0) {
                    return Err(QsdError::InvalidChainSpec(format!(
                        "negative entry Q({state},{target})={w}"
                    )));
                }
                if w == 0.0 {
                    continue;
                }
                let target = if target > n {
                    match truncation {
                        TruncationMode::OverflowToAbsorption => 0,
                        TruncationMode::OverflowToHold => state,
                    }
                } else {
                    target
                };
                if target == 0 {
                    absorb += w;
                } else {
                    *map.entry(target).or_insert(0.0) += w;
                }
            }
            rows.push(KernelRow {
                targets: map.into_iter().collect(),
                absorb,
            });
        }
        Ok(Self {
            space,
            rows,
            truncation,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn n_states(&self) -> usize {
        self.space.n()
    }

    pub fn truncation(&self) -> TruncationMode {
        self.truncation
    }

    pub fn row(&self, x: usize) -> &KernelRow {
        &self.rows[x - 1]
    }

    /// `Q(x, y)` with `y = 0` meaning absorption.
    pub fn transition(&self, x: usize, y: usize) -> f64 {
        if y == 0 {
            self.rows[x - 1].absorb
        } else {
            self.rows[x - 1].get(y)
        }
    }

    /// Two-step transition `Q²(x, z)` restricted to paths through `S`.
    pub fn two_step(&self, x: usize, z: usize) -> f64 {
        self.rows[x - 1]
            .targets
            .iter()
            .map(|&(w, qxw)| qxw * self.transition(w, z))
            .sum()
    }

    /// Checks the kernel invariants; the empty list means all hold.
    pub fn validate(&self) -> Vec<KernelViolation> {
        let mut out = Vec::new();
        let n = self.n_states();
        for (i, row) in self.rows.iter().enumerate() {
            let state = i + 1;
            for &(t, w) in &row.targets {
                if t > n {
                    out.push(KernelViolation::TargetOutOfRange { state, target: t });
                }
                if !(w >= 0.0) {
                    out.push(KernelViolation::NegativeEntry {
                        state,
                        target: t,
                        value: w,
                    });
                }
            }
            let mass = row.sum();
            if (mass - 1.0).abs() > MASS_TOL {
                out.push(KernelViolation::RowMass { state, mass });
            }
            if row.absorb >= 1.0 - MASS_TOL && row.targets.is_empty() {
                out.push(KernelViolation::CertainAbsorption { state });
            }
        }
        out
    }

    /// Pushes `nu` one step forward through the kernel without conditioning.
    /// Returns the (sub-probability) on-`S` image and the absorbed mass.
    pub fn push_forward(&self, nu: &Distribution) -> (BTreeMap<usize, f64>, f64) {
        let mut on_s: BTreeMap<usize, f64> = BTreeMap::new();
        let mut absorbed = 0.0;
        for (x, w) in nu.iter() {
            let row = &self.rows[x - 1];
            absorbed += w * row.absorb;
            for &(y, q) in &row.targets {
                *on_s.entry(y).or_insert(0.0) += w * q;
            }
        }
        (on_s, absorbed)
    }

    /// True when every state holds with positive probability and reaches its
    /// nearest neighbors (within the truncation). This is the analytic
    /// shortcut for trajectory irreducibility of birth-and-death chains.
    pub fn has_positive_hold_and_neighbors(&self) -> bool {
        let n = self.n_states();
        (1..=n).all(|x| {
            self.transition(x, x) > 0.0
                && (x == 1 || self.transition(x, x - 1) > 0.0)
                && (x == n || self.transition(x, x + 1) > 0.0)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_kernel() -> AbsorbedKernel {
        // 2-state chain: 1 -> {0: 0.5, 2: 0.5}, 2 -> {1: 0.3, 2: 0.7}
        AbsorbedKernel::from_rows(
            StateSpace::total(2),
            vec![vec![(0, 0.5), (2, 0.5)], vec![(1, 0.3), (2, 0.7)]],
            TruncationMode::OverflowToAbsorption,
        )
        .unwrap()
    }

    #[test]
    fn valid_kernel_has_no_violations() {
        assert!(tiny_kernel().validate().is_empty());
    }

    #[test]
    fn flags_certain_absorption() {
        let k = AbsorbedKernel::from_rows(
            StateSpace::total(3),
            vec![
                vec![(0, 0.5), (2, 0.5)],
                vec![(1, 0.5), (3, 0.5)],
                vec![(0, 1.0)],
            ],
            TruncationMode::OverflowToAbsorption,
        )
        .unwrap();
        let v = k.validate();
        assert!(v
            .iter()
            .any(|v| matches!(v, KernelViolation::CertainAbsorption { state: 3 })));
        assert!(v.iter().any(|v| v.to_string().contains("x=3")));
    }

    #[test]
    fn flags_mass_deficit() {
        let k = AbsorbedKernel::from_rows(
            StateSpace::total(1),
            vec![vec![(1, 0.9)]],
            TruncationMode::OverflowToHold,
        )
        .unwrap();
        let v = k.validate();
        assert!(matches!(
            v[0],
            KernelViolation::RowMass { state: 1, mass: _ }
        ));
    }

    #[test]
    fn overflow_modes() {
        let rows = vec![vec![(0, 0.3), (2, 0.7)], vec![(1, 0.3), (3, 0.7)]];
        let ka = AbsorbedKernel::from_rows(
            StateSpace::total(2),
            rows.clone(),
            TruncationMode::OverflowToAbsorption,
        )
        .unwrap();
        assert_eq!(ka.transition(2, 0), 0.7);
        let kh =
            AbsorbedKernel::from_rows(StateSpace::total(2), rows, TruncationMode::OverflowToHold)
                .unwrap();
        assert_eq!(kh.transition(2, 2), 0.7);
        assert_eq!(kh.transition(2, 0), 0.0);
    }

    #[test]
    fn two_step_products() {
        let k = tiny_kernel();
        // Q²(1,1) = Q(1,2)Q(2,1) = 0.5*0.3
        assert!((k.two_step(1, 1) - 0.15).abs() < 1e-15);
    }
}
