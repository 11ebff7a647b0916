//! Finite truncations of a countable partially ordered state space.
//!
//! States are the integers `1..=n`. State `0` is the absorbing cemetery and is
//! never part of the space itself. The order is either the usual total order
//! on integers (the fast path used by every chain in this crate's
//! applications) or an explicit partial order given by its covering pairs.

use std::sync::Arc;

use crate::error::{QsdError, Result};

/// Cap on explicit posets; beyond this upper-set enumeration is refused.
pub const POSET_CAP: usize = 20;

#[derive(Debug, Clone)]
pub enum OrderKind {
    /// `x <= y` as integers.
    Total,
    /// Explicit partial order; reflexive-transitive closure stored as bitmasks.
    Explicit(Arc<ExplicitOrder>),
}

#[derive(Debug)]
pub struct ExplicitOrder {
    n: usize,
    /// `up[x-1]` has bit `y-1` set iff `x <= y`.
    up: Vec<u32>,
}

impl ExplicitOrder {
    /// Builds the reflexive-transitive closure of `pairs` and validates that
    /// the result is antisymmetric and has `1` as its minimal element.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if n == 0 || n > POSET_CAP {
            return Err(QsdError::PosetTooLarge { n, cap: POSET_CAP });
        }
        let mut up = vec![0u32; n];
        for (i, mask) in up.iter_mut().enumerate() {
            *mask |= 1 << i; // reflexive
        }
        for &(x, y) in pairs {
            if x == 0 || y == 0 || x > n || y > n {
                return Err(QsdError::InvalidChainSpec(format!(
                    "order pair ({x},{y}) outside 1..={n}"
                )));
            }
            up[x - 1] |= 1 << (y - 1);
        }
        // Warshall closure.
        for k in 0..n {
            for x in 0..n {
                if up[x] >> k & 1 == 1 {
                    up[x] |= up[k];
                }
            }
        }
        for x in 0..n {
            for y in (x + 1)..n {
                if up[x] >> y & 1 == 1 && up[y] >> x & 1 == 1 {
                    return Err(QsdError::InvalidChainSpec(format!(
                        "order is not antisymmetric: {} <= {} and {} <= {}",
                        x + 1,
                        y + 1,
                        y + 1,
                        x + 1
                    )));
                }
            }
        }
        if up[0].count_ones() as usize != n {
            return Err(QsdError::InvalidChainSpec(
                "state 1 is not a minimal element (1 <= x must hold for all x)".into(),
            ));
        }
        Ok(Self { n, up })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn leq(&self, x: usize, y: usize) -> bool {
        self.up[x - 1] >> (y - 1) & 1 == 1
    }

    /// Bitmask of `{ y : x <= y }`.
    pub fn up_mask(&self, x: usize) -> u32 {
        self.up[x - 1]
    }

    /// All strict related pairs `(x, y)` with `x < y` in the order; parsing
    /// them back rebuilds the same closure.
    pub fn related_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for x in 1..=self.n {
            for y in 1..=self.n {
                if x != y && self.leq(x, y) {
                    out.push((x, y));
                }
            }
        }
        out
    }
}

/// A finite state space `{1, .., n}` with a partial order and minimal state 1.
#[derive(Debug, Clone)]
pub struct StateSpace {
    n: usize,
    order: OrderKind,
}

impl StateSpace {
    /// Totally ordered truncation `{1..=n}` of the naturals.
    pub fn total(n: usize) -> Self {
        Self {
            n,
            order: OrderKind::Total,
        }
    }

    pub fn explicit(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let order = ExplicitOrder::from_pairs(n, pairs)?;
        Ok(Self {
            n,
            order: OrderKind::Explicit(Arc::new(order)),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn minimal(&self) -> usize {
        1
    }

    pub fn is_total(&self) -> bool {
        matches!(self.order, OrderKind::Total)
    }

    pub fn order(&self) -> &OrderKind {
        &self.order
    }

    pub fn leq(&self, x: usize, y: usize) -> bool {
        match &self.order {
            OrderKind::Total => x <= y,
            OrderKind::Explicit(ord) => ord.leq(x, y),
        }
    }

    pub fn states(&self) -> impl Iterator<Item = usize> {
        1..=self.n
    }
}
