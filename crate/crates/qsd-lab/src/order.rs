//! Stochastic dominance and monotone couplings.
//!
//! `nu ≺ nu'` iff `nu(U) <= nu'(U)` for every upper set `U`; on a total order
//! this reduces to pointwise comparison of tail sums. Dominance is equivalent
//! to the existence of a monotone coupling, which the fast path constructs by
//! inverse-CDF (quantile) pairing and the general-poset path by a small
//! feasibility flow. The general path is an oracle for testing, not a hot
//! path: the applications in this crate are all totally ordered.

use std::sync::OnceLock;

use crate::dist::Distribution;
use crate::error::{QsdError, Result};
use crate::space::{OrderKind, StateSpace, POSET_CAP};

/// Absolute tolerance on upper-set masses; distinguishes genuine violations
/// from renormalization noise.
pub const DOMINANCE_TOL: f64 = 1e-12;

/// A state space together with its (lazily enumerated) family of upper sets.
#[derive(Debug)]
pub struct PosetView {
    space: StateSpace,
    upper_sets: OnceLock<Vec<u32>>,
}

impl PosetView {
    pub fn new(space: StateSpace) -> Self {
        Self {
            space,
            upper_sets: OnceLock::new(),
        }
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    /// All upper sets as bitmasks (general posets only, `n <= POSET_CAP`).
    pub fn upper_sets(&self) -> Result<&[u32]> {
        let n = self.space.n();
        if n > POSET_CAP {
            return Err(QsdError::PosetTooLarge { n, cap: POSET_CAP });
        }
        let ord = match self.space.order() {
            OrderKind::Total => None,
            OrderKind::Explicit(ord) => Some(ord.clone()),
        };
        Ok(self.upper_sets.get_or_init(|| match &ord {
            // total order: upper sets are the suffixes {x..n}, plus the empty set
            None => (0..=n)
                .map(|i| (((1u64 << n) - 1) as u32) & !(((1u64 << i) - 1) as u32))
                .collect(),
            Some(ord) => (0u32..(1 << n))
                .filter(|&mask| {
                    (0..n).all(|i| mask >> i & 1 == 0 || ord.up_mask(i + 1) & !mask == 0)
                })
                .collect(),
        }))
    }
}

/// Witness of a dominance failure.
#[derive(Debug, Clone, PartialEq)]
pub enum DominanceWitness {
    /// Total order: tail sums from this state violate the comparison.
    Threshold(usize),
    /// General poset: this upper set carries more `nu`-mass than `nu'`-mass.
    UpperSet(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceCheck {
    pub holds: bool,
    pub witness: Option<DominanceWitness>,
}

impl DominanceCheck {
    fn ok() -> Self {
        Self {
            holds: true,
            witness: None,
        }
    }

    fn fail(witness: DominanceWitness) -> Self {
        Self {
            holds: false,
            witness: Some(witness),
        }
    }
}

/// Checks `nu ≺ nu'` in the order carried by `view`.
pub fn dominates(nu: &Distribution, nu_p: &Distribution, view: &PosetView) -> Result<DominanceCheck> {
    if view.space.is_total() {
        Ok(dominates_total(nu, nu_p))
    } else {
        let sets = view.upper_sets()?;
        for &mask in sets {
            let m = |d: &Distribution| d.mass_of(|x| mask >> (x - 1) & 1 == 1);
            if m(nu) > m(nu_p) + DOMINANCE_TOL {
                let states = (1..=view.space.n())
                    .filter(|x| mask >> (x - 1) & 1 == 1)
                    .collect();
                return Ok(DominanceCheck::fail(DominanceWitness::UpperSet(states)));
            }
        }
        Ok(DominanceCheck::ok())
    }
}

/// Total-order fast path: tail sums `sum_{y>=x} nu(y) <= sum_{y>=x} nu'(y)`.
pub fn dominates_total(nu: &Distribution, nu_p: &Distribution) -> DominanceCheck {
    // Walk both supports from the top, maintaining suffix sums; only support
    // points of either measure can witness a violation.
    let mut thresholds: Vec<usize> = nu
        .iter()
        .map(|(x, _)| x)
        .chain(nu_p.iter().map(|(x, _)| x))
        .collect();
    thresholds.sort_unstable();
    thresholds.dedup();
    let mut tail = 0.0;
    let mut tail_p = 0.0;
    for &x in thresholds.iter().rev() {
        tail += nu.get(x);
        tail_p += nu_p.get(x);
        if tail > tail_p + DOMINANCE_TOL {
            return DominanceCheck::fail(DominanceWitness::Threshold(x));
        }
    }
    DominanceCheck::ok()
}

/// A coupling supported on ordered pairs with the prescribed marginals.
#[derive(Debug, Clone)]
pub struct MonotoneCoupling {
    /// `(x, x', weight)` with `x <= x'` and positive weight.
    pub joint: Vec<(usize, usize, f64)>,
}

impl MonotoneCoupling {
    /// Verifies both defining invariants: marginals within `1e-12` and every
    /// support pair ordered.
    pub fn validate(
        &self,
        nu: &Distribution,
        nu_p: &Distribution,
        space: &StateSpace,
    ) -> Result<()> {
        use std::collections::BTreeMap;
        let mut left: BTreeMap<usize, f64> = BTreeMap::new();
        let mut right: BTreeMap<usize, f64> = BTreeMap::new();
        for &(x, xp, w) in &self.joint {
            if !space.leq(x, xp) {
                return Err(QsdError::NotDominated(format!(
                    "coupling pair ({x},{xp}) is not ordered"
                )));
            }
            *left.entry(x).or_insert(0.0) += w;
            *right.entry(xp).or_insert(0.0) += w;
        }
        let check = |m: &BTreeMap<usize, f64>, d: &Distribution, side: &str| -> Result<()> {
            for (&x, &w) in m {
                if (w - d.get(x)).abs() > 1e-12 {
                    return Err(QsdError::InconsistentInputs(format!(
                        "{side} marginal at {x}: {w} vs {}",
                        d.get(x)
                    )));
                }
            }
            for (x, w) in d.iter() {
                if !m.contains_key(&x) && w > 1e-12 {
                    return Err(QsdError::InconsistentInputs(format!(
                        "{side} marginal misses state {x}"
                    )));
                }
            }
            Ok(())
        };
        check(&left, nu, "first")?;
        check(&right, nu_p, "second")
    }
}

/// Constructs a monotone coupling of `nu ≺ nu'`.
pub fn build_monotone_coupling(
    nu: &Distribution,
    nu_p: &Distribution,
    view: &PosetView,
) -> Result<MonotoneCoupling> {
    let dom = dominates(nu, nu_p, view)?;
    if !dom.holds {
        return Err(QsdError::NotDominated(format!("witness: {:?}", dom.witness)));
    }
    if view.space.is_total() {
        Ok(quantile_coupling(nu, nu_p))
    } else {
        flow_coupling(nu, nu_p, &view.space)
    }
}

/// Comonotone (inverse-CDF) coupling on a total order.
fn quantile_coupling(nu: &Distribution, nu_p: &Distribution) -> MonotoneCoupling {
    let a: Vec<(usize, f64)> = nu.iter().collect();
    let b: Vec<(usize, f64)> = nu_p.iter().collect();
    let mut joint = Vec::new();
    let (mut i, mut j) = (0, 0);
    let mut rem_a = a.first().map(|&(_, w)| w).unwrap_or(0.0);
    let mut rem_b = b.first().map(|&(_, w)| w).unwrap_or(0.0);
    while i < a.len() && j < b.len() {
        let w = rem_a.min(rem_b);
        if w > 0.0 {
            joint.push((a[i].0, b[j].0, w));
        }
        rem_a -= w;
        rem_b -= w;
        if rem_a <= 1e-18 {
            i += 1;
            rem_a = a.get(i).map(|&(_, w)| w).unwrap_or(0.0);
        }
        if rem_b <= 1e-18 {
            j += 1;
            rem_b = b.get(j).map(|&(_, w)| w).unwrap_or(0.0);
        }
    }
    MonotoneCoupling { joint }
}

/// Feasibility transport for general posets: a small max-flow over the
/// relation graph. May be suboptimal in support size; only validity is
/// contractual.
fn flow_coupling(
    nu: &Distribution,
    nu_p: &Distribution,
    space: &StateSpace,
) -> Result<MonotoneCoupling> {
    let left: Vec<(usize, f64)> = nu.iter().collect();
    let right: Vec<(usize, f64)> = nu_p.iter().collect();
    let nl = left.len();
    let nr = right.len();
    // residual capacities: cap[i][j] unbounded where ordered; supplies/demands
    let mut flow = vec![vec![0.0f64; nr]; nl];
    let mut supply: Vec<f64> = left.iter().map(|&(_, w)| w).collect();
    let mut demand: Vec<f64> = right.iter().map(|&(_, w)| w).collect();
    // Augment along shortest paths source -> i -> j -> sink. Because edge
    // capacities between ordered pairs are infinite, a single BFS layer
    // suffices: but flows may need rerouting, so run full augmenting paths on
    // the bipartite residual graph.
    loop {
        let total_left: f64 = supply.iter().sum();
        if total_left <= 1e-13 {
            break;
        }
        // BFS over residual graph: nodes L(i), R(j).
        let s = supply
            .iter()
            .position(|&w| w > 1e-13)
            .expect("positive supply exists");
        let mut prev_l: Vec<Option<usize>> = vec![None; nl];
        let mut prev_r: Vec<Option<usize>> = vec![None; nr];
        let mut queue = std::collections::VecDeque::new();
        prev_l[s] = Some(usize::MAX);
        queue.push_back((true, s));
        let mut found: Option<usize> = None;
        'bfs: while let Some((is_left, idx)) = queue.pop_front() {
            if is_left {
                for j in 0..nr {
                    if prev_r[j].is_none() && space.leq(left[idx].0, right[j].0) {
                        prev_r[j] = Some(idx);
                        if demand[j] > 1e-13 {
                            found = Some(j);
                            break 'bfs;
                        }
                        queue.push_back((false, j));
                    }
                }
            } else {
                for i in 0..nl {
                    if prev_l[i].is_none() && flow[i][idx] > 1e-13 {
                        prev_l[i] = Some(idx);
                        queue.push_back((true, i));
                    }
                }
            }
        }
        let Some(t) = found else {
            return Err(QsdError::NotDominated(
                "no feasible monotone transport (flow blocked)".into(),
            ));
        };
        // trace back path, find bottleneck
        let mut path = Vec::new(); // (i, j) forward edges used
        let mut j = t;
        let mut bottleneck = demand[t];
        loop {
            let i = prev_r[j].unwrap();
            path.push((i, j));
            match prev_l[i] {
                Some(usize::MAX) => {
                    bottleneck = bottleneck.min(supply[i]);
                    break;
                }
                Some(jb) => {
                    bottleneck = bottleneck.min(flow[i][jb]);
                    j = jb;
                }
                None => unreachable!(),
            }
        }
        // apply
        let mut j = t;
        loop {
            let i = prev_r[j].unwrap();
            flow[i][j] += bottleneck;
            match prev_l[i] {
                Some(usize::MAX) => {
                    supply[i] -= bottleneck;
                    break;
                }
                Some(jb) => {
                    flow[i][jb] -= bottleneck;
                    j = jb;
                }
                None => unreachable!(),
            }
        }
        demand[t] -= bottleneck;
    }
    let mut joint = Vec::new();
    for i in 0..nl {
        for j in 0..nr {
            if flow[i][j] > 1e-15 {
                joint.push((left[i].0, right[j].0, flow[i][j]));
            }
        }
    }
    Ok(MonotoneCoupling { joint })
}

/// Sampling form of the inverse-CDF coupling: maps one shared uniform variate
/// to an ordered pair of quantiles. Requires a total order and `nu ≺ nu'`.
pub fn quantile_couple_step(
    nu: &Distribution,
    nu_p: &Distribution,
    u: f64,
) -> Result<(usize, usize)> {
    let dom = dominates_total(nu, nu_p);
    if !dom.holds {
        return Err(QsdError::NotDominated(format!("witness: {:?}", dom.witness)));
    }
    Ok((nu.quantile(u), nu_p.quantile(u)))
}
