//! Pairwise domination checks between single-site conditional distributions.
//!
//! The three checks compare, over all ordered pairs of boundary data, the
//! conditionals that drive the coupled Gibbs sampler on trajectory space:
//!
//! - (a) first site:    `nu(.)Q(.,z)/nuQ(z)      ≺ nu'(.)Q'(.,z')/nu'Q'(z')`
//! - (b) interior site: `Q(x,.)Q(.,z)/Q²(x,z)    ≺ Q'(x',.)Q'(.,z')/Q'²(x',z')`
//! - (c) last site:     `Q(x,.)/(1-Q(x,0))       ≺ Q'(x',.)/(1-Q'(x',0))`
//!
//! quantified over `x ≤ x'`, `z ≤ z'` with positive denominators; pairs with
//! a zero denominator are skipped. When these hold for ordered initial data,
//! the whole conditioned trajectory measures are stochastically ordered.
//! The per-step variant (b') checks `Q_{k-1}(x,.)Q_k(.,z)` families the same
//! way for each step `k` of a window.

use crate::dist::Distribution;
use crate::error::Result;
use crate::kernel::AbsorbedKernel;
use crate::order::{dominates, DominanceWitness, PosetView};
use crate::trajectory::KernelFamily;

/// A failed comparison, naming the boundary data and the dominance witness.
#[derive(Debug, Clone, PartialEq)]
pub enum Counterexample {
    ConditionA {
        z: usize,
        z_prime: usize,
        witness: DominanceWitness,
    },
    ConditionB {
        x: usize,
        x_prime: usize,
        z: usize,
        z_prime: usize,
        witness: DominanceWitness,
    },
    ConditionC {
        x: usize,
        x_prime: usize,
        witness: DominanceWitness,
    },
    /// Failure of the per-step variant at step `k` of the window.
    PerStep { k: usize, inner: Box<Counterexample> },
}

fn fmt_witness(w: &DominanceWitness, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
    match w {
        DominanceWitness::Threshold(y) => write!(f, "threshold y={y}"),
        DominanceWitness::UpperSet(states) => write!(f, "upper set {states:?}"),
    }
}

impl std::fmt::Display for Counterexample {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Counterexample::ConditionA { z, z_prime, witness } => {
                write!(f, "condition (a) fails at z={z}, z'={z_prime}, ")?;
                fmt_witness(witness, f)
            }
            Counterexample::ConditionB {
                x,
                x_prime,
                z,
                z_prime,
                witness,
            } => {
                write!(
                    f,
                    "condition (b) fails at x={x}, x'={x_prime}, z={z}, z'={z_prime}, "
                )?;
                fmt_witness(witness, f)
            }
            Counterexample::ConditionC { x, x_prime, witness } => {
                write!(f, "condition (c) fails at x={x}, x'={x_prime}, ")?;
                fmt_witness(witness, f)
            }
            Counterexample::PerStep { k, inner } => write!(f, "step k={k}: {inner}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCheck {
    pub holds: bool,
    pub counterexample: Option<Counterexample>,
}

impl ConditionCheck {
    fn ok() -> Self {
        Self {
            holds: true,
            counterexample: None,
        }
    }

    fn fail(c: Counterexample) -> Self {
        Self {
            holds: false,
            counterexample: Some(c),
        }
    }
}

/// A conditional distribution as a small sorted weight list; kept raw
/// (unnormalized) since dominance is scale-free after dividing by the total.
type Cond = Vec<(usize, f64)>;

/// Dominance between two small normalized conditionals. `None` means it
/// holds; otherwise the witness is returned. Total orders take a merged
/// tail-sum scan; general posets go through the upper-set enumeration.
fn cond_dominates(
    left: &Cond,
    right: &Cond,
    view: &PosetView,
) -> Result<Option<DominanceWitness>> {
    if view.space().is_total() {
        // both lists are sorted by state
        let (mut i, mut j) = (left.len(), right.len());
        let mut tail = 0.0;
        let mut tail_r = 0.0;
        while i > 0 || j > 0 {
            let xi = if i > 0 { left[i - 1].0 } else { 0 };
            let xj = if j > 0 { right[j - 1].0 } else { 0 };
            let x = xi.max(xj);
            if xi == x {
                tail += left[i - 1].1;
                i -= 1;
            }
            if xj == x {
                tail_r += right[j - 1].1;
                j -= 1;
            }
            if tail > tail_r + crate::order::DOMINANCE_TOL {
                return Ok(Some(DominanceWitness::Threshold(x)));
            }
        }
        Ok(None)
    } else {
        let l = Distribution::normalized(left.iter().copied().collect())?;
        let r = Distribution::normalized(right.iter().copied().collect())?;
        Ok(dominates(&l, &r, view)?.witness)
    }
}

fn normalize(mut c: Cond) -> Cond {
    let total: f64 = c.iter().map(|&(_, w)| w).sum();
    for e in &mut c {
        e.1 /= total;
    }
    c
}

/// First-site conditional `w ↦ nu(w)Q(w,z)`, normalized; `None` when the
/// denominator `nuQ(z)` vanishes.
fn first_site_conditional(nu: &Distribution, k: &AbsorbedKernel, z: usize) -> Option<Cond> {
    let mut c: Cond = nu
        .iter()
        .map(|(w, m)| (w, m * k.transition(w, z)))
        .filter(|&(_, v)| v > 0.0)
        .collect();
    if c.is_empty() {
        return None;
    }
    c.sort_unstable_by_key(|&(w, _)| w);
    Some(normalize(c))
}

/// Checks the first-site domination (a) over all `z ≤ z'` with positive
/// denominators.
pub fn check_condition_a(
    nu: &Distribution,
    nu_p: &Distribution,
    q: &AbsorbedKernel,
    q_p: &AbsorbedKernel,
    view: &PosetView,
) -> Result<ConditionCheck> {
    let n = q.n_states();
    let space = view.space();
    let lefts: Vec<Option<Cond>> = (1..=n)
        .map(|z| first_site_conditional(nu, q, z))
        .collect();
    let rights: Vec<Option<Cond>> = (1..=n)
        .map(|z| first_site_conditional(nu_p, q_p, z))
        .collect();
    for z in 1..=n {
        let Some(left) = &lefts[z - 1] else { continue };
        for zp in 1..=n {
            if !space.leq(z, zp) {
                continue;
            }
            let Some(right) = &rights[zp - 1] else {
                continue;
            };
            if let Some(witness) = cond_dominates(left, right, view)? {
                return Ok(ConditionCheck::fail(Counterexample::ConditionA {
                    z,
                    z_prime: zp,
                    witness,
                }));
            }
        }
    }
    Ok(ConditionCheck::ok())
}

/// Interior conditionals `w ↦ Qa(x,w)Qb(w,z)` for all `(x,z)` with positive
/// two-step mass, as a sparse list sorted by `(x,z)`.
fn interior_conditionals(qa: &AbsorbedKernel, qb: &AbsorbedKernel) -> Vec<(usize, usize, Cond)> {
    use std::collections::BTreeMap;
    let n = qa.n_states();
    let mut by_pair: BTreeMap<(usize, usize), Cond> = BTreeMap::new();
    for x in 1..=n {
        for &(w, qxw) in qa.row(x).targets() {
            for &(z, qwz) in qb.row(w).targets() {
                by_pair
                    .entry((x, z))
                    .or_default()
                    .push((w, qxw * qwz));
            }
        }
    }
    by_pair
        .into_iter()
        .map(|((x, z), mut c)| {
            c.sort_unstable_by_key(|&(w, _)| w);
            (x, z, normalize(c))
        })
        .collect()
}

fn same_class(classes: Option<&[usize]>, a: usize, b: usize) -> bool {
    match classes {
        None => true,
        Some(cl) => cl[a - 1] == cl[b - 1],
    }
}

fn condition_b_pair(
    qa: &AbsorbedKernel,
    qb: &AbsorbedKernel,
    qa_p: &AbsorbedKernel,
    qb_p: &AbsorbedKernel,
    view: &PosetView,
    classes: Option<&[usize]>,
) -> Result<ConditionCheck> {
    let space = view.space();
    let lefts = interior_conditionals(qa, qb);
    let rights = if std::ptr::eq(qa, qa_p) && std::ptr::eq(qb, qb_p) {
        None // reuse lefts
    } else {
        Some(interior_conditionals(qa_p, qb_p))
    };
    let rights = rights.as_ref().unwrap_or(&lefts);
    for &(x, z, ref left) in &lefts {
        for &(xp, zp, ref right) in rights {
            if !space.leq(x, xp) || !space.leq(z, zp) || !same_class(classes, x, xp) {
                continue;
            }
            if let Some(witness) = cond_dominates(left, right, view)? {
                return Ok(ConditionCheck::fail(Counterexample::ConditionB {
                    x,
                    x_prime: xp,
                    z,
                    z_prime: zp,
                    witness,
                }));
            }
        }
    }
    Ok(ConditionCheck::ok())
}

/// Checks the interior-site domination (b) over all `x ≤ x'`, `z ≤ z'` with
/// positive two-step mass. `classes` optionally restricts `x, x'` to the same
/// cyclic class, the quantifier used for periodic chains.
pub fn check_condition_b(
    q: &AbsorbedKernel,
    q_p: &AbsorbedKernel,
    view: &PosetView,
    classes: Option<&[usize]>,
) -> Result<ConditionCheck> {
    condition_b_pair(q, q, q_p, q_p, view, classes)
}

/// Checks the last-site domination (c) over all `x ≤ x'` with positive
/// survival. `classes` as in [`check_condition_b`].
pub fn check_condition_c(
    q: &AbsorbedKernel,
    q_p: &AbsorbedKernel,
    view: &PosetView,
    classes: Option<&[usize]>,
) -> Result<ConditionCheck> {
    let n = q.n_states();
    let space = view.space();
    let last = |k: &AbsorbedKernel, x: usize| -> Option<Cond> {
        let t = k.row(x).targets();
        if t.is_empty() {
            None // Q(x,0)=1: excluded by the positive-denominator quantifier
        } else {
            Some(normalize(t.to_vec()))
        }
    };
    for x in 1..=n {
        let Some(left) = last(q, x) else { continue };
        for xp in 1..=n {
            if !space.leq(x, xp) || !same_class(classes, x, xp) {
                continue;
            }
            let Some(right) = last(q_p, xp) else { continue };
            if let Some(witness) = cond_dominates(&left, &right, view)? {
                return Ok(ConditionCheck::fail(Counterexample::ConditionC {
                    x,
                    x_prime: xp,
                    witness,
                }));
            }
        }
    }
    Ok(ConditionCheck::ok())
}

/// Per-step variant (b') for kernel families over a window of `steps`
/// transitions: for each interior step `k` the conditional built from
/// `Q_{k-1}` and `Q_k` must dominate its primed counterpart.
pub fn check_condition_b_nonhomogeneous(
    family: &KernelFamily,
    family_p: &KernelFamily,
    steps: usize,
    view: &PosetView,
) -> Result<ConditionCheck> {
    if let (KernelFamily::Homogeneous(q), KernelFamily::Homogeneous(qp)) = (family, family_p) {
        return check_condition_b(q, qp, view, None);
    }
    for k in 1..steps {
        let check = condition_b_pair(
            family.at(k - 1),
            family.at(k),
            family_p.at(k - 1),
            family_p.at(k),
            view,
            None,
        )?;
        if let Some(inner) = check.counterexample {
            return Ok(ConditionCheck::fail(Counterexample::PerStep {
                k,
                inner: Box::new(inner),
            }));
        }
    }
    Ok(ConditionCheck::ok())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth_death::BirthDeathSpec;
    use crate::kernel::TruncationMode;
    use crate::space::StateSpace;
    use std::collections::BTreeMap;

    fn delayed(p: f64, r: f64, q: f64, n: usize) -> AbsorbedKernel {
        BirthDeathSpec::constant(p, r, q, n)
            .unwrap()
            .build_kernel(TruncationMode::OverflowToHold)
    }

    fn view(n: usize) -> PosetView {
        PosetView::new(StateSpace::total(n))
    }

    fn geom(r: f64, n: usize) -> Distribution {
        let w: BTreeMap<usize, f64> =
            (1..=n).map(|x| (x, r * (1.0 - r).powi(x as i32 - 1))).collect();
        Distribution::normalized(w).unwrap()
    }

    #[test]
    fn condition_a_trivial_cases() {
        let n = 8;
        let k = delayed(0.15, 0.55, 0.30, n);
        let v = view(n);
        let d1 = Distribution::delta(1);
        let g = geom(0.4, n);
        // left side concentrated at the minimal element's successors
        assert!(check_condition_a(&d1, &g, &k, &k, &v).unwrap().holds);
        assert!(check_condition_a(&g, &g, &k, &k, &v).unwrap().holds);
    }

    #[test]
    fn condition_a_shifted_geometric() {
        let n = 8;
        let k = delayed(0.15, 0.55, 0.30, n);
        let v = view(n);
        let g = geom(0.5, n);
        let shifted = {
            let w: BTreeMap<usize, f64> = g.iter().map(|(x, m)| (x.min(n - 1) + 1, m)).fold(
                BTreeMap::new(),
                |mut acc, (x, m)| {
                    *acc.entry(x).or_insert(0.0) += m;
                    acc
                },
            );
            Distribution::normalized(w).unwrap()
        };
        assert!(check_condition_a(&g, &shifted, &k, &k, &v).unwrap().holds);
    }

    #[test]
    fn condition_b_holds_when_pq_below_r_squared() {
        // p q = 0.045 <= r^2 = 0.3025
        let n = 12;
        let k = delayed(0.15, 0.55, 0.30, n);
        assert!(check_condition_b(&k, &k, &view(n), None).unwrap().holds);
        assert!(check_condition_c(&k, &k, &view(n), None).unwrap().holds);
    }

    #[test]
    fn condition_b_fails_at_two_when_pq_above_r_squared() {
        // p q = 0.12 > r^2 = 0.09: worst case sits at the bottom of the chain
        let n = 12;
        let k = delayed(0.3, 0.3, 0.4, n);
        let check = check_condition_b(&k, &k, &view(n), None).unwrap();
        assert!(!check.holds);
        match check.counterexample.unwrap() {
            Counterexample::ConditionB { witness, .. } => {
                assert_eq!(witness, DominanceWitness::Threshold(2));
            }
            other => panic!("unexpected counterexample {other:?}"),
        }
    }

    #[test]
    fn condition_b_vacuous_on_empty_two_step() {
        // single state that only absorbs or holds nothing: Q(1,.) on S empty
        let k = AbsorbedKernel::from_rows(
            StateSpace::total(1),
            vec![vec![(0, 1.0)]],
            TruncationMode::OverflowToHold,
        )
        .unwrap();
        assert!(check_condition_b(&k, &k, &view(1), None).unwrap().holds);
        assert!(check_condition_c(&k, &k, &view(1), None).unwrap().holds);
    }

    #[test]
    fn homogeneous_family_reduces_to_condition_b() {
        let n = 8;
        let good = delayed(0.15, 0.55, 0.30, n);
        let bad = delayed(0.3, 0.3, 0.4, n);
        let v = view(n);
        for k in [&good, &bad] {
            let fam = KernelFamily::Homogeneous(k.clone());
            assert_eq!(
                check_condition_b_nonhomogeneous(&fam, &fam, 4, &v)
                    .unwrap()
                    .holds,
                check_condition_b(k, k, &v, None).unwrap().holds
            );
        }
    }

    #[test]
    fn forced_jump_prefix_family_dominates() {
        // first-step kernel forces a jump to state 1's successor structure;
        // remaining steps use the delayed walk. The prefixed family is
        // dominated by the homogeneous one.
        let n = 8;
        let k = delayed(0.15, 0.55, 0.30, n);
        let forced = AbsorbedKernel::from_rows(
            StateSpace::total(n),
            (1..=n).map(|_| vec![(1, 1.0)]).collect(),
            TruncationMode::OverflowToHold,
        )
        .unwrap();
        let steps = 4;
        let fam = KernelFamily::PerStep(
            std::iter::once(forced)
                .chain(std::iter::repeat(k.clone()).take(steps - 1))
                .collect(),
        );
        let fam_p = KernelFamily::Homogeneous(k);
        let check = check_condition_b_nonhomogeneous(&fam, &fam_p, steps, &view(n)).unwrap();
        assert!(check.holds);
    }

    #[test]
    fn per_step_failure_reports_the_step() {
        let n = 8;
        let good = delayed(0.15, 0.55, 0.30, n);
        let bad = delayed(0.3, 0.3, 0.4, n);
        let steps = 4;
        let fam = KernelFamily::PerStep(vec![good.clone(), good.clone(), good, bad]);
        let fam_p = fam.clone();
        let check = check_condition_b_nonhomogeneous(&fam, &fam_p, steps, &view(n)).unwrap();
        assert!(!check.holds);
        match check.counterexample.unwrap() {
            Counterexample::PerStep { k, .. } => assert_eq!(k, 3),
            other => panic!("unexpected counterexample {other:?}"),
        }
    }

    #[test]
    fn class_restriction_relaxes_the_quantifier() {
        // p-q walk has period 2; the unrestricted check fails on cross-parity
        // pairs while the class-restricted one passes.
        let n = 10;
        let k = crate::periodic::pq_walk_kernel(0.25, 0.75, n, TruncationMode::OverflowToAbsorption)
            .unwrap();
        let v = view(n);
        let classes: Vec<usize> = (1..=n).map(|x| x % 2).collect();
        assert!(check_condition_b(&k, &k, &v, Some(&classes)).unwrap().holds);
        assert!(check_condition_c(&k, &k, &v, Some(&classes)).unwrap().holds);
        assert!(!check_condition_c(&k, &k, &v, None).unwrap().holds);
    }
}
