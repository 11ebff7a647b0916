//! Periodic chains: cyclic subclasses, the per-class identities satisfied by
//! a quasi-stationary distribution, per-residue Yaglom limits, and the
//! assembly of a single fixed point from the per-class limits.
//!
//! For a chain of period `d` the transient states split into classes
//! `S_1..S_d` with every on-`S` transition moving one class forward
//! (cyclically). Conditioned iterates started in one class rotate through
//! the classes, so limits exist only along residues; the per-residue limits
//! combine, with weights solving a cyclic linear system, into a
//! quasi-stationary distribution.

use std::collections::VecDeque;

use crate::dist::Distribution;
use crate::error::{QsdError, Result};
use crate::kernel::{AbsorbedKernel, TruncationMode};
use crate::order::{dominates, PosetView};
use crate::semigroup::{conditioned_step, qsd_residual, survival_mass};
use crate::space::StateSpace;

/// The walk that moves down with probability `q` and up with `p`, no holding
/// term. Period 2: odd and even states alternate. `p + q = 1`, `p < q`.
pub fn pq_walk_kernel(
    p: f64,
    q: f64,
    n: usize,
    mode: TruncationMode,
) -> Result<AbsorbedKernel> {
    if !(p > 0.0 && q > 0.0) || (p + q - 1.0).abs() > crate::dist::MASS_TOL {
        return Err(QsdError::InvalidRates(format!(
            "need p, q > 0 with p + q = 1, got p={p}, q={q}"
        )));
    }
    if p >= q {
        return Err(QsdError::InvalidRates(format!(
            "downward drift requires p < q, got p={p}, q={q}"
        )));
    }
    let rows = (1..=n).map(|x| vec![(x - 1, q), (x + 1, p)]).collect();
    AbsorbedKernel::from_rows(StateSpace::total(n), rows, mode)
}

#[derive(Debug, Clone)]
pub struct CyclicDecomposition {
    pub d: usize,
    /// `classes[j]` lists class `j` (0-based); state 1 is in class 0.
    pub classes: Vec<Vec<usize>>,
    /// class index per state, `class_of[x - 1]`.
    pub class_of: Vec<usize>,
}

impl CyclicDecomposition {
    pub fn class(&self, x: usize) -> usize {
        self.class_of[x - 1]
    }

    /// Projection of `nu` onto class `j`, renormalized. `None` if the class
    /// carries no mass.
    pub fn project(&self, nu: &Distribution, j: usize) -> Option<Distribution> {
        nu.conditioned_on(|x| self.class(x) == j)
    }

    /// Mass of `nu` on class `j`.
    pub fn mass(&self, nu: &Distribution, j: usize) -> f64 {
        nu.mass_of(|x| self.class(x) == j)
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Computes the period and cyclic classes of the `S`-restricted transition
/// graph. The period is the gcd of `dist(u) + 1 - dist(v)` over all edges
/// `u -> v`, with BFS distances from state 1; classes are distances mod `d`.
pub fn cyclic_classes(k: &AbsorbedKernel) -> Result<CyclicDecomposition> {
    let n = k.n_states();
    let reach = |forward: bool| -> Vec<bool> {
        let mut seen = vec![false; n + 1];
        let mut queue = VecDeque::from([1usize]);
        seen[1] = true;
        while let Some(u) = queue.pop_front() {
            for v in 1..=n {
                let edge = if forward {
                    k.transition(u, v) > 0.0
                } else {
                    k.transition(v, u) > 0.0
                };
                if edge && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    };
    let fwd = reach(true);
    let bwd = reach(false);
    if (1..=n).any(|x| !fwd[x] || !bwd[x]) {
        return Err(QsdError::NotIrreducible);
    }
    // BFS distances from 1
    let mut dist = vec![usize::MAX; n + 1];
    dist[1] = 0;
    let mut queue = VecDeque::from([1usize]);
    while let Some(u) = queue.pop_front() {
        for &(v, _) in k.row(u).targets() {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut g = 0usize;
    for u in 1..=n {
        for &(v, _) in k.row(u).targets() {
            let diff = (dist[u] as isize + 1 - dist[v] as isize).unsigned_abs();
            g = gcd(g, diff);
        }
    }
    let d = if g == 0 { 1 } else { g };
    let class_of: Vec<usize> = (1..=n).map(|x| dist[x] % d).collect();
    let mut classes = vec![Vec::new(); d];
    for x in 1..=n {
        classes[class_of[x - 1]].push(x);
    }
    // every on-S edge must advance the class by one
    for u in 1..=n {
        for &(v, _) in k.row(u).targets() {
            if class_of[v - 1] != (class_of[u - 1] + 1) % d {
                return Err(QsdError::InconsistentInputs(format!(
                    "edge {u} -> {v} does not advance the cyclic class"
                )));
            }
        }
    }
    Ok(CyclicDecomposition {
        d,
        classes,
        class_of,
    })
}

/// Per-class identities of a quasi-stationary distribution `nu` with class
/// weights `m_j` and projections `nu_j`:
///
/// 1. `m_j a(nu_j) = a(nu) m_{j+1}` (cyclically)
/// 2. `nu_j T_1 = nu_{j+1}`
/// 3. `a(nu)^d = a(nu_1) ... a(nu_d)`
#[derive(Debug, Clone)]
pub struct P31Report {
    pub survival: f64,
    pub class_masses: Vec<f64>,
    pub class_survivals: Vec<f64>,
    pub weight_identity_err: f64,
    pub shift_identity_tv: f64,
    pub product_identity_err: f64,
    pub pass: bool,
}

pub const P31_TOL: f64 = 1e-9;

pub fn lemma_p31_check(
    nu: &Distribution,
    k: &AbsorbedKernel,
    dec: &CyclicDecomposition,
) -> Result<P31Report> {
    let residual = qsd_residual(nu, k);
    if residual > 1e-6 {
        return Err(QsdError::NotAQsd(residual));
    }
    let d = dec.d;
    let a = survival_mass(nu, k);
    let mut class_masses = Vec::with_capacity(d);
    let mut class_survivals = Vec::with_capacity(d);
    let mut projections = Vec::with_capacity(d);
    for j in 0..d {
        let m = dec.mass(nu, j);
        let proj = dec.project(nu, j).ok_or_else(|| {
            QsdError::InconsistentInputs(format!("class {j} carries no mass"))
        })?;
        class_survivals.push(survival_mass(&proj, k));
        class_masses.push(m);
        projections.push(proj);
    }
    let mut weight_identity_err = 0.0f64;
    let mut shift_identity_tv = 0.0f64;
    for j in 0..d {
        let jn = (j + 1) % d;
        let lhs = class_masses[j] * class_survivals[j];
        let rhs = a * class_masses[jn];
        weight_identity_err = weight_identity_err.max((lhs - rhs).abs());
        let (stepped, _) = conditioned_step(&projections[j], k)?;
        shift_identity_tv = shift_identity_tv.max(stepped.tv_distance(&projections[jn]));
    }
    let product_identity_err =
        (a.powi(d as i32) - class_survivals.iter().product::<f64>()).abs();
    let pass = weight_identity_err <= P31_TOL
        && shift_identity_tv <= P31_TOL
        && product_identity_err <= P31_TOL;
    Ok(P31Report {
        survival: a,
        class_masses,
        class_survivals,
        weight_identity_err,
        shift_identity_tv,
        product_identity_err,
        pass,
    })
}

/// Conditioned iterates from `delta_1` sampled along residues mod `d`:
/// returns `d` limit distributions, the `j`-th supported on class `j`
/// (0-based; the iterate at step `n` lives on class `n mod d`).
///
/// Stops when for every residue the distance between consecutive same-residue
/// iterates falls below `tol`; `max_k` bounds the per-residue iteration
/// count.
pub fn periodic_yaglom(
    k: &AbsorbedKernel,
    dec: &CyclicDecomposition,
    max_k: usize,
    tol: f64,
) -> Result<Vec<Distribution>> {
    let d = dec.d;
    let mut cur = Distribution::delta(1);
    let mut last: Vec<Option<Distribution>> = vec![None; d];
    let mut settled = vec![false; d];
    last[0] = Some(cur.clone());
    for step in 1..=max_k * d {
        cur = conditioned_step(&cur, k)
            .map_err(|_| QsdError::SurvivalUnderflow { steps: step })?
            .0;
        let j = step % d;
        if let Some(prev) = &last[j] {
            settled[j] = cur.tv_distance(prev) <= tol;
        }
        last[j] = Some(cur.clone());
        if step % d == 0 && settled.iter().all(|&s| s) {
            break;
        }
    }
    if !settled.iter().all(|&s| s) {
        return Err(QsdError::NotConverged(max_k * d));
    }
    // rotate so entry j is the class-j limit
    Ok((0..d)
        .map(|j| last[j].take().expect("all residues visited"))
        .collect())
}

#[derive(Debug, Clone)]
pub struct PeriodicQsdAssembly {
    pub nu_bars: Vec<Distribution>,
    /// Class weights, nonnegative with unit sum.
    pub m: Vec<f64>,
    /// `alpha^d` equals the product of the per-class survival masses.
    pub alpha: f64,
    pub nu_star: Distribution,
    /// Fixed-point residual of the assembled distribution.
    pub residual: f64,
}

/// Combines per-class limits into one distribution: `alpha` is the positive
/// `d`-th root of the product of per-class survivals, the weights solve
/// `m_j a_j = alpha m_{j+1}` around the cycle by back-substitution (the
/// closure mismatch after a full loop re-verifies `alpha`), and
/// `nu_star = sum_j m_j nu_bar_j`.
pub fn assemble_nu_star(
    nu_bars: &[Distribution],
    k: &AbsorbedKernel,
    shift_tol: f64,
) -> Result<PeriodicQsdAssembly> {
    let d = nu_bars.len();
    let a: Vec<f64> = nu_bars.iter().map(|nu| survival_mass(nu, k)).collect();
    for j in 0..d {
        let (stepped, _) = conditioned_step(&nu_bars[j], k)?;
        let tv = stepped.tv_distance(&nu_bars[(j + 1) % d]);
        if tv > shift_tol {
            return Err(QsdError::InconsistentInputs(format!(
                "stepping class {j} misses class {} by TV {tv:.3e}",
                (j + 1) % d
            )));
        }
    }
    let alpha = a.iter().product::<f64>().powf(1.0 / d as f64);
    let mut m = vec![1.0f64; d];
    for j in 0..d - 1 {
        m[j + 1] = m[j] * a[j] / alpha;
    }
    let closure = (m[d - 1] * a[d - 1] / alpha - m[0]).abs();
    if closure > 1e-10 {
        return Err(QsdError::InconsistentInputs(format!(
            "cyclic weight system fails to close: mismatch {closure:.3e}"
        )));
    }
    let total: f64 = m.iter().sum();
    for w in &mut m {
        *w /= total;
    }
    let mut weights = std::collections::BTreeMap::new();
    for (j, nu) in nu_bars.iter().enumerate() {
        for (x, w) in nu.iter() {
            *weights.entry(x).or_insert(0.0) += m[j] * w;
        }
    }
    let nu_star = Distribution::normalized(weights)?;
    let residual = qsd_residual(&nu_star, k);
    Ok(PeriodicQsdAssembly {
        nu_bars: nu_bars.to_vec(),
        m,
        alpha,
        nu_star,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct MinimalAssemblyReport {
    /// `a(nu_star) <= a(candidate)` for every candidate.
    pub absorption_minimal: bool,
    /// Per-class projections of `nu_star` dominated by the candidates'.
    pub classwise_dominated: bool,
    pub failures: Vec<usize>,
}

/// Checks that the assembled distribution is the minimal one among
/// `candidates`: smallest survival mass, and dominated class by class.
/// Requires that stochastic order implies survival order; this is implied by
/// monotone absorption (`Q(x,0)` nonincreasing), and when that fails (for
/// instance through absorption-redirect at a truncation boundary) it is
/// verified directly on every ordered pair among the inputs.
pub fn theorem_t7_v_check(
    k: &AbsorbedKernel,
    assembly: &PeriodicQsdAssembly,
    dec: &CyclicDecomposition,
    candidates: &[Distribution],
) -> Result<MinimalAssemblyReport> {
    let n = k.n_states();
    let view = PosetView::new(k.space().clone());
    let monotone_absorption =
        (1..n).all(|x| k.transition(x, 0) >= k.transition(x + 1, 0) - crate::dist::MASS_TOL);
    if !monotone_absorption {
        let mut all: Vec<&Distribution> = vec![&assembly.nu_star];
        all.extend(candidates);
        for u in &all {
            for v in &all {
                if dominates(u, v, &view)?.holds
                    && survival_mass(u, k) > survival_mass(v, k) + 1e-10
                {
                    return Err(QsdError::HypothesisFailed(
                        "an ordered pair of inputs has decreasing survival mass".into(),
                    ));
                }
            }
        }
    }
    let a_star = survival_mass(&assembly.nu_star, k);
    let mut absorption_minimal = true;
    let mut classwise_dominated = true;
    let mut failures = Vec::new();
    for (i, cand) in candidates.iter().enumerate() {
        let mut failed = false;
        if a_star > survival_mass(cand, k) + 1e-10 {
            absorption_minimal = false;
            failed = true;
        }
        for j in 0..dec.d {
            let (Some(star_j), Some(cand_j)) = (
                dec.project(&assembly.nu_star, j),
                dec.project(cand, j),
            ) else {
                continue;
            };
            if !dominates(&star_j, &cand_j, &view)?.holds {
                classwise_dominated = false;
                failed = true;
            }
        }
        if failed {
            failures.push(i);
        }
    }
    Ok(MinimalAssemblyReport {
        absorption_minimal,
        classwise_dominated,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth_death::{minimal_qsd_closed_form, BirthDeathSpec};

    fn pq(n: usize) -> AbsorbedKernel {
        pq_walk_kernel(0.25, 0.75, n, TruncationMode::OverflowToAbsorption).unwrap()
    }

    #[test]
    fn pq_walk_constructor_validates() {
        assert!(pq_walk_kernel(0.25, 0.75, 5, TruncationMode::OverflowToAbsorption).is_ok());
        assert!(pq_walk_kernel(0.5, 0.5, 5, TruncationMode::OverflowToAbsorption).is_err());
        assert!(pq_walk_kernel(0.3, 0.6, 5, TruncationMode::OverflowToAbsorption).is_err());
    }

    #[test]
    fn pq_walk_has_parity_classes() {
        let dec = cyclic_classes(&pq(10)).unwrap();
        assert_eq!(dec.d, 2);
        assert_eq!(dec.classes[0], vec![1, 3, 5, 7, 9]);
        assert_eq!(dec.classes[1], vec![2, 4, 6, 8, 10]);
    }

    #[test]
    fn delayed_walk_is_aperiodic() {
        let k = BirthDeathSpec::constant(0.15, 0.55, 0.30, 10)
            .unwrap()
            .build_kernel(TruncationMode::OverflowToHold);
        let dec = cyclic_classes(&k).unwrap();
        assert_eq!(dec.d, 1);
        assert_eq!(dec.classes[0].len(), 10);
    }

    #[test]
    fn three_cycle_has_period_three() {
        let k = AbsorbedKernel::from_rows(
            StateSpace::total(3),
            vec![vec![(0, 0.4), (2, 0.6)], vec![(3, 1.0)], vec![(1, 1.0)]],
            TruncationMode::OverflowToHold,
        )
        .unwrap();
        let dec = cyclic_classes(&k).unwrap();
        assert_eq!(dec.d, 3);
        assert_eq!(dec.class_of, vec![0, 1, 2]);
    }

    #[test]
    fn disconnected_chain_is_rejected() {
        let k = AbsorbedKernel::from_rows(
            StateSpace::total(4),
            vec![
                vec![(0, 0.5), (2, 0.5)],
                vec![(1, 1.0)],
                vec![(4, 1.0)],
                vec![(3, 1.0)],
            ],
            TruncationMode::OverflowToHold,
        )
        .unwrap();
        assert!(matches!(cyclic_classes(&k), Err(QsdError::NotIrreducible)));
    }

    #[test]
    fn iterating_rotates_class_support() {
        let k = pq(20);
        let dec = cyclic_classes(&k).unwrap();
        let mut cur = Distribution::delta(1);
        for step in 1..=6 {
            cur = conditioned_step(&cur, &k).unwrap().0;
            for (x, _) in cur.iter() {
                assert_eq!(dec.class(x), step % 2);
            }
        }
    }

    #[test]
    fn p31_identities_on_the_minimal_qsd() {
        // lambda = 1/3: a(nu_min) = 2 sqrt(pq) = sqrt(0.75)
        let n = 400;
        let k = pq(n);
        let dec = cyclic_classes(&k).unwrap();
        let (nu_min, _) = minimal_qsd_closed_form(1.0 / 3.0, n);
        let rep = lemma_p31_check(&nu_min, &k, &dec).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!((rep.survival - 0.75f64.sqrt()).abs() < 1e-12);
        let prod: f64 = rep.class_survivals.iter().product();
        assert!((prod - 0.75).abs() < 1e-9);
    }

    #[test]
    fn p31_rejects_non_qsd() {
        let k = pq(50);
        let dec = cyclic_classes(&k).unwrap();
        let err = lemma_p31_check(&Distribution::delta(1), &k, &dec).unwrap_err();
        assert!(matches!(err, QsdError::NotAQsd(_)));
    }

    #[test]
    fn per_residue_limits_approach_the_projections() {
        let n = 200;
        let k = pq(n);
        let dec = cyclic_classes(&k).unwrap();
        let limits = periodic_yaglom(&k, &dec, 100_000, 1e-10).unwrap();
        assert_eq!(limits.len(), 2);
        let (nu_min, _) = minimal_qsd_closed_form(1.0 / 3.0, n);
        for j in 0..2 {
            for (x, _) in limits[j].iter() {
                assert_eq!(dec.class(x), j);
            }
            let proj = dec.project(&nu_min, j).unwrap();
            // truncation bias decays quadratically in n
            assert!(
                limits[j].tv_distance(&proj) < 1e-3,
                "class {j}: tv {}",
                limits[j].tv_distance(&proj)
            );
        }
    }

    #[test]
    fn assembly_recovers_the_minimal_qsd() {
        let n = 60;
        let k = pq(n);
        let dec = cyclic_classes(&k).unwrap();
        let limits = periodic_yaglom(&k, &dec, 100_000, 1e-12).unwrap();
        let asm = assemble_nu_star(&limits, &k, 1e-6).unwrap();
        assert!((asm.m[0] + asm.m[1] - 1.0).abs() < 1e-12);
        assert!(asm.residual < 1e-8, "residual {}", asm.residual);
        assert!((asm.alpha - 0.75f64.sqrt()).abs() < 5e-3);
        let (nu_min, _) = minimal_qsd_closed_form(1.0 / 3.0, n);
        assert!(asm.nu_star.tv_distance(&nu_min) < 1e-2);
    }

    #[test]
    fn aperiodic_assembly_is_the_plain_limit() {
        let k = BirthDeathSpec::constant(0.2, 0.2, 0.6, 100)
            .unwrap()
            .build_kernel(TruncationMode::OverflowToHold);
        let dec = cyclic_classes(&k).unwrap();
        assert_eq!(dec.d, 1);
        let limits = periodic_yaglom(&k, &dec, 100_000, 1e-12).unwrap();
        let asm = assemble_nu_star(&limits, &k, 1e-8).unwrap();
        assert_eq!(asm.m, vec![1.0]);
        assert!(asm.nu_star.tv_distance(&limits[0]) < 1e-15);
        assert!((asm.alpha - survival_mass(&limits[0], &k)).abs() < 1e-12);
    }

    #[test]
    fn assembled_limit_is_classwise_minimal() {
        let n = 200;
        let k = pq(n);
        let dec = cyclic_classes(&k).unwrap();
        let (nu_min, _) = minimal_qsd_closed_form(1.0 / 3.0, n);
        let limits: Vec<Distribution> =
            (0..2).map(|j| dec.project(&nu_min, j).unwrap()).collect();
        let asm = assemble_nu_star(&limits, &k, 1e-6).unwrap();
        let candidates: Vec<Distribution> = [0.05, 0.1, 0.15]
            .iter()
            .map(|&nu1| crate::birth_death::cavender_family(1.0 / 3.0, nu1, n).unwrap().weights)
            .collect();
        let rep = theorem_t7_v_check(&k, &asm, &dec, &candidates).unwrap();
        assert!(rep.absorption_minimal);
        assert!(rep.classwise_dominated);
        assert!(rep.failures.is_empty());
    }

    #[test]
    fn monotone_absorption_hypothesis_is_enforced() {
        let k = AbsorbedKernel::from_rows(
            StateSpace::total(3),
            vec![
                vec![(2, 1.0)],
                vec![(0, 0.3), (1, 0.2), (3, 0.5)],
                vec![(0, 0.6), (2, 0.4)],
            ],
            TruncationMode::OverflowToHold,
        )
        .unwrap();
        let dec = cyclic_classes(&k).unwrap();
        let nu = Distribution::delta(1);
        let asm = PeriodicQsdAssembly {
            nu_bars: vec![nu.clone()],
            m: vec![1.0],
            alpha: 1.0,
            nu_star: nu.clone(),
            residual: 0.0,
        };
        // delta_1 ≺ delta_2 but survival drops from 1 to 0.7
        assert!(matches!(
            theorem_t7_v_check(&k, &asm, &dec, &[Distribution::delta(2)]),
            Err(QsdError::HypothesisFailed(_))
        ));
    }
}
