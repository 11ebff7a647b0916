//! Continuous-time random walk absorbed at 0, reached as the limit of
//! discrete walks with growing holding probability.
//!
//! The discrete family `Q_r` holds with probability `r` and jumps like the
//! walk otherwise; running it for `floor(t/(1-r))` steps approximates, as
//! `r -> 1`, the continuous-time walk with jump rates `p` (up) and `q`
//! (down). The continuous-time distribution is computed by uniformization:
//! a Poisson-weighted mixture of powers of the uniformized one-step kernel,
//! with an explicit tail bound on the truncated series.

use std::collections::BTreeMap;

use crate::dist::Distribution;
use crate::error::{QsdError, Result};
use crate::kernel::{AbsorbedKernel, TruncationMode};
use crate::semigroup::{evolve_conditioned, SURVIVAL_FLOOR};
use crate::space::StateSpace;

#[derive(Debug, Clone)]
pub struct CtrwSpec {
    /// Upward jump rate; any positive real with `p < q`.
    pub p: f64,
    /// Downward jump rate; absorbing from state 1.
    pub q: f64,
    pub t: f64,
    pub n: usize,
    /// Uniformization rate, at least `p + q`. Results do not depend on it.
    pub uniformization_rate: f64,
    /// Stop the Poisson series when the remaining mass falls below this.
    pub series_tol: f64,
}

impl CtrwSpec {
    pub fn new(p: f64, q: f64, t: f64, n: usize) -> Result<Self> {
        if !(p > 0.0 && q > 0.0 && p < q) {
            return Err(QsdError::InvalidRates(format!(
                "need 0 < p < q, got p={p}, q={q}"
            )));
        }
        if !(t >= 0.0) {
            return Err(QsdError::InvalidRates(format!("need t >= 0, got {t}")));
        }
        Ok(Self {
            p,
            q,
            t,
            n,
            uniformization_rate: p + q,
            series_tol: 1e-12,
        })
    }

    pub fn with_uniformization_rate(mut self, rate: f64) -> Result<Self> {
        if rate < self.p + self.q {
            return Err(QsdError::InvalidRates(format!(
                "uniformization rate {rate} below total jump rate {}",
                self.p + self.q
            )));
        }
        self.uniformization_rate = rate;
        Ok(self)
    }
}

/// The delayed-walk kernel with holding probability `r`:
/// `Q_r(x,x+1) = p(1-r)`, `Q_r(x,x) = r`, `Q_r(x,x-1) = q(1-r)`, with `p, q`
/// normalized to `p + q = 1`. At `r = 0` this is the walk without holding.
pub fn discrete_family_kernel(
    p: f64,
    q: f64,
    r: f64,
    n: usize,
    mode: TruncationMode,
) -> Result<AbsorbedKernel> {
    if !(p > 0.0 && q > 0.0 && p < q) {
        return Err(QsdError::InvalidRates(format!(
            "need 0 < p < q, got p={p}, q={q}"
        )));
    }
    if !(0.0..1.0).contains(&r) {
        return Err(QsdError::InvalidRates(format!("need r in [0,1), got {r}")));
    }
    let (ph, qh) = (p / (p + q), q / (p + q));
    let rows = (1..=n)
        .map(|x| {
            vec![
                (x - 1, qh * (1.0 - r)),
                (x, r),
                (x + 1, ph * (1.0 - r)),
            ]
        })
        .collect();
    AbsorbedKernel::from_rows(StateSpace::total(n), rows, mode)
}

/// Unconditioned continuous-time evolution: sub-probability weights on `S`
/// plus the mass absorbed at 0.
#[derive(Debug, Clone)]
pub struct CtEvolution {
    pub on_s: BTreeMap<usize, f64>,
    pub absorbed: f64,
}

const SERIES_TERM_CAP: usize = 100_000;

/// `nu U_t` by uniformization: with `P = I + G/rate` (`G` the jump-rate
/// generator), `nu U_t = sum_k Poisson(rate * t)(k) * nu P^k`, truncated when
/// the remaining Poisson mass drops below `series_tol`.
pub fn ct_semigroup_apply(nu: &Distribution, spec: &CtrwSpec) -> Result<CtEvolution> {
    let rate = spec.uniformization_rate;
    let n = spec.n;
    // uniformized one-step kernel, overflow at the top absorbed
    let hold = 1.0 - (spec.p + spec.q) / rate;
    let rows = (1..=n)
        .map(|x| {
            vec![
                (x - 1, spec.q / rate),
                (x, hold),
                (x + 1, spec.p / rate),
            ]
        })
        .collect();
    let kernel = AbsorbedKernel::from_rows(
        StateSpace::total(n),
        rows,
        TruncationMode::OverflowToAbsorption,
    )?;
    let mu = rate * spec.t;
    let mut weight = (-mu).exp(); // Poisson(mu)(0)
    if weight == 0.0 {
        return Err(QsdError::SeriesNotConverged(0));
    }
    let mut cur: BTreeMap<usize, f64> = nu.iter().collect();
    let mut cur_absorbed = 0.0;
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    let mut out_absorbed = 0.0;
    let mut covered = 0.0;
    for k in 0..=SERIES_TERM_CAP {
        if k > 0 {
            weight *= mu / k as f64;
            // push cur one uniformized step forward
            let mut next: BTreeMap<usize, f64> = BTreeMap::new();
            for (&x, &w) in &cur {
                let row = kernel.row(x);
                cur_absorbed += w * row.absorb();
                for &(y, p) in row.targets() {
                    *next.entry(y).or_insert(0.0) += w * p;
                }
            }
            cur = next;
        }
        for (&x, &w) in &cur {
            *out.entry(x).or_insert(0.0) += weight * w;
        }
        out_absorbed += weight * cur_absorbed;
        covered += weight;
        if 1.0 - covered < spec.series_tol {
            // fold the Poisson tail onto the current state: bounded by tol
            return Ok(CtEvolution {
                on_s: out,
                absorbed: out_absorbed,
            });
        }
    }
    Err(QsdError::SeriesNotConverged(SERIES_TERM_CAP))
}

/// Conditioned continuous-time distribution at time `t`:
/// `nu U_t` restricted to `S` and renormalized.
pub fn ct_conditioned(nu: &Distribution, spec: &CtrwSpec) -> Result<Distribution> {
    let ev = ct_semigroup_apply(nu, spec)?;
    let survival: f64 = ev.on_s.values().sum();
    if survival <= SURVIVAL_FLOOR {
        return Err(QsdError::SurvivalUnderflow { steps: 1 });
    }
    Distribution::normalized(ev.on_s)
}

#[derive(Debug, Clone)]
pub struct CtLimitRow {
    pub r: f64,
    pub steps: usize,
    pub tv_to_ct: f64,
}

#[derive(Debug, Clone)]
pub struct CtLimitReport {
    pub rows: Vec<CtLimitRow>,
    pub ct: Distribution,
}

impl CtLimitReport {
    pub fn monotone_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].tv_to_ct <= w[0].tv_to_ct)
    }

    pub fn final_tv(&self) -> f64 {
        self.rows.last().map(|r| r.tv_to_ct).unwrap_or(0.0)
    }
}

/// For each `r`, runs the conditioned discrete walk `floor(t/(1-r))` steps
/// and reports its TV distance to the conditioned continuous-time
/// distribution at `t`. Report only; asserts nothing.
pub fn discrete_to_continuous_limit_check(
    nu: &Distribution,
    p: f64,
    q: f64,
    t: f64,
    r_sequence: &[f64],
    n: usize,
) -> Result<CtLimitReport> {
    // time is rescaled so each discrete step spans (1 - r); rates p, q are
    // normalized inside the family kernel, so normalize t accordingly
    let spec = CtrwSpec::new(p / (p + q), q / (p + q), t, n)?;
    let ct = ct_conditioned(nu, &spec)?;
    let mut rows = Vec::with_capacity(r_sequence.len());
    for &r in r_sequence {
        let k = discrete_family_kernel(p, q, r, n, TruncationMode::OverflowToAbsorption)?;
        // guard against t/(1-r) landing a hair below an integer
        let steps = (t / (1.0 - r) + 1e-9).floor() as usize;
        let evolved = evolve_conditioned(nu, &k, steps)?;
        rows.push(CtLimitRow {
            r,
            steps,
            tv_to_ct: evolved.tv_distance(&ct),
        });
    }
    Ok(CtLimitReport { rows, ct })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth_death::{bd_condition_bb2, bd_condition_bb3, minimal_qsd_closed_form, BdRates, BirthDeathSpec};
    use crate::order::dominates_total;

    #[test]
    fn family_kernel_rows() {
        let k = discrete_family_kernel(0.25, 0.75, 0.9, 5, TruncationMode::OverflowToAbsorption)
            .unwrap();
        assert!((k.transition(3, 2) - 0.075).abs() < 1e-15);
        assert!((k.transition(3, 3) - 0.9).abs() < 1e-15);
        assert!((k.transition(3, 4) - 0.025).abs() < 1e-15);
        let r0 = discrete_family_kernel(0.25, 0.75, 0.0, 5, TruncationMode::OverflowToAbsorption)
            .unwrap();
        let pq = crate::periodic::pq_walk_kernel(0.25, 0.75, 5, TruncationMode::OverflowToAbsorption)
            .unwrap();
        for x in 1..=5 {
            for y in 0..=5 {
                assert_eq!(r0.transition(x, y), pq.transition(x, y));
            }
        }
    }

    #[test]
    fn holding_restores_the_reduced_conditions() {
        // pq(1-r)^2 = 0.001875 <= r^2 = 0.81
        let r = 0.9;
        let spec = BirthDeathSpec::from_rates(BdRates {
            p: vec![0.025; 8],
            r: vec![r; 8],
            q: vec![0.075; 8],
        })
        .unwrap();
        assert!(bd_condition_bb2(&spec).holds);
        assert!(bd_condition_bb3(&spec).holds);
    }

    #[test]
    fn zero_time_is_identity() {
        let spec = CtrwSpec::new(0.25, 0.75, 0.0, 20).unwrap();
        let nu = Distribution::from_weights([(2, 0.5), (5, 0.5)].into()).unwrap();
        let ev = ct_semigroup_apply(&nu, &spec).unwrap();
        assert_eq!(ev.absorbed, 0.0);
        assert!(ct_conditioned(&nu, &spec).unwrap().tv_distance(&nu) < 1e-12);
    }

    #[test]
    fn small_time_absorption_is_q_t() {
        let q = 0.75;
        // first-order: absorbed = q t (1 - (p+q) t / 2 + O(t^2))
        let t = 1e-6;
        let spec = CtrwSpec::new(0.25, q, t, 20).unwrap();
        let ev = ct_semigroup_apply(&Distribution::delta(1), &spec).unwrap();
        assert!((ev.absorbed - q * t).abs() < 1e-6 * q * t);
        let t = 1e-4;
        let spec = CtrwSpec::new(0.25, q, t, 20).unwrap();
        let ev = ct_semigroup_apply(&Distribution::delta(1), &spec).unwrap();
        let second_order = q * t * t / 2.0; // (p + q) = 1
        assert!((ev.absorbed - q * t).abs() < 1.1 * second_order);
    }

    #[test]
    fn chapman_kolmogorov() {
        let n = 80;
        let nu = Distribution::delta(1);
        let full = CtrwSpec::new(0.25, 0.75, 3.0, n).unwrap();
        let ev_full = ct_semigroup_apply(&nu, &full).unwrap();
        let first = CtrwSpec::new(0.25, 0.75, 1.2, n).unwrap();
        let mid = ct_semigroup_apply(&nu, &first).unwrap();
        let second = CtrwSpec::new(0.25, 0.75, 1.8, n).unwrap();
        // push the sub-probability on-S part through the remaining time
        let mut composed: BTreeMap<usize, f64> = BTreeMap::new();
        for (&x, &w) in &mid.on_s {
            let ev = ct_semigroup_apply(&Distribution::delta(x), &second).unwrap();
            for (&y, &v) in &ev.on_s {
                *composed.entry(y).or_insert(0.0) += w * v;
            }
        }
        let mut err = 0.0;
        for (&y, &v) in &ev_full.on_s {
            err += (v - composed.get(&y).copied().unwrap_or(0.0)).abs();
        }
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn uniformization_rate_independence() {
        let nu = Distribution::delta(2);
        let a = CtrwSpec::new(0.25, 0.75, 2.5, 60).unwrap();
        let b = CtrwSpec::new(0.25, 0.75, 2.5, 60)
            .unwrap()
            .with_uniformization_rate(2.0)
            .unwrap();
        let da = ct_conditioned(&nu, &a).unwrap();
        let db = ct_conditioned(&nu, &b).unwrap();
        assert!(da.tv_distance(&db) < 1e-10);
    }

    #[test]
    fn minimal_qsd_is_invariant() {
        let (nu_min, _) = minimal_qsd_closed_form(1.0 / 3.0, 400);
        for t in [0.5, 2.0, 7.0] {
            let spec = CtrwSpec::new(0.25, 0.75, t, 400).unwrap();
            let out = ct_conditioned(&nu_min, &spec).unwrap();
            assert!(out.tv_distance(&nu_min) < 1e-8, "t={t}");
        }
    }

    #[test]
    fn conditioned_evolution_is_time_monotone() {
        let times = [0.3, 1.0, 2.5, 6.0, 10.0];
        let n = 300;
        let mut prev: Option<Distribution> = None;
        for t in times {
            let spec = CtrwSpec::new(0.25, 0.75, t, n).unwrap();
            let cur = ct_conditioned(&Distribution::delta(1), &spec).unwrap();
            if let Some(p) = &prev {
                assert!(dominates_total(p, &cur).holds, "t={t}");
            }
            prev = Some(cur);
        }
        // started anywhere else, the conditioned law dominates the delta_1 one
        let spec = CtrwSpec::new(0.25, 0.75, 2.0, n).unwrap();
        let from_one = ct_conditioned(&Distribution::delta(1), &spec).unwrap();
        for nu in [
            Distribution::delta(4),
            Distribution::from_weights([(1, 0.5), (6, 0.5)].into()).unwrap(),
        ] {
            let other = ct_conditioned(&nu, &spec).unwrap();
            assert!(dominates_total(&from_one, &other).holds);
        }
    }

    #[test]
    fn discrete_walks_converge_to_continuous_time() {
        let rep = discrete_to_continuous_limit_check(
            &Distribution::delta(1),
            0.25,
            0.75,
            2.0,
            &[0.5, 0.9, 0.99, 0.999],
            200,
        )
        .unwrap();
        assert_eq!(rep.rows.last().unwrap().steps, 2000);
        assert!(rep.monotone_decreasing(), "{:?}", rep.rows);
        assert!(rep.final_tv() < 1e-3);
    }

    #[test]
    fn qsd_has_zero_limit_distance_at_every_r() {
        let (nu_min, _) = minimal_qsd_closed_form(1.0 / 3.0, 400);
        let rep = discrete_to_continuous_limit_check(
            &nu_min,
            0.25,
            0.75,
            1.0,
            &[0.5, 0.9, 0.99],
            400,
        )
        .unwrap();
        for row in &rep.rows {
            assert!(row.tv_to_ct < 1e-8, "r={}", row.r);
        }
    }

    #[test]
    fn zero_time_limit_check_is_exact() {
        let rep = discrete_to_continuous_limit_check(
            &Distribution::delta(3),
            0.25,
            0.75,
            0.0,
            &[0.5, 0.9],
            50,
        )
        .unwrap();
        for row in &rep.rows {
            assert_eq!(row.steps, 0);
            assert!(row.tv_to_ct < 1e-15);
        }
    }
}
