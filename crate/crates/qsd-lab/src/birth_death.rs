//! Birth-and-death chains absorbed at 0: construction, the reduced
//! tridiagonal forms of the interior and last-site domination conditions,
//! and the one-parameter family of quasi-stationary distributions of the
//! constant-rate (delayed random walk) case.
//!
//! States move by at most one: `Q(x,x+1)=p_x`, `Q(x,x)=r_x`, `Q(x,x-1)=q_x`
//! with `q_1` absorbing. For constant rates with `lambda = p/q < 1` the
//! quasi-stationary distributions form a family indexed by `nu(1)` in
//! `(0, gamma]`, `gamma = (1-sqrt(lambda))^2`; the endpoint is the negative
//! binomial `nu_min(x) = gamma x sqrt(lambda)^(x-1)`, minimal both
//! stochastically and in survival mass.

use std::collections::BTreeMap;

use crate::dist::{Distribution, MASS_TOL};
use crate::error::{QsdError, Result};
use crate::kernel::{AbsorbedKernel, TruncationMode};
use crate::order::{dominates, PosetView};
use crate::semigroup::survival_mass;
use crate::space::StateSpace;

/// Per-state rates, 1-based via the accessors.
#[derive(Debug, Clone)]
pub struct BdRates {
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub q: Vec<f64>,
}

impl BdRates {
    pub fn n(&self) -> usize {
        self.p.len()
    }
}

#[derive(Debug, Clone)]
pub struct BirthDeathSpec {
    rates: BdRates,
}

impl BirthDeathSpec {
    /// Constant rates: the delayed random walk. Requires `p, r, q > 0`,
    /// `p + r + q = 1` and the downward drift `p < q`.
    pub fn constant(p: f64, r: f64, q: f64, n: usize) -> Result<Self> {
        if !(p > 0.0 && r > 0.0 && q > 0.0) {
            return Err(QsdError::InvalidRates(format!(
                "rates must be positive, got p={p}, r={r}, q={q}"
            )));
        }
        if (p + r + q - 1.0).abs() > MASS_TOL {
            return Err(QsdError::InvalidRates(format!(
                "rates must sum to 1, got {}",
                p + r + q
            )));
        }
        if p >= q {
            return Err(QsdError::InvalidRates(format!(
                "downward drift requires p < q, got p={p}, q={q}"
            )));
        }
        Self::from_rates(BdRates {
            p: vec![p; n],
            r: vec![r; n],
            q: vec![q; n],
        })
    }

    /// Per-state rates; each triple must be positive and sum to 1.
    pub fn from_rates(rates: BdRates) -> Result<Self> {
        let n = rates.n();
        if n == 0 || rates.r.len() != n || rates.q.len() != n {
            return Err(QsdError::InvalidRates(
                "rate vectors must be nonempty and of equal length".into(),
            ));
        }
        for x in 0..n {
            let (p, r, q) = (rates.p[x], rates.r[x], rates.q[x]);
            if !(p > 0.0 && r > 0.0 && q > 0.0) {
                return Err(QsdError::InvalidRates(format!(
                    "rates at state {} must be positive, got p={p}, r={r}, q={q}",
                    x + 1
                )));
            }
            if (p + r + q - 1.0).abs() > MASS_TOL {
                return Err(QsdError::InvalidRates(format!(
                    "rates at state {} must sum to 1, got {}",
                    x + 1,
                    p + r + q
                )));
            }
        }
        Ok(Self { rates })
    }

    pub fn n(&self) -> usize {
        self.rates.n()
    }

    pub fn rates(&self) -> &BdRates {
        &self.rates
    }

    pub fn p(&self, x: usize) -> f64 {
        self.rates.p[x - 1]
    }

    pub fn r(&self, x: usize) -> f64 {
        self.rates.r[x - 1]
    }

    pub fn q(&self, x: usize) -> f64 {
        self.rates.q[x - 1]
    }

    /// Tridiagonal kernel on `{1..N}`; the upward rate at `N` is redirected
    /// per the truncation mode.
    pub fn build_kernel(&self, mode: TruncationMode) -> AbsorbedKernel {
        let n = self.n();
        let rows = (1..=n)
            .map(|x| {
                vec![
                    (x - 1, self.q(x)), // x = 1 targets 0: absorption
                    (x, self.r(x)),
                    (x + 1, self.p(x)), // x = n overflows per mode
                ]
            })
            .collect();
        AbsorbedKernel::from_rows(StateSpace::total(n), rows, mode)
            .expect("spec invariants imply valid rows")
    }

    /// Rates of the truncated kernel itself: under overflow-to-hold the
    /// upward rate at `N` folds into the holding term; under
    /// overflow-to-absorption it leaves the rate triple (the row then
    /// absorbs `p_N` extra).
    pub fn effective_rates(&self, mode: TruncationMode) -> BdRates {
        let mut rates = self.rates.clone();
        let n = self.n();
        match mode {
            TruncationMode::OverflowToHold => {
                rates.r[n - 1] += rates.p[n - 1];
                rates.p[n - 1] = 0.0;
            }
            TruncationMode::OverflowToAbsorption => {
                rates.p[n - 1] = 0.0;
            }
        }
        rates
    }
}

/// Outcome of a reduced condition check.
#[derive(Debug, Clone, PartialEq)]
pub struct BdConditionReport {
    pub holds: bool,
    pub first_failing_y: Option<usize>,
}

/// Comparison slack for the reduced conditions; keeps exact-equality
/// boundary cases (such as `pq = r^2`) on the passing side.
const BD_COND_TOL: f64 = 1e-12;

/// Rate lookup with the conventions of the reduced conditions: `p_0 = 0`,
/// and indices above `N` either extend the last rate (the untruncated chain)
/// or vanish (the truncated kernel).
struct RateView<'a> {
    rates: &'a BdRates,
    extend: bool,
}

impl RateView<'_> {
    fn n(&self) -> usize {
        self.rates.n()
    }

    fn get(v: &[f64], x: usize, extend: bool) -> f64 {
        if x == 0 {
            0.0
        } else if x <= v.len() {
            v[x - 1]
        } else if extend {
            v[v.len() - 1]
        } else {
            0.0
        }
    }

    fn p(&self, x: usize) -> f64 {
        Self::get(&self.rates.p, x, self.extend)
    }

    fn r(&self, x: usize) -> f64 {
        Self::get(&self.rates.r, x, self.extend)
    }

    fn q(&self, x: usize) -> f64 {
        Self::get(&self.rates.q, x, self.extend)
    }
}

/// The interior-site condition in tridiagonal form: for every `y >= 2` the
/// two chains
///
/// ```text
/// p_{y-1}q_y / (r_{y-1}^2 + p_{y-1}q_y + q_{y-1}p_{y-2})
///   <= r_y q_y / (q_y r_{y-1} + r_y q_y)        <= C
///   <= p_{y-1}r_y / (p_{y-1}r_y + r_{y-1}p_{y-1}) <= C
/// C = (r_y^2 + p_y q_{y+1}) / (r_y^2 + p_y q_{y+1} + q_y p_{y-1})
/// ```
///
/// must hold, with the convention `p_0 = 0`.
fn bb2_on(view: &RateView) -> BdConditionReport {
    for y in 2..=view.n() {
        let (p2, p1, p0) = (view.p(y), view.p(y - 1), view.p(y - 2));
        let (r1, r0) = (view.r(y), view.r(y - 1));
        let (q2, q1, q0) = (view.q(y + 1), view.q(y), view.q(y - 1));
        let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { f64::NAN };
        let a = ratio(p1 * q1, r0 * r0 + p1 * q1 + q0 * p0);
        let b = ratio(r1 * q1, q1 * r0 + r1 * q1);
        let b2 = ratio(p1 * r1, p1 * r1 + r0 * p1);
        let c = ratio(r1 * r1 + p2 * q2, r1 * r1 + p2 * q2 + q1 * p1);
        // NaN denominators mean the corresponding pair has no positive
        // two-step mass and the comparison is vacuous.
        let le = |x: f64, y: f64| x.is_nan() || y.is_nan() || x <= y + BD_COND_TOL;
        if !(le(a, b) && le(b, c) && le(a, b2) && le(b2, c)) {
            return BdConditionReport {
                holds: false,
                first_failing_y: Some(y),
            };
        }
    }
    BdConditionReport {
        holds: true,
        first_failing_y: None,
    }
}

/// The last-site condition in tridiagonal form:
/// `p_1/(p_1+r_1) <= r_2 + p_2` and `p_{y-1} <= p_y + r_y` for `y >= 3`.
fn bb3_on(view: &RateView) -> BdConditionReport {
    for y in 2..=view.n() {
        let ok = if y == 2 {
            let den = view.p(1) + view.r(1);
            den <= 0.0 || view.p(1) / den <= view.r(2) + view.p(2) + BD_COND_TOL
        } else {
            view.p(y - 1) <= view.p(y) + view.r(y) + BD_COND_TOL
        };
        if !ok {
            return BdConditionReport {
                holds: false,
                first_failing_y: Some(y),
            };
        }
    }
    BdConditionReport {
        holds: true,
        first_failing_y: None,
    }
}

/// Interior-site condition on the untruncated chain (rates extended
/// constantly beyond `N`).
pub fn bd_condition_bb2(spec: &BirthDeathSpec) -> BdConditionReport {
    bb2_on(&RateView {
        rates: spec.rates(),
        extend: true,
    })
}

/// Interior-site condition on the truncated kernel's effective rates;
/// agrees exactly with the generic interior-site checker on
/// `spec.build_kernel(mode)`.
pub fn bd_condition_bb2_truncated(spec: &BirthDeathSpec, mode: TruncationMode) -> BdConditionReport {
    bb2_on(&RateView {
        rates: &spec.effective_rates(mode),
        extend: false,
    })
}

/// Last-site condition on the untruncated chain.
pub fn bd_condition_bb3(spec: &BirthDeathSpec) -> BdConditionReport {
    bb3_on(&RateView {
        rates: spec.rates(),
        extend: true,
    })
}

/// Last-site condition on the truncated kernel's effective rates.
pub fn bd_condition_bb3_truncated(spec: &BirthDeathSpec, mode: TruncationMode) -> BdConditionReport {
    bb3_on(&RateView {
        rates: &spec.effective_rates(mode),
        extend: false,
    })
}

/// `gamma = (1 - sqrt(lambda))^2`, the largest admissible `nu(1)`.
pub fn gamma(lambda: f64) -> f64 {
    (1.0 - lambda.sqrt()).powi(2)
}

/// The minimal quasi-stationary distribution in closed form: a negative
/// binomial with parameters 2 and `sqrt(lambda)`, truncated to `{1..N}` and
/// renormalized. Also returns the raw (pre-renormalization) mass deficit.
pub fn minimal_qsd_closed_form(lambda: f64, n: usize) -> (Distribution, f64) {
    let s = lambda.sqrt();
    let g = gamma(lambda);
    let mut w = BTreeMap::new();
    let mut total = 0.0;
    for x in 1..=n {
        let v = g * x as f64 * s.powi(x as i32 - 1);
        total += v;
        if v > 0.0 {
            w.insert(x, v);
        }
    }
    let d = Distribution::normalized(w).expect("positive weights for lambda in (0,1)");
    (d, 1.0 - total)
}

/// Forward three-term recursion for the fixed-point equation of constant
/// rates, from `nu(0) = 0`, `nu(1) = nu1`:
/// `nu(x+1) = (lambda + 1 - nu1) nu(x) - lambda nu(x-1)`.
///
/// Returns the raw (unnormalized) sequence for `x = 1..=n`. This is the
/// independent oracle for the closed forms; it is numerically reliable only
/// down to weights around 1e-13, where cancellation takes over.
pub fn qsd_recursion_solve(lambda: f64, nu1: f64, n: usize) -> Result<Vec<f64>> {
    if !(nu1 > 0.0) {
        return Err(QsdError::InvalidDistribution(format!(
            "nu(1) must be positive, got {nu1}"
        )));
    }
    let mut out = Vec::with_capacity(n);
    let (mut prev, mut cur) = (0.0f64, nu1);
    for x in 1..=n {
        if cur < 0.0 {
            return Err(QsdError::NegativeWeight(x));
        }
        out.push(cur);
        let next = (lambda + 1.0 - nu1) * cur - lambda * prev;
        prev = cur;
        cur = next;
    }
    Ok(out)
}

/// A member of the one-parameter family of quasi-stationary distributions.
#[derive(Debug, Clone)]
pub struct QsdFamilyPoint {
    pub nu1: f64,
    pub lambda: f64,
    /// `sqrt((nu1 - lambda - 1)^2 - 4 lambda)`; zero at the family endpoint.
    pub c: f64,
    pub weights: Distribution,
}

/// Closed form of the family member with first weight `nu1`, truncated to
/// `{1..N}`. At `nu1 = gamma` the two geometric bases coincide and the
/// closed form is the analytic limit, the minimal distribution.
pub fn cavender_family(lambda: f64, nu1: f64, n: usize) -> Result<QsdFamilyPoint> {
    let g = gamma(lambda);
    if !(nu1 > 0.0) {
        return Err(QsdError::InvalidDistribution(format!(
            "nu(1) must be positive, got {nu1}"
        )));
    }
    if nu1 > g + 1e-14 {
        // out of the family: the recursion exits the probability cone
        let witness = match qsd_recursion_solve(lambda, nu1, 10_000) {
            Err(QsdError::NegativeWeight(x)) => x,
            _ => 0,
        };
        return Err(QsdError::OutOfFamily {
            nu1,
            gamma: g,
            witness,
        });
    }
    let c_sq = (nu1 - lambda - 1.0).powi(2) - 4.0 * lambda;
    if c_sq <= 0.0 || (nu1 - g).abs() < 1e-14 {
        // removable singularity at the endpoint: return the analytic limit
        let (weights, _) = minimal_qsd_closed_form(lambda, n);
        return Ok(QsdFamilyPoint {
            nu1,
            lambda,
            c: 0.0,
            weights,
        });
    }
    let c = c_sq.sqrt();
    let alpha = (lambda + 1.0 - nu1 + c) / 2.0;
    let beta = (lambda + 1.0 - nu1 - c) / 2.0;
    let mut w = BTreeMap::new();
    for x in 1..=n {
        let v = nu1 / c * (alpha.powi(x as i32) - beta.powi(x as i32));
        if v > 0.0 {
            w.insert(x, v);
        }
    }
    Ok(QsdFamilyPoint {
        nu1,
        lambda,
        c,
        weights: Distribution::normalized(w)?,
    })
}

/// Smallest truncation `N` whose closed-form raw tail mass is below `tol`.
pub fn adaptive_truncation(lambda: f64, nu1: f64, tol: f64) -> usize {
    let g = gamma(lambda);
    // dominant geometric base of the family member
    let alpha = if nu1 >= g - 1e-14 {
        lambda.sqrt()
    } else {
        let c = ((nu1 - lambda - 1.0).powi(2) - 4.0 * lambda).sqrt();
        (lambda + 1.0 - nu1 + c) / 2.0
    };
    let mut n = 1usize;
    let mut tail_bound = f64::INFINITY;
    while tail_bound > tol && n < 1_000_000 {
        n += 1;
        // term(x) <= const (x+1) alpha^x; geometric-with-slope tail bound
        let term = (n as f64 + 1.0) * alpha.powi(n as i32);
        tail_bound = term / (1.0 - alpha).powi(2);
    }
    n
}

#[derive(Debug, Clone)]
pub struct MinimalityReport {
    /// `a(nu) <= a(candidate)` for every candidate.
    pub absorption_minimal: bool,
    /// `nu ≺ candidate` for every candidate.
    pub stochastically_minimal: bool,
    pub survival: f64,
    /// Indices of candidates failing either check.
    pub failures: Vec<usize>,
}

/// Checks minimality of `nu` among `candidates`, both in survival mass and
/// in stochastic order. Requires the monotone-absorption hypothesis
/// `Q(x,0) >= Q(x',0)` for `x <= x'`, under which the two notions agree.
pub fn minimal_qsd_check(
    nu: &Distribution,
    k: &AbsorbedKernel,
    candidates: &[Distribution],
) -> Result<MinimalityReport> {
    let n = k.n_states();
    for x in 1..n {
        if k.transition(x, 0) < k.transition(x + 1, 0) - MASS_TOL {
            return Err(QsdError::HypothesisFailed(format!(
                "Q(x,0) increases from x={x} to x={}",
                x + 1
            )));
        }
    }
    let view = PosetView::new(k.space().clone());
    let a = survival_mass(nu, k);
    let mut absorption_minimal = true;
    let mut stochastically_minimal = true;
    let mut failures = Vec::new();
    for (i, cand) in candidates.iter().enumerate() {
        let mut failed = false;
        if a > survival_mass(cand, k) + 1e-10 {
            absorption_minimal = false;
            failed = true;
        }
        if !dominates(nu, cand, &view)?.holds {
            stochastically_minimal = false;
            failed = true;
        }
        if failed {
            failures.push(i);
        }
    }
    Ok(MinimalityReport {
        absorption_minimal,
        stochastically_minimal,
        survival: a,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::qsd_residual;

    #[test]
    fn kernel_rows_match_rates() {
        let spec = BirthDeathSpec::constant(0.15, 0.55, 0.30, 5).unwrap();
        let k = spec.build_kernel(TruncationMode::OverflowToAbsorption);
        assert_eq!(k.transition(1, 0), 0.30);
        assert_eq!(k.transition(1, 1), 0.55);
        assert_eq!(k.transition(1, 2), 0.15);
        assert_eq!(k.transition(3, 2), 0.30);
        // overflow at the top goes to absorption
        assert_eq!(k.transition(5, 0), 0.15);
        let kh = spec.build_kernel(TruncationMode::OverflowToHold);
        assert!((kh.transition(5, 5) - 0.70).abs() < 1e-15);
    }

    #[test]
    fn single_state_truncation() {
        let spec = BirthDeathSpec::constant(0.15, 0.55, 0.30, 1).unwrap();
        let k = spec.build_kernel(TruncationMode::OverflowToHold);
        assert_eq!(k.transition(1, 0), 0.30);
        assert!((k.transition(1, 1) - 0.70).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid_rates() {
        assert!(BirthDeathSpec::constant(0.25, 0.0, 0.75, 5).is_err()); // r = 0
        assert!(BirthDeathSpec::constant(0.4, 0.3, 0.3, 5).is_err()); // p >= q
        assert!(BirthDeathSpec::constant(0.2, 0.2, 0.2, 5).is_err()); // sum != 1
    }

    #[test]
    fn bb2_constant_rate_examples() {
        // pq = 0.045 <= r^2 = 0.3025
        let good = BirthDeathSpec::constant(0.15, 0.55, 0.30, 10).unwrap();
        assert!(bd_condition_bb2(&good).holds);
        // pq = 0.12 > r^2 = 0.09: pq/(pq+r^2) = 0.5714 > 1/2, worst case y=2
        let bad = BirthDeathSpec::constant(0.3, 0.3, 0.4, 10).unwrap();
        let rep = bd_condition_bb2(&bad);
        assert!(!rep.holds);
        assert_eq!(rep.first_failing_y, Some(2));
    }

    #[test]
    fn bb2_equality_boundary_passes() {
        // p = q = r = 1/3: pq = r^2 exactly, 1/2 <= 1/2
        let t = 1.0 / 3.0;
        let spec = BirthDeathSpec::from_rates(BdRates {
            p: vec![t; 8],
            r: vec![t; 8],
            q: vec![t; 8],
        })
        .unwrap();
        assert!(bd_condition_bb2(&spec).holds);
        assert!(bd_condition_bb3(&spec).holds);
    }

    #[test]
    fn bb3_constant_and_constructed_violation() {
        let good = BirthDeathSpec::constant(0.15, 0.55, 0.30, 10).unwrap();
        assert!(bd_condition_bb3(&good).holds);
        // p_2 = 0.8 > p_3 + r_3 = 0.2: fails at y = 3
        let spec = BirthDeathSpec::from_rates(BdRates {
            p: vec![0.2, 0.8, 0.1, 0.2],
            r: vec![0.4, 0.1, 0.1, 0.4],
            q: vec![0.4, 0.1, 0.8, 0.4],
        })
        .unwrap();
        let rep = bd_condition_bb3(&spec);
        assert!(!rep.holds);
        assert_eq!(rep.first_failing_y, Some(3));
    }

    #[test]
    fn truncated_conditions_match_generic_checkers() {
        use crate::holley::{check_condition_b, check_condition_c};
        let view = |n| PosetView::new(StateSpace::total(n));
        let specs = vec![
            BirthDeathSpec::constant(0.15, 0.55, 0.30, 8).unwrap(),
            BirthDeathSpec::constant(0.3, 0.3, 0.4, 8).unwrap(),
            BirthDeathSpec::from_rates(BdRates {
                p: vec![0.2, 0.8, 0.1, 0.2],
                r: vec![0.4, 0.1, 0.1, 0.4],
                q: vec![0.4, 0.1, 0.8, 0.4],
            })
            .unwrap(),
        ];
        for spec in &specs {
            let mode = TruncationMode::OverflowToHold;
            let k = spec.build_kernel(mode);
            let v = view(spec.n());
            assert_eq!(
                bd_condition_bb2_truncated(spec, mode).holds,
                check_condition_b(&k, &k, &v, None).unwrap().holds
            );
            assert_eq!(
                bd_condition_bb3_truncated(spec, mode).holds,
                check_condition_c(&k, &k, &v, None).unwrap().holds
            );
        }
    }

    #[test]
    fn minimal_closed_form_values() {
        let lambda = 1.0 / 3.0;
        let (nu, deficit) = minimal_qsd_closed_form(lambda, 400);
        assert!((nu.get(1) - 0.1786327).abs() < 1e-6);
        assert!((nu.get(2) - 0.2062674).abs() < 1e-6);
        assert!(deficit.abs() < 1e-12);
        // fixed point of the lambda = 1/3 delayed-walk kernel
        let spec = BirthDeathSpec::constant(0.2, 0.2, 0.6, 400).unwrap();
        let k = spec.build_kernel(TruncationMode::OverflowToHold);
        assert!(qsd_residual(&nu, &k) < 1e-10);
    }

    #[test]
    fn minimal_degenerates_to_delta_one() {
        let (nu, _) = minimal_qsd_closed_form(1e-12, 50);
        assert!(nu.tv_distance(&Distribution::delta(1)) < 1e-5);
    }

    #[test]
    fn recursion_matches_closed_forms() {
        let lambda = 1.0 / 3.0;
        let g = gamma(lambda);
        // endpoint: against the minimal closed form
        let rec = qsd_recursion_solve(lambda, g, 60).unwrap();
        let s = lambda.sqrt();
        for x in 1..=60 {
            let closed = g * x as f64 * s.powi(x as i32 - 1);
            if closed > 1e-8 {
                assert!((rec[x - 1] - closed).abs() < 1e-10, "x={x}");
            }
        }
        // interior point: against the two-geometric closed form
        let nu1 = 0.1;
        let fam = cavender_family(lambda, nu1, 60).unwrap();
        assert!((fam.c - 0.4333333).abs() < 1e-6);
        let rec = qsd_recursion_solve(lambda, nu1, 60).unwrap();
        let alpha = (lambda + 1.0 - nu1 + fam.c) / 2.0;
        let beta = (lambda + 1.0 - nu1 - fam.c) / 2.0;
        for x in 1..=60 {
            let closed = nu1 / fam.c * (alpha.powi(x as i32) - beta.powi(x as i32));
            if closed > 1e-8 {
                assert!((rec[x - 1] - closed).abs() < 1e-10, "x={x}");
            }
        }
    }

    #[test]
    fn family_endpoint_is_minimal_and_beyond_is_rejected() {
        let lambda = 1.0 / 3.0;
        let g = gamma(lambda);
        let fam = cavender_family(lambda, g, 400).unwrap();
        let (nu_min, _) = minimal_qsd_closed_form(lambda, 400);
        assert!(fam.weights.tv_distance(&nu_min) < 1e-10);
        let err = cavender_family(lambda, g + 0.01, 400).unwrap_err();
        match err {
            QsdError::OutOfFamily { witness, .. } => assert!(witness > 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn family_members_are_fixed_points() {
        let lambda = 1.0 / 3.0;
        for nu1 in [0.05, 0.1, 0.15, gamma(lambda)] {
            let n = adaptive_truncation(lambda, nu1, 1e-10);
            let fam = cavender_family(lambda, nu1, n).unwrap();
            let spec = BirthDeathSpec::constant(0.2, 0.2, 0.6, n).unwrap();
            let k = spec.build_kernel(TruncationMode::OverflowToHold);
            assert!(qsd_residual(&fam.weights, &k) < 1e-8, "nu1={nu1}, n={n}");
        }
    }

    #[test]
    fn family_is_likelihood_ratio_ordered() {
        // larger nu(1) gives a nonincreasing weight ratio against a smaller
        // one, hence stochastic domination of the former by the latter
        let lambda = 1.0 / 3.0;
        let view = PosetView::new(StateSpace::total(300));
        let points: Vec<Distribution> = [0.05, 0.1, 0.15, gamma(lambda)]
            .iter()
            .map(|&nu1| cavender_family(lambda, nu1, 300).unwrap().weights)
            .collect();
        for w in points.windows(2) {
            let (lo, hi) = (&w[0], &w[1]); // hi has the larger nu(1)
            let mut prev = f64::INFINITY;
            for x in 1..=60 {
                let ratio = hi.get(x) / lo.get(x);
                assert!(ratio <= prev + 1e-12, "ratio increased at x={x}");
                prev = ratio;
            }
            assert!(dominates(hi, lo, &view).unwrap().holds);
        }
    }

    #[test]
    fn minimality_report_for_the_family() {
        let lambda = 1.0 / 3.0;
        let n = 400;
        let spec = BirthDeathSpec::constant(0.2, 0.2, 0.6, n).unwrap();
        let k = spec.build_kernel(TruncationMode::OverflowToHold);
        let (nu_min, _) = minimal_qsd_closed_form(lambda, n);
        let candidates: Vec<Distribution> = [0.03, 0.07, 0.1, 0.13, 0.16]
            .iter()
            .map(|&nu1| cavender_family(lambda, nu1, n).unwrap().weights)
            .collect();
        let rep = minimal_qsd_check(&nu_min, &k, &candidates).unwrap();
        assert!(rep.absorption_minimal);
        assert!(rep.stochastically_minimal);
        assert!(rep.failures.is_empty());
        // trivial pass against itself
        let rep = minimal_qsd_check(&nu_min, &k, std::slice::from_ref(&nu_min)).unwrap();
        assert!(rep.absorption_minimal && rep.stochastically_minimal);
    }

    #[test]
    fn minimality_hypothesis_is_enforced() {
        // absorption increasing in x breaks the hypothesis
        let k = AbsorbedKernel::from_rows(
            StateSpace::total(3),
            vec![
                vec![(1, 0.5), (2, 0.5)],
                vec![(0, 0.2), (1, 0.4), (3, 0.4)],
                vec![(0, 0.6), (2, 0.4)],
            ],
            TruncationMode::OverflowToHold,
        )
        .unwrap();
        let nu = Distribution::delta(1);
        assert!(matches!(
            minimal_qsd_check(&nu, &k, &[nu.clone()]),
            Err(QsdError::HypothesisFailed(_))
        ));
    }
}
