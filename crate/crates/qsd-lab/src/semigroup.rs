//! The conditioned semigroup `T_n`, survival mass, the qsd fixed-point
//! residual, and the Yaglom iteration.
//!
//! `nu T_n(y) = nu Q^n(y) / (1 - nu Q^n(0))`. Since `T` is a semigroup,
//! iterating the one-step map `T_1` yields `T_n`; renormalizing after every
//! step avoids the exponential underflow of raw `Q^n` mass, and the per-step
//! survival masses are logged so the cumulative survival is recoverable.

use crate::dist::Distribution;
use crate::error::{QsdError, Result};
use crate::kernel::AbsorbedKernel;

/// Below this one-step survival the conditioning is numerically meaningless.
pub const SURVIVAL_FLOOR: f64 = 1e-300;
/// Default residual tolerance.
pub const RESIDUAL_TOL: f64 = 1e-10;
/// Default stopping tolerance for the Yaglom iteration.
pub const ITERATION_TOL: f64 = 1e-8;

/// One application of `T_1`: push forward, drop the absorbed mass, and
/// renormalize. Also returns the one-step survival mass `a(nu)`.
pub fn conditioned_step(nu: &Distribution, k: &AbsorbedKernel) -> Result<(Distribution, f64)> {
    let (on_s, _) = k.push_forward(nu);
    let survival: f64 = on_s.values().sum();
    if survival <= SURVIVAL_FLOOR {
        return Err(QsdError::SurvivalUnderflow { steps: 1 });
    }
    Ok((Distribution::normalized(on_s)?, survival))
}

/// `nu T_n` by `n` repeated single-step conditionings.
pub fn evolve_conditioned(nu: &Distribution, k: &AbsorbedKernel, n: usize) -> Result<Distribution> {
    let mut cur = nu.clone();
    for step in 0..n {
        cur = conditioned_step(&cur, k)
            .map_err(|_| QsdError::SurvivalUnderflow { steps: step + 1 })?
            .0;
    }
    Ok(cur)
}

/// `a(nu) = 1 - nu Q(0)`, the mass staying in `S` after one step.
pub fn survival_mass(nu: &Distribution, k: &AbsorbedKernel) -> f64 {
    1.0 - nu.iter().map(|(x, w)| w * k.transition(x, 0)).sum::<f64>()
}

/// l1 norm of the qsd fixed-point defect
/// `nu(y) - sum_x nu(x) [Q(x,y) + Q(x,0) nu(y)]`.
///
/// Zero (up to tolerance) iff `nu` is a qsd of the kernel.
pub fn qsd_residual(nu: &Distribution, k: &AbsorbedKernel) -> f64 {
    let (on_s, _) = k.push_forward(nu);
    let absorbed = 1.0 - on_s.values().sum::<f64>();
    let mut acc = 0.0;
    for (y, w) in nu.iter() {
        let pushed = on_s.get(&y).copied().unwrap_or(0.0);
        acc += (w - pushed - absorbed * w).abs();
    }
    for (&y, &pushed) in &on_s {
        if nu.get(y) == 0.0 {
            acc += pushed;
        }
    }
    acc
}

#[derive(Debug, Clone)]
pub struct YaglomOptions {
    pub max_n: usize,
    /// Stop when the TV distance between consecutive iterates falls below.
    pub tol: f64,
    /// Keep every iterate (memory-heavy; tiny instances only).
    pub record_history: bool,
}

impl Default for YaglomOptions {
    fn default() -> Self {
        Self {
            max_n: 5000,
            tol: ITERATION_TOL,
            record_history: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct YaglomReport {
    pub limit: Distribution,
    pub steps: usize,
    pub converged: bool,
    /// TV between the last two iterates.
    pub last_step_tv: f64,
    /// Fixed-point residual of the final iterate.
    pub residual: f64,
    /// Heuristic flag: the consecutive-step TV stayed bounded away from zero
    /// over the final window, as happens for periodic chains. Never asserted
    /// as a theorem.
    pub oscillation_detected: bool,
    /// `a(nu_k)` for each step taken; the cumulative product recovers the raw
    /// survival probability `1 - nu Q^n(0)`.
    pub survival_log: Vec<f64>,
    /// Consecutive-step TV distances.
    pub tv_log: Vec<f64>,
    pub history: Vec<Distribution>,
}

/// Iterates `T_1` until consecutive iterates are `tol`-close in TV or `max_n`
/// is reached.
pub fn yaglom_iterate(
    nu: &Distribution,
    k: &AbsorbedKernel,
    opts: &YaglomOptions,
) -> Result<YaglomReport> {
    let mut cur = nu.clone();
    let mut survival_log = Vec::new();
    let mut tv_log = Vec::new();
    let mut history = Vec::new();
    if opts.record_history {
        history.push(cur.clone());
    }
    let mut converged = false;
    let mut steps = 0;
    let mut last_tv = f64::INFINITY;
    while steps < opts.max_n {
        let (next, a) = conditioned_step(&cur, k)
            .map_err(|_| QsdError::SurvivalUnderflow { steps: steps + 1 })?;
        steps += 1;
        last_tv = next.tv_distance(&cur);
        survival_log.push(a);
        tv_log.push(last_tv);
        if opts.record_history {
            history.push(next.clone());
        }
        cur = next;
        if last_tv <= opts.tol {
            converged = true;
            break;
        }
    }
    let oscillation_detected = if converged {
        false
    } else {
        let window = &tv_log[tv_log.len().saturating_sub(16)..];
        !window.is_empty()
            && window
                .iter()
                .fold(f64::INFINITY, |m, &v| m.min(v))
                > 1000.0 * opts.tol
    };
    let residual = qsd_residual(&cur, k);
    Ok(YaglomReport {
        limit: cur,
        steps,
        converged,
        last_step_tv: last_tv,
        residual,
        oscillation_detected,
        survival_log,
        tv_log,
        history,
    })
}
