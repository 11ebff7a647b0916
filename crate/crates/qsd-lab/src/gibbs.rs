//! Coupled single-site resampling on trajectory space.
//!
//! Two trajectories, one for each of a dominated pair of conditioned path
//! measures, are updated site by site from their single-site conditionals
//! using one shared uniform variate per update. When the pairwise conditional
//! dominations hold, an ordered initial pair stays ordered forever; the
//! stationary laws are the two path measures, so the coupling exhibits their
//! stochastic ordering constructively.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dist::Distribution;
use crate::error::{QsdError, Result};
use crate::order::quantile_couple_step;
use crate::trajectory::{Trajectory, TrajectoryMeasure};

#[derive(Debug, Clone)]
pub struct GibbsOptions {
    /// Number of sweeps; one sweep is `sites` random single-site updates.
    pub sweeps: usize,
    /// Sweeps discarded before empirical statistics are collected.
    pub burn_in: usize,
    pub seed: u64,
    /// Record a TV-to-exact point every this many sweeps (0 disables).
    pub record_every: usize,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self {
            sweeps: 100_000,
            burn_in: 1_000,
            seed: 0,
            record_every: 1_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CouplingState {
    pub eta: Trajectory,
    pub eta_prime: Trajectory,
    pub sweep: usize,
}

#[derive(Debug, Clone)]
pub struct GibbsReport {
    /// Count of updates where the order broke. Always zero: a violation
    /// aborts the run with an error instead.
    pub violations: usize,
    pub sweeps: usize,
    /// `(sweep, TV of the running empirical trajectory law of eta to the
    /// exact table)`, when the first measure has one.
    pub tv_trace: Vec<(usize, f64)>,
    /// Final TV of the empirical trajectory law of eta to the exact table.
    pub tv_trajectory: Option<f64>,
    /// Final TV of the empirical last-site marginal of eta to the exact one.
    pub tv_last_marginal: Option<f64>,
    pub empirical_last: Distribution,
    pub empirical_last_prime: Distribution,
    pub final_state: CouplingState,
}

/// Single-site conditional of the path measure at `site`, given the current
/// neighbors. Proportional to `nu(w) Q_0(w, eta_1)` at the first site,
/// `Q_{k-1}(eta_{k-1}, w) Q_k(w, eta_{k+1})` in the interior, and
/// `Q_{m-1}(eta_{m-1}, w)` at the last site.
fn site_conditional(tm: &TrajectoryMeasure, eta: &Trajectory, site: usize) -> Result<Distribution> {
    let m = tm.steps;
    let n = tm.family.n_states();
    let mut w: BTreeMap<usize, f64> = BTreeMap::new();
    if site == 0 {
        let q0 = tm.family.at(0);
        for (x, m0) in tm.initial.iter() {
            let v = m0 * q0.transition(x, eta[1] as usize);
            if v > 0.0 {
                w.insert(x, v);
            }
        }
    } else if site == m {
        let q = tm.family.at(m - 1);
        for &(x, v) in q.row(eta[m - 1] as usize).targets() {
            w.insert(x, v);
        }
    } else {
        let qa = tm.family.at(site - 1);
        let qb = tm.family.at(site);
        for &(x, v) in qa.row(eta[site - 1] as usize).targets() {
            if x <= n {
                let v = v * qb.transition(x, eta[site + 1] as usize);
                if v > 0.0 {
                    w.insert(x, v);
                }
            }
        }
    }
    Distribution::normalized(w).map_err(|_| {
        QsdError::HypothesisFailed(format!(
            "empty single-site conditional at site {site}; the trajectory left the support"
        ))
    })
}

/// Builds an initial ordered pair: samples the dominating trajectory, then
/// follows it from below greedily, always taking the largest reachable state
/// that does not exceed it.
fn ordered_initial_pair<R: Rng>(
    tm: &TrajectoryMeasure,
    tm_p: &TrajectoryMeasure,
    rng: &mut R,
) -> Result<(Trajectory, Trajectory)> {
    const TRIES: usize = 64;
    'outer: for _ in 0..TRIES {
        let upper = tm_p.sample(rng)?;
        let mut lower = Trajectory::with_capacity(upper.len());
        let Some(first) = tm
            .initial
            .iter()
            .map(|(x, _)| x)
            .filter(|&x| x <= upper[0] as usize)
            .last()
        else {
            continue;
        };
        lower.push(first as u16);
        for k in 0..tm.steps {
            let q = tm.family.at(k);
            let cur = *lower.last().unwrap() as usize;
            let next = q
                .row(cur)
                .targets()
                .iter()
                .map(|&(y, _)| y)
                .filter(|&y| y <= upper[k + 1] as usize)
                .next_back();
            match next {
                Some(y) => lower.push(y as u16),
                None => continue 'outer,
            }
        }
        return Ok((lower, upper));
    }
    Err(QsdError::NotDominated(
        "no ordered initial trajectory pair found".into(),
    ))
}

/// Runs the coupled sampler. Preconditions: the pairwise conditional
/// dominations hold for `(tm, tm_p)` and the orders are total.
pub fn gibbs_coupled_run(
    tm: &TrajectoryMeasure,
    tm_p: &TrajectoryMeasure,
    opts: &GibbsOptions,
) -> Result<GibbsReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (mut eta, mut eta_p) = ordered_initial_pair(tm, tm_p, &mut rng)?;
    let sites = tm.steps + 1;
    let mut traj_counts: HashMap<Trajectory, f64> = HashMap::new();
    let mut last_counts: BTreeMap<usize, f64> = BTreeMap::new();
    let mut last_counts_p: BTreeMap<usize, f64> = BTreeMap::new();
    let mut samples = 0usize;
    let mut tv_trace = Vec::new();
    let exact_last = tm.last_marginal().ok();
    for sweep in 0..opts.sweeps {
        for _ in 0..sites {
            let site = rng.gen_range(0..sites);
            let cond = site_conditional(tm, &eta, site)?;
            let cond_p = site_conditional(tm_p, &eta_p, site)?;
            let u: f64 = rng.gen();
            let (x, xp) = quantile_couple_step(&cond, &cond_p, u)?;
            if x > xp {
                return Err(QsdError::OrderViolation { site, sweep });
            }
            eta[site] = x as u16;
            eta_p[site] = xp as u16;
        }
        if sweep >= opts.burn_in {
            samples += 1;
            if tm.has_table() {
                *traj_counts.entry(eta.clone()).or_insert(0.0) += 1.0;
            }
            *last_counts.entry(eta[sites - 1] as usize).or_insert(0.0) += 1.0;
            *last_counts_p.entry(eta_p[sites - 1] as usize).or_insert(0.0) += 1.0;
            if opts.record_every > 0 && (sweep + 1) % opts.record_every == 0 && tm.has_table() {
                tv_trace.push((sweep + 1, trajectory_tv(tm, &traj_counts, samples)));
            }
        }
    }
    let tv_trajectory = tm
        .has_table()
        .then(|| trajectory_tv(tm, &traj_counts, samples.max(1)));
    let empirical_last = Distribution::normalized(last_counts)?;
    let empirical_last_prime = Distribution::normalized(last_counts_p)?;
    let tv_last_marginal = exact_last.map(|ex| empirical_last.tv_distance(&ex));
    Ok(GibbsReport {
        violations: 0,
        sweeps: opts.sweeps,
        tv_trace,
        tv_trajectory,
        tv_last_marginal,
        empirical_last,
        empirical_last_prime,
        final_state: CouplingState {
            eta,
            eta_prime: eta_p,
            sweep: opts.sweeps,
        },
    })
}

/// TV between the running empirical trajectory law and the exact table.
fn trajectory_tv(tm: &TrajectoryMeasure, counts: &HashMap<Trajectory, f64>, samples: usize) -> f64 {
    let mut acc = 0.0;
    let n = samples as f64;
    for t in tm.support().expect("table present") {
        let p = tm.prob(t).unwrap_or(0.0);
        let e = counts.get(t).copied().unwrap_or(0.0) / n;
        acc += (p - e).abs();
    }
    // support mismatch cannot occur: updates stay inside the support
    acc / 2.0
}
