//! The conditioned law of nonabsorbed trajectories over a finite window,
//! exact for tiny instances and sampled otherwise.
//!
//! For a window of `steps` transitions the measure weights a path
//! `(x_0, .., x_steps)` by `nu(x_0) Q_0(x_0,x_1) ... / (1 - P(absorbed))`,
//! i.e. the chain conditioned on staying in `S` throughout the window.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::Rng;

use crate::dist::Distribution;
use crate::error::{QsdError, Result};
use crate::kernel::AbsorbedKernel;

/// Trajectories are short; 16-bit states keep the exact tables compact.
pub type Trajectory = Vec<u16>;

/// A homogeneous kernel or a per-step family `Q_k`.
#[derive(Debug, Clone)]
pub enum KernelFamily {
    Homogeneous(AbsorbedKernel),
    PerStep(Vec<AbsorbedKernel>),
}

impl KernelFamily {
    /// Kernel used for the transition from site `k` to site `k+1`.
    pub fn at(&self, k: usize) -> &AbsorbedKernel {
        match self {
            KernelFamily::Homogeneous(q) => q,
            KernelFamily::PerStep(qs) => &qs[k],
        }
    }

    pub fn n_states(&self) -> usize {
        match self {
            KernelFamily::Homogeneous(q) => q.n_states(),
            KernelFamily::PerStep(qs) => qs[0].n_states(),
        }
    }
}

/// Default cap on exact-table support size.
pub const EXACT_TABLE_CAP: usize = 2_000_000;

#[derive(Debug, Clone)]
pub struct TrajectoryMeasure {
    pub initial: Distribution,
    pub family: KernelFamily,
    /// Number of transitions in the window; sites are `0..=steps`.
    pub steps: usize,
    table: Option<ExactTable>,
}

#[derive(Debug, Clone)]
struct ExactTable {
    probs: HashMap<Trajectory, f64>,
    /// `1 - nu Q^steps(0)`, the normalizer of the raw path weights.
    survival: f64,
    /// cumulative list for inverse-CDF sampling, built lazily with the table
    cumulative: Vec<(Trajectory, f64)>,
}

impl TrajectoryMeasure {
    pub fn new(initial: Distribution, family: KernelFamily, steps: usize) -> Self {
        Self {
            initial,
            family,
            steps,
            table: None,
        }
    }

    /// Enumerates the exact table; fails with `InstanceTooLarge` beyond `cap`.
    pub fn with_exact_table(mut self, cap: usize) -> Result<Self> {
        let mut probs: HashMap<Trajectory, f64> = HashMap::new();
        let mut stack: Vec<(Trajectory, f64)> = self
            .initial
            .iter()
            .map(|(x, w)| (vec![x as u16], w))
            .collect();
        while let Some((path, w)) = stack.pop() {
            if path.len() == self.steps + 1 {
                probs.insert(path, w);
                if probs.len() > cap {
                    return Err(QsdError::InstanceTooLarge(format!(
                        "exact trajectory table exceeds cap {cap}"
                    )));
                }
                continue;
            }
            let k = path.len() - 1;
            let q = self.family.at(k);
            let cur = *path.last().unwrap() as usize;
            for &(y, p) in q.row(cur).targets() {
                if p > 0.0 {
                    let mut next = path.clone();
                    next.push(y as u16);
                    stack.push((next, w * p));
                }
            }
        }
        // all float accumulation runs in sorted trajectory order so results
        // are identical across processes despite the hash map
        let mut entries: Vec<(Trajectory, f64)> = probs.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let survival: f64 = entries.iter().map(|&(_, w)| w).sum();
        if survival <= 0.0 {
            return Err(QsdError::SurvivalUnderflow { steps: self.steps });
        }
        let mut probs = HashMap::with_capacity(entries.len());
        let mut cumulative = Vec::with_capacity(entries.len());
        let mut acc = 0.0;
        for (t, w) in entries {
            let w = w / survival;
            acc += w;
            cumulative.push((t.clone(), acc));
            probs.insert(t, w);
        }
        self.table = Some(ExactTable {
            probs,
            survival,
            cumulative,
        });
        Ok(self)
    }

    pub fn has_table(&self) -> bool {
        self.table.is_some()
    }

    /// Probability of a trajectory (exact table required).
    pub fn prob(&self, traj: &[u16]) -> Option<f64> {
        self.table
            .as_ref()
            .map(|t| t.probs.get(traj).copied().unwrap_or(0.0))
    }

    /// Survival probability over the window, `1 - nu Q^steps(0)`.
    pub fn window_survival(&self) -> Option<f64> {
        self.table.as_ref().map(|t| t.survival)
    }

    /// Support in sorted trajectory order.
    pub fn support(&self) -> Option<impl Iterator<Item = &Trajectory>> {
        self.table
            .as_ref()
            .map(|t| t.cumulative.iter().map(|(traj, _)| traj))
    }

    pub fn support_size(&self) -> Option<usize> {
        self.table.as_ref().map(|t| t.probs.len())
    }

    /// Marginal at a site (exact table required).
    pub fn marginal(&self, site: usize) -> Result<Distribution> {
        let table = self
            .table
            .as_ref()
            .ok_or_else(|| QsdError::InstanceTooLarge("marginal needs the exact table".into()))?;
        let mut w = std::collections::BTreeMap::new();
        // sorted order keeps the per-state sums deterministic
        for (traj, _) in &table.cumulative {
            let p = table.probs[traj.as_slice()];
            *w.entry(traj[site] as usize).or_insert(0.0) += p;
        }
        Distribution::normalized(w)
    }

    pub fn last_marginal(&self) -> Result<Distribution> {
        self.marginal(self.steps)
    }

    /// Samples a trajectory: exact inverse-CDF when the table is available,
    /// otherwise forward sampling with rejection on absorption (bias-free).
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Result<Trajectory> {
        if let Some(table) = &self.table {
            let u: f64 = rng.gen();
            let idx = table
                .cumulative
                .partition_point(|(_, c)| *c < u)
                .min(table.cumulative.len() - 1);
            return Ok(table.cumulative[idx].0.clone());
        }
        const MAX_TRIES: usize = 1_000_000;
        'attempt: for _ in 0..MAX_TRIES {
            let u: f64 = rng.gen();
            let mut cur = self.initial.quantile(u);
            let mut path = vec![cur as u16];
            for k in 0..self.steps {
                let q = self.family.at(k);
                let row = q.row(cur);
                let mut u: f64 = rng.gen();
                let mut chosen = None;
                u -= row.absorb();
                if u < 0.0 {
                    continue 'attempt; // absorbed: reject the path
                }
                for &(y, p) in row.targets() {
                    u -= p;
                    if u <= 0.0 {
                        chosen = Some(y);
                        break;
                    }
                }
                cur = chosen.unwrap_or_else(|| row.targets().last().unwrap().0);
                path.push(cur as u16);
            }
            return Ok(path);
        }
        Err(QsdError::SurvivalUnderflow { steps: self.steps })
    }
}

/// Irreducibility of the trajectory measure: the support is connected under
/// single-coordinate changes.
///
/// Analytic shortcut: when every state holds and moves to its nearest
/// neighbors with positive probability (birth-and-death chains), the support
/// is connected without enumeration. Otherwise the exact table is explored by
/// BFS; with neither available the instance is too large.
pub fn check_trajectory_irreducibility(tm: &TrajectoryMeasure) -> Result<bool> {
    let shortcut = match &tm.family {
        KernelFamily::Homogeneous(q) => q.has_positive_hold_and_neighbors(),
        KernelFamily::PerStep(qs) => qs.iter().all(|q| q.has_positive_hold_and_neighbors()),
    };
    if shortcut {
        return Ok(true);
    }
    let Some(support) = tm.support() else {
        return Err(QsdError::InstanceTooLarge(
            "irreducibility needs the exact table or the nearest-neighbor shortcut".into(),
        ));
    };
    let support: HashSet<&Trajectory> = support.collect();
    let Some(&start) = support.iter().next() else {
        return Ok(true);
    };
    let n = tm.family.n_states();
    let mut seen: HashSet<&Trajectory> = HashSet::new();
    let mut queue: VecDeque<&Trajectory> = VecDeque::new();
    seen.insert(start);
    queue.push_back(start);
    let mut probe = start.clone();
    while let Some(t) = queue.pop_front() {
        probe.copy_from_slice(t);
        for site in 0..t.len() {
            let orig = probe[site];
            for w in 1..=n as u16 {
                if w == orig {
                    continue;
                }
                probe[site] = w;
                if let Some(found) = support.get(&probe) {
                    if !seen.contains(*found) {
                        seen.insert(found);
                        queue.push_back(found);
                    }
                }
            }
            probe[site] = orig;
        }
        if probe.len() != t.len() {
            probe = t.clone();
        }
    }
    Ok(seen.len() == support.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::birth_death::BirthDeathSpec;
    use crate::kernel::TruncationMode;
    use crate::periodic::pq_walk_kernel;
    use crate::semigroup::evolve_conditioned;

    fn delayed(n: usize) -> AbsorbedKernel {
        BirthDeathSpec::constant(0.15, 0.55, 0.30, n)
            .unwrap()
            .build_kernel(TruncationMode::OverflowToHold)
    }

    #[test]
    fn last_marginal_matches_conditioned_evolution() {
        let k = delayed(5);
        let nu = Distribution::from_weights([(1, 0.6), (3, 0.4)].into()).unwrap();
        let tm = TrajectoryMeasure::new(nu.clone(), KernelFamily::Homogeneous(k.clone()), 4)
            .with_exact_table(EXACT_TABLE_CAP)
            .unwrap();
        let lm = tm.last_marginal().unwrap();
        let ev = evolve_conditioned(&nu, &k, 4).unwrap();
        assert!(lm.tv_distance(&ev) < 1e-12);
    }

    #[test]
    fn birth_death_shortcut_is_irreducible() {
        let k = delayed(6);
        let tm = TrajectoryMeasure::new(Distribution::delta(1), KernelFamily::Homogeneous(k), 5);
        assert!(check_trajectory_irreducibility(&tm).unwrap());
    }

    #[test]
    fn pq_walk_support_is_connected_by_bfs() {
        // r = 0: no holding, but parity-constrained paths are still connected
        // under single-coordinate moves, e.g. (1,2,1) -> (1,2,3).
        let k = pq_walk_kernel(0.25, 0.75, 5, TruncationMode::OverflowToAbsorption).unwrap();
        let tm = TrajectoryMeasure::new(Distribution::delta(1), KernelFamily::Homogeneous(k), 3)
            .with_exact_table(EXACT_TABLE_CAP)
            .unwrap();
        assert!(check_trajectory_irreducibility(&tm).unwrap());
    }

    #[test]
    fn disconnected_support_is_detected() {
        // two order-disconnected path classes: states 1..4, moves only 1<->2
        // and 3<->4, initial mass on 1 and 3.
        let k = AbsorbedKernel::from_rows(
            crate::space::StateSpace::total(4),
            vec![
                vec![(0, 0.2), (2, 0.8)],
                vec![(1, 1.0)],
                vec![(4, 1.0)],
                vec![(3, 1.0)],
            ],
            TruncationMode::OverflowToAbsorption,
        )
        .unwrap();
        let nu = Distribution::from_weights([(1, 0.5), (3, 0.5)].into()).unwrap();
        let tm = TrajectoryMeasure::new(nu, KernelFamily::Homogeneous(k), 2)
            .with_exact_table(EXACT_TABLE_CAP)
            .unwrap();
        assert!(!check_trajectory_irreducibility(&tm).unwrap());
    }

    #[test]
    fn exact_sampling_matches_table() {
        use rand::SeedableRng;
        let k = delayed(4);
        let tm = TrajectoryMeasure::new(Distribution::delta(1), KernelFamily::Homogeneous(k), 3)
            .with_exact_table(EXACT_TABLE_CAP)
            .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut counts: HashMap<Trajectory, f64> = HashMap::new();
        let n = 20_000;
        for _ in 0..n {
            *counts.entry(tm.sample(&mut rng).unwrap()).or_insert(0.0) += 1.0;
        }
        let mut tv = 0.0;
        for (t, &p) in tm.table.as_ref().unwrap().probs.iter() {
            tv += (p - counts.get(t).copied().unwrap_or(0.0) / n as f64).abs();
        }
        assert!(tv / 2.0 < 0.03);
    }

    #[test]
    fn rejection_sampling_is_unbiased_on_last_site() {
        use rand::SeedableRng;
        let k = delayed(4);
        let with_table =
            TrajectoryMeasure::new(Distribution::delta(2), KernelFamily::Homogeneous(k.clone()), 3)
                .with_exact_table(EXACT_TABLE_CAP)
                .unwrap();
        let no_table =
            TrajectoryMeasure::new(Distribution::delta(2), KernelFamily::Homogeneous(k), 3);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut counts = std::collections::BTreeMap::new();
        let n = 20_000;
        for _ in 0..n {
            let t = no_table.sample(&mut rng).unwrap();
            *counts.entry(*t.last().unwrap() as usize).or_insert(0.0) += 1.0;
        }
        let emp = Distribution::normalized(counts).unwrap();
        assert!(emp.tv_distance(&with_table.last_marginal().unwrap()) < 0.02);
    }
}
