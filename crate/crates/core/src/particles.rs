//! Monte Carlo N-BBM with nonlocal offspring: `N` Brownian particles
//! (increments `N(0, dt)`), each branching at the kernel rate; the child
//! lands at `parent + Z` with `Z ~ q`, and every birth deletes the
//! current leftmost particle.
//!
//! Time is discretized: per step each particle diffuses, then branches
//! with probability `1 - exp(-rate dt)`. All random draws of a step are
//! consumed in ascending position order, so the state after a step
//! depends only on the multiset of positions before it.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math;
use crate::model::{BranchingKernel, InitialDatum};

/// One birth with its compensating deletion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchEvent {
    pub t: f64,
    pub parent: f64,
    pub child: f64,
    pub deleted: f64,
}

/// Independent stream `stream` of the master `seed`.
pub fn replica_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `N` particles and their random stream.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    time: f64,
    rng: ChaCha8Rng,
    events: Option<Vec<BranchEvent>>,
}

impl ParticleEnsemble {
    /// Ensemble at given positions; requires at least two finite values.
    pub fn from_positions(positions: Vec<f64>, rng: ChaCha8Rng) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::Config(alloc::format!("need at least 2 particles, got {}", positions.len())));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("particle positions must be finite".into()));
        }
        Ok(Self { positions, time: 0.0, rng, events: None })
    }

    /// `n` i.i.d. draws from the datum by inverse transform.
    pub fn sample(datum: &InitialDatum, n: usize, mut rng: ChaCha8Rng) -> Result<Self> {
        let positions = (0..n).map(|_| datum.quantile(rng.random::<f64>())).collect();
        Self::from_positions(positions, rng)
    }

    /// Starts recording branch events.
    pub fn record_events(&mut self) {
        self.events.get_or_insert_with(Vec::new);
    }

    pub fn events(&self) -> Option<&[BranchEvent]> {
        self.events.as_deref()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Leftmost position.
    pub fn min(&self) -> f64 {
        self.positions.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Index of the leftmost particle; ties go to the smallest index.
    fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &x) in self.positions.iter().enumerate().skip(1) {
            if x < self.positions[best] {
                best = i;
            }
        }
        best
    }

    /// Advances one step of length `dt`.
    pub fn step(&mut self, dt: f64, kernel: &BranchingKernel) -> Result<()> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Config(alloc::format!("particle dt must be positive, got {dt}")));
        }
        let n = self.positions.len();
        self.positions.sort_unstable_by(f64::total_cmp);
        let sd = math::sqrt(dt);
        for x in self.positions.iter_mut() {
            let z: f64 = self.rng.sample(StandardNormal);
            *x += sd * z;
        }
        let p = 1.0 - math::exp(-kernel.rate() * dt);
        if p > 0.0 {
            // Deletion swaps the newest child into the freed slot, so a
            // surviving original particle keeps its index. One deleted
            // earlier in the step no longer branches.
            let branching: Vec<bool> = (0..n).map(|_| self.rng.random::<f64>() < p).collect();
            let mut original = alloc::vec![true; n];
            let mut alive = alloc::vec![true; n];
            let t = self.time + dt;
            for i in 0..n {
                if !branching[i] || !alive[i] {
                    continue;
                }
                let parent = self.positions[i];
                let child = parent + kernel.quantile(self.rng.random::<f64>());
                self.positions.push(child);
                original.push(false);
                let j = self.argmin();
                let deleted = self.positions.swap_remove(j);
                if original.swap_remove(j) {
                    alive[j] = false;
                }
                if self.positions.len() != n {
                    return Err(Error::Domain("particle count changed".into()));
                }
                if let Some(log) = self.events.as_mut() {
                    log.push(BranchEvent { t, parent, child, deleted });
                }
            }
        }
        self.time += dt;
        Ok(())
    }
}

/// Histogram layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bins {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Bins {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(hi > lo) || count == 0 {
            return Err(Error::Config(alloc::format!(
                "histogram needs hi > lo and at least one bin, got [{lo}, {hi}] with {count}"
            )));
        }
        Ok(Self { lo, hi, count })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.count as f64
    }

    /// Bin edges `lo = e_0 < ... < e_count = hi`.
    pub fn edges(&self) -> Vec<f64> {
        (0..=self.count).map(|k| self.lo + k as f64 * self.width()).collect()
    }

    /// Bin of `x`; points outside `[lo, hi)` go to the edge bins.
    pub fn index(&self, x: f64) -> usize {
        let k = math::floor((x - self.lo) / self.width());
        if k < 0.0 || k.is_nan() {
            0
        } else {
            (k as usize).min(self.count - 1)
        }
    }
}

/// Normalized histogram of one snapshot and its leftmost particle.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    pub t: f64,
    pub bins: Bins,
    /// `count / (N width)`; integrates to 1.
    pub density: Vec<f64>,
    pub front: f64,
}

impl EmpiricalMeasure {
    pub fn of(ensemble: &ParticleEnsemble, bins: Bins) -> Self {
        let mut counts = alloc::vec![0usize; bins.count];
        for &x in ensemble.positions() {
            counts[bins.index(x)] += 1;
        }
        let norm = 1.0 / (ensemble.len() as f64 * bins.width());
        Self {
            t: ensemble.time(),
            bins,
            density: counts.iter().map(|&c| c as f64 * norm).collect(),
            front: ensemble.min(),
        }
    }

    /// `sum density * width`.
    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bins.width()
    }
}

/// Run parameters for one replica.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleConfig {
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Snapshot after every `snapshot_every` steps (and at `t = 0`).
    pub snapshot_every: usize,
    pub bins: Bins,
    pub record_events: bool,
}

impl ParticleConfig {
    /// Number of steps; `t_end` must be a whole multiple of `dt`.
    pub fn steps(&self) -> Result<usize> {
        if self.n < 2 {
            return Err(Error::Config(alloc::format!("need N >= 2 particles, got {}", self.n)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0 && self.t_end > 0.0) {
            return Err(Error::Config("particle dt and horizon must be positive".into()));
        }
        let s = self.t_end / self.dt;
        let steps = math::round(s) as usize;
        if steps == 0 || math::abs(s - steps as f64) > 1e-6 * s {
            return Err(Error::Config(alloc::format!(
                "particle horizon {} is not a whole number of steps {}",
                self.t_end,
                self.dt
            )));
        }
        if self.snapshot_every == 0 {
            return Err(Error::Config("snapshot_every must be at least 1".into()));
        }
        Ok(steps)
    }
}

/// Snapshots of one replica, plus its event log when requested.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<EmpiricalMeasure>,
    pub events: Vec<BranchEvent>,
}

/// Runs one replica drawn from `datum` on stream `stream` of `seed`.
pub fn simulate(
    cfg: &ParticleConfig,
    kernel: &BranchingKernel,
    datum: &InitialDatum,
    seed: u64,
    stream: u64,
) -> Result<Trajectory> {
    let steps = cfg.steps()?;
    let ens = ParticleEnsemble::sample(datum, cfg.n, replica_rng(seed, stream))?;
    run(ens, cfg, kernel, steps)
}

/// Runs an ensemble already in place.
pub fn simulate_from(ensemble: ParticleEnsemble, cfg: &ParticleConfig, kernel: &BranchingKernel) -> Result<Trajectory> {
    let steps = cfg.steps()?;
    run(ensemble, cfg, kernel, steps)
}

fn run(mut ens: ParticleEnsemble, cfg: &ParticleConfig, kernel: &BranchingKernel, steps: usize) -> Result<Trajectory> {
    if cfg.record_events {
        ens.record_events();
    }
    let mut snapshots = alloc::vec![EmpiricalMeasure::of(&ens, cfg.bins)];
    for k in 1..=steps {
        ens.step(cfg.dt, kernel)?;
        if k % cfg.snapshot_every == 0 {
            snapshots.push(EmpiricalMeasure::of(&ens, cfg.bins));
        }
    }
    Ok(Trajectory { snapshots, events: ens.events.unwrap_or_default() })
}

/// Replica statistics of the leftmost particle per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontStatistics {
    pub t: Vec<f64>,
    pub mean: Vec<f64>,
    /// Replica standard deviation.
    pub sd: Vec<f64>,
    /// Standard error of the mean, `sd / sqrt(replicas)`.
    pub se: Vec<f64>,
    pub replicas: usize,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, math::sqrt(var))
}

/// Mean, spread and standard error of the front over replicas, reduced in
/// replica order.
pub fn front_statistics(replicas: &[Trajectory]) -> Result<FrontStatistics> {
    if replicas.len() < 2 {
        return Err(Error::Config("front statistics need at least 2 replicas".into()));
    }
    let k = replicas[0].snapshots.len();
    if replicas.iter().any(|r| r.snapshots.len() != k) {
        return Err(Error::Config("replicas have different snapshot counts".into()));
    }
    let r = replicas.len();
    let mut out = FrontStatistics {
        t: replicas[0].snapshots.iter().map(|s| s.t).collect(),
        mean: Vec::with_capacity(k),
        sd: Vec::with_capacity(k),
        se: Vec::with_capacity(k),
        replicas: r,
    };
    for j in 0..k {
        let (m, s) = mean_sd(replicas.iter().map(|tr| tr.snapshots[j].front));
        out.mean.push(m);
        out.sd.push(s);
        out.se.push(s / math::sqrt(r as f64));
    }
    Ok(out)
}

/// Replica mean of the histogram at snapshot `j` and its standard error
/// per bin.
pub fn density_statistics(replicas: &[Trajectory], j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if replicas.len() < 2 {
        return Err(Error::Config("density statistics need at least 2 replicas".into()));
    }
    let bins = replicas[0].snapshots[j].bins.count;
    let r = replicas.len() as f64;
    let mut mean = Vec::with_capacity(bins);
    let mut se = Vec::with_capacity(bins);
    for b in 0..bins {
        let (m, s) = mean_sd(replicas.iter().map(|tr| tr.snapshots[j].density[b]));
        mean.push(m);
        se.push(s / math::sqrt(r));
    }
    Ok((mean, se))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_kernel, KernelShape};

    #[test]
    fn bins_clamp_to_edges() {
        let b = Bins::new(0.0, 1.0, 4).unwrap();
        assert_eq!(b.index(-3.0), 0);
        assert_eq!(b.index(0.3), 1);
        assert_eq!(b.index(1.0), 3);
        assert_eq!(b.index(7.0), 3);
    }

    #[test]
    fn every_event_deletes_the_minimum() {
        let k = make_kernel(KernelShape::default()).unwrap().with_rate(50.0).unwrap();
        let pos: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let mut e = ParticleEnsemble::from_positions(pos, replica_rng(3, 0)).unwrap();
        e.record_events();
        for _ in 0..20 {
            let before = e.positions().len();
            e.step(0.01, &k).unwrap();
            assert_eq!(e.len(), before);
        }
        let log = e.events().unwrap();
        assert!(!log.is_empty());
        for ev in log {
            assert!(ev.deleted <= ev.child);
        }
    }
}
