//! Monte Carlo ensembles of kicked-rotor trajectories and filtered detection.
//!
//! The incoherent initial square of quasimomenta is realized by drawing one
//! `beta` per trajectory. Each trajectory is a pure state at a single `beta`
//! between emission events, so detection restricted to the windows
//! `[n - Delta/2, n + Delta/2]` is all-or-nothing per trajectory.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::SimParams;
use crate::propagator::{Propagator, QuantumState};
use crate::rng::{substream, Purpose};

/// Default histogram bin width, in units of `kbar`.
pub const DEFAULT_BIN_WIDTH: f64 = 1.0;
/// Bin width of the beta-resolved diagnostic histogram.
pub const FINE_BIN_WIDTH: f64 = 0.01;

/// Trajectories reduced per parallel batch.
const BATCH: usize = 256;

/// True if quasimomentum `beta` lies inside a detection window of width `delta`.
pub fn is_detected(beta: f64, delta: f64) -> bool {
    beta.abs() <= 0.5 * delta
}

/// Plane wave at `n = 0` with `beta` uniform in `[-Delta/2, Delta/2]`.
pub fn sample_initial<R: Rng + ?Sized>(
    delta: f64,
    kbar: f64,
    n_max: usize,
    rng: &mut R,
) -> Result<QuantumState> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::invalid("Delta", format!("must lie in (0, 1], got {delta}")));
    }
    let half = 0.5 * delta;
    let mut beta = rng.gen_range(-half..=half);
    if beta >= 0.5 {
        beta -= 1.0;
    }
    QuantumState::plane_wave(0, beta, kbar, n_max)
}

/// Lattice populations of one trajectory at a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSnapshot {
    pub kick: usize,
    pub beta: f64,
    /// `|c_n|^2` for `n = -n_max..=n_max`.
    pub probabilities: Vec<f64>,
}

impl CheckpointSnapshot {
    pub fn from_state(kick: usize, state: &QuantumState) -> Self {
        CheckpointSnapshot {
            kick,
            beta: state.beta(),
            probabilities: state.probabilities(),
        }
    }

    pub fn n_max(&self) -> usize {
        self.probabilities.len() / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryResult {
    pub traj_index: u64,
    /// Energy after `t` kicks, `t = 0..=n_kicks`.
    pub energies: Vec<f64>,
    pub se_count: usize,
    /// Zero-based kick of the first emission, if any.
    pub first_se_kick: Option<usize>,
    pub final_beta: f64,
    /// Detection outcome after `t` kicks, `t = 0..=n_kicks`.
    pub detected: Vec<bool>,
    pub checkpoints: Vec<CheckpointSnapshot>,
}

impl TrajectoryResult {
    /// Detection outcome at each recorded checkpoint.
    pub fn detected_flags(&self) -> Vec<bool> {
        self.checkpoints.iter().map(|c| self.detected[c.kick]).collect()
    }

    /// True if no photon was scattered during the first `t` kicks.
    pub fn coherent_at(&self, t: usize) -> bool {
        self.first_se_kick.is_none_or(|k| k >= t)
    }
}

/// Runs trajectory `traj_index` of the ensemble described by `params`.
///
/// The random stream is derived from `(params.seed, traj_index)`, so the
/// result does not depend on the order in which trajectories are run.
pub fn run_trajectory(
    params: &SimParams,
    traj_index: u64,
    propagator: &mut Propagator,
) -> Result<TrajectoryResult> {
    run_trajectory_inner(params, traj_index, propagator).map_err(|e| e.with_trajectory(traj_index))
}

fn run_trajectory_inner(
    params: &SimParams,
    traj_index: u64,
    propagator: &mut Propagator,
) -> Result<TrajectoryResult> {
    let mut rng = substream(params.seed, Purpose::Trajectory, traj_index);
    let mut state = sample_initial(params.Delta, params.kbar, params.n_max, &mut rng)?;

    let n = params.n_kicks;
    let mut energies = Vec::with_capacity(n + 1);
    let mut detected = Vec::with_capacity(n + 1);
    let mut checkpoints = Vec::with_capacity(params.checkpoints.len());
    let mut pending = params.checkpoints.iter().copied().peekable();
    let mut se_count = 0;
    let mut first_se_kick = None;

    let mut record = |t: usize, state: &QuantumState, checkpoints: &mut Vec<CheckpointSnapshot>| {
        energies.push(state.energy());
        detected.push(is_detected(state.beta(), params.Delta));
        if pending.peek() == Some(&t) {
            pending.next();
            checkpoints.push(CheckpointSnapshot::from_state(t, state));
        }
    };

    record(0, &state, &mut checkpoints);
    for kick in 0..n {
        if let Some(ev) = propagator.step(&mut state, params.Pi, kick, &mut rng)? {
            se_count += 1;
            first_se_kick.get_or_insert(ev.kick_index);
        }
        record(kick + 1, &state, &mut checkpoints);
    }

    Ok(TrajectoryResult {
        traj_index,
        energies,
        se_count,
        first_se_kick,
        final_beta: state.beta(),
        detected,
        checkpoints,
    })
}

/// Histogram of `P / kbar` with bins of width `bin_width` centred on its multiples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentumDistribution {
    pub bin_width: f64,
    /// Index of the first bin; bin `i` is centred at `(first_bin + i) * bin_width`.
    pub first_bin: i64,
    pub probabilities: Vec<f64>,
}

impl MomentumDistribution {
    pub fn from_bins(centers: &[f64], probabilities: Vec<f64>, bin_width: f64) -> Result<Self> {
        if centers.len() != probabilities.len() || centers.is_empty() {
            return Err(Error::invalid("bins", "centers and probabilities must be non-empty and equally long"));
        }
        if !(bin_width > 0.0) {
            return Err(Error::invalid("bin_width", "must be > 0"));
        }
        let first_bin = (centers[0] / bin_width).round() as i64;
        Ok(MomentumDistribution {
            bin_width,
            first_bin,
            probabilities,
        })
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.probabilities.len())
            .map(|i| (self.first_bin + i as i64) as f64 * self.bin_width)
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }

    pub fn renormalized(&self) -> Self {
        let total = self.total();
        let mut out = self.clone();
        if total > 0.0 {
            out.probabilities.iter_mut().for_each(|p| *p /= total);
        }
        out
    }
}

/// Detection rule applied when histogramming.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Filter {
    None,
    /// Keep only trajectories whose quasimomentum lies in the windows of width `delta`.
    Windows { delta: f64 },
}

impl Filter {
    pub fn accepts(&self, beta: f64) -> bool {
        match *self {
            Filter::None => true,
            Filter::Windows { delta } => is_detected(beta, delta),
        }
    }
}

/// Accumulates weighted lattice populations into momentum bins.
#[derive(Debug, Clone)]
pub struct HistogramAccumulator {
    bin_width: f64,
    first_bin: i64,
    sums: Vec<f64>,
}

impl HistogramAccumulator {
    pub fn new(n_max: usize, bin_width: f64) -> Result<Self> {
        if !(bin_width.is_finite() && bin_width > 0.0) {
            return Err(Error::invalid("bin_width", format!("must be > 0, got {bin_width}")));
        }
        let edge = n_max as f64 + 0.5;
        let first_bin = Self::bin_of(-edge, bin_width);
        let last_bin = Self::bin_of(edge, bin_width);
        Ok(HistogramAccumulator {
            bin_width,
            first_bin,
            sums: vec![0.0; (last_bin - first_bin + 1) as usize],
        })
    }

    fn bin_of(p: f64, width: f64) -> i64 {
        (p / width + 0.5).floor() as i64
    }

    pub fn add(&mut self, snapshot: &CheckpointSnapshot, weight: f64) {
        let n_max = snapshot.n_max() as i64;
        for (i, &prob) in snapshot.probabilities.iter().enumerate() {
            if prob == 0.0 {
                continue;
            }
            let p = (i as i64 - n_max) as f64 + snapshot.beta;
            let bin = Self::bin_of(p, self.bin_width) - self.first_bin;
            // lattice momenta stay within +-(n_max + 1/2)
            if let Some(slot) = usize::try_from(bin).ok().and_then(|b| self.sums.get_mut(b)) {
                *slot += weight * prob;
            }
        }
    }

    pub fn finish(self) -> MomentumDistribution {
        MomentumDistribution {
            bin_width: self.bin_width,
            first_bin: self.first_bin,
            probabilities: self.sums,
        }
    }
}

/// Histograms a set of equally weighted trajectory snapshots.
///
/// Without renormalization the filtered histogram carries the detected
/// fraction as its total mass.
pub fn momentum_histogram(
    snapshots: &[CheckpointSnapshot],
    filter: Filter,
    bin_width: f64,
    renormalize: bool,
) -> Result<MomentumDistribution> {
    let n_max = snapshots.iter().map(|s| s.n_max()).max().unwrap_or(1);
    let mut acc = HistogramAccumulator::new(n_max, bin_width)?;
    if snapshots.is_empty() {
        return Ok(acc.finish());
    }
    let weight = 1.0 / snapshots.len() as f64;
    for s in snapshots.iter().filter(|s| filter.accepts(s.beta)) {
        acc.add(s, weight);
    }
    let dist = acc.finish();
    Ok(if renormalize { dist.renormalized() } else { dist })
}

/// Population counts after `t` kicks.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PopulationCounts {
    /// Never scattered a photon (always inside a window).
    pub coherent: u64,
    /// Scattered at least once and currently inside a window.
    pub returned: u64,
    /// Outside every window.
    pub lost: u64,
}

impl PopulationCounts {
    pub fn total(&self) -> u64 {
        self.coherent + self.returned + self.lost
    }

    pub fn detected(&self) -> u64 {
        self.coherent + self.returned
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointDistributions {
    pub kick: usize,
    pub unfiltered: MomentumDistribution,
    /// Detected trajectories only, not renormalized.
    pub filtered: MomentumDistribution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub params: SimParams,
    /// Unfiltered mean energy after `t` kicks.
    pub mean_energy: Vec<f64>,
    /// Mean energy of detected trajectories; `None` when nothing is detected.
    pub filtered_energy: Vec<Option<f64>>,
    pub counts: Vec<PopulationCounts>,
    pub distributions: Vec<CheckpointDistributions>,
    pub total_se: u64,
}

impl EnsembleResult {
    fn fraction(&self, f: impl Fn(&PopulationCounts) -> u64) -> Vec<f64> {
        self.counts
            .iter()
            .map(|c| f(c) as f64 / c.total() as f64)
            .collect()
    }

    pub fn pop_f0(&self) -> Vec<f64> {
        self.fraction(|c| c.coherent)
    }

    pub fn pop_fdelta(&self) -> Vec<f64> {
        self.fraction(|c| c.returned)
    }

    pub fn pop_rest(&self) -> Vec<f64> {
        self.fraction(|c| c.lost)
    }

    pub fn detected_fraction(&self) -> Vec<f64> {
        self.fraction(|c| c.detected())
    }
}

struct Accumulator {
    energy_sum: Vec<f64>,
    filtered_sum: Vec<f64>,
    counts: Vec<PopulationCounts>,
    unfiltered: Vec<HistogramAccumulator>,
    filtered: Vec<HistogramAccumulator>,
    total_se: u64,
    weight: f64,
}

impl Accumulator {
    fn new(params: &SimParams, bin_width: f64) -> Result<Self> {
        let len = params.n_kicks + 1;
        let hist = || -> Result<Vec<HistogramAccumulator>> {
            params
                .checkpoints
                .iter()
                .map(|_| HistogramAccumulator::new(params.n_max, bin_width))
                .collect()
        };
        Ok(Accumulator {
            energy_sum: vec![0.0; len],
            filtered_sum: vec![0.0; len],
            counts: vec![PopulationCounts::default(); len],
            unfiltered: hist()?,
            filtered: hist()?,
            total_se: 0,
            weight: 1.0 / params.n_traj as f64,
        })
    }

    fn add(&mut self, tr: &TrajectoryResult) {
        for (t, (&e, &det)) in tr.energies.iter().zip(&tr.detected).enumerate() {
            self.energy_sum[t] += e;
            let c = &mut self.counts[t];
            if det {
                self.filtered_sum[t] += e;
                if tr.coherent_at(t) {
                    c.coherent += 1;
                } else {
                    c.returned += 1;
                }
            } else {
                c.lost += 1;
            }
        }
        for (i, snap) in tr.checkpoints.iter().enumerate() {
            self.unfiltered[i].add(snap, self.weight);
            if tr.detected[snap.kick] {
                self.filtered[i].add(snap, self.weight);
            }
        }
        self.total_se += tr.se_count as u64;
    }

    fn finish(self, params: &SimParams) -> EnsembleResult {
        let n_traj = params.n_traj as f64;
        let mean_energy = self.energy_sum.iter().map(|s| s / n_traj).collect();
        let filtered_energy = self
            .filtered_sum
            .iter()
            .zip(&self.counts)
            .map(|(s, c)| (c.detected() > 0).then(|| s / c.detected() as f64))
            .collect();
        let distributions = params
            .checkpoints
            .iter()
            .zip(self.unfiltered.into_iter().zip(self.filtered))
            .map(|(&kick, (u, f))| CheckpointDistributions {
                kick,
                unfiltered: u.finish(),
                filtered: f.finish(),
            })
            .collect();
        EnsembleResult {
            params: params.clone(),
            mean_energy,
            filtered_energy,
            counts: self.counts,
            distributions,
            total_se: self.total_se,
        }
    }
}

/// Runs the full ensemble with the default histogram bin width.
pub fn run_ensemble(params: &SimParams) -> Result<EnsembleResult> {
    run_ensemble_with(params, DEFAULT_BIN_WIDTH)
}

/// Runs the full ensemble on the current rayon pool.
///
/// Trajectories are simulated in parallel batches and reduced in trajectory
/// order, so the result is bit-identical for any number of worker threads.
pub fn run_ensemble_with(params: &SimParams, bin_width: f64) -> Result<EnsembleResult> {
    params.validate()?;
    let mut acc = Accumulator::new(params, bin_width)?;
    let n = params.n_traj as u64;
    let mut start = 0u64;
    while start < n {
        let end = (start + BATCH as u64).min(n);
        let batch: Vec<Result<TrajectoryResult>> = (start..end)
            .into_par_iter()
            .map_init(
                || Propagator::new(params.K, params.kbar, params.n_max),
                |prop, i| match prop {
                    Ok(prop) => run_trajectory(params, i, prop),
                    Err(e) => Err(e.clone()),
                },
            )
            .collect();
        for tr in batch {
            acc.add(&tr?);
        }
        start = end;
    }
    Ok(acc.finish(params))
}
