//! Event-driven simulation of the finite-N agent system on the complete graph.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{exp1, uniform01, InitSpec, ModelParams, Opinion, RandomSource, SampleSet};

/// Stream tag for agent-based runs.
const ABM_STREAM: u64 = 0x0ab1;

/// Default cap on `n_agents * snapshots` (stored `f64` values).
pub const DEFAULT_MAX_STORED_VALUES: u128 = 1 << 29;

/// Global event rate of the Poisson clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ClockRate {
    /// Rate `N`: every agent is updated at rate 1, matching the mean-field clock.
    #[default]
    N,
    /// Rate `N/2`: every agent is updated at rate 1/2.
    NHalf,
}

impl ClockRate {
    pub fn rate(self, n_agents: usize) -> f64 {
        match self {
            ClockRate::N => n_agents as f64,
            ClockRate::NHalf => n_agents as f64 / 2.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AbmConfig {
    pub n_agents: usize,
    pub t_end: f64,
    /// Sorted times in `[0, t_end]`; empty means `[t_end]`.
    pub snapshot_times: Vec<f64>,
    pub init: InitSpec,
    pub params: ModelParams,
    pub seed: u64,
    pub clock_rate: ClockRate,
    pub max_stored_values: u128,
}

impl AbmConfig {
    pub fn new(n_agents: usize, t_end: f64, init: InitSpec, params: ModelParams, seed: u64) -> Self {
        AbmConfig {
            n_agents,
            t_end,
            snapshot_times: vec![t_end],
            init,
            params,
            seed,
            clock_rate: ClockRate::N,
            max_stored_values: DEFAULT_MAX_STORED_VALUES,
        }
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    fn snapshots(&self) -> Vec<f64> {
        if self.snapshot_times.is_empty() {
            vec![self.t_end]
        } else {
            self.snapshot_times.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::domain("n_agents", "at least two agents are required"));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::domain("t_end", format!("{} is not a nonnegative time", self.t_end)));
        }
        check_snapshot_times(&self.snapshots(), self.t_end)?;
        self.init.validate()?;
        let requested = self.n_agents as u128 * self.snapshots().len() as u128;
        if requested > self.max_stored_values {
            return Err(Error::ScaleGuard {
                requested,
                cap: self.max_stored_values,
            });
        }
        Ok(())
    }
}

pub(crate) fn check_snapshot_times(times: &[f64], t_end: f64) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0 && *t <= t_end)) {
        return Err(Error::domain("snapshot_times", format!("times must lie in [0, {t_end}]")));
    }
    if times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain("snapshot_times", "times must be sorted"));
    }
    Ok(())
}

/// Opinion sample at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub samples: SampleSet,
}

/// One directed interaction: `x_i` listens to persuader `x_j`.
pub fn interact(x_i: Opinion, x_j: Opinion, params: &ModelParams, u: f64) -> Opinion {
    Opinion::from_contraction(interact_raw(
        x_i.value(),
        x_j.value(),
        params.mu_minus,
        params.mu_plus,
        u,
    ))
}

#[inline]
pub(crate) fn interact_raw(x_i: f64, x_j: f64, mu_minus: f64, mu_plus: f64, u: f64) -> f64 {
    let next = if u < 0.5 * (1.0 + x_j) {
        x_i + mu_plus * (1.0 - x_i)
    } else {
        x_i - mu_minus * (1.0 + x_i)
    };
    debug_assert!((-1.0..=1.0).contains(&next), "opinion {next} escaped [-1, 1]");
    next
}

/// Runs one trajectory; snapshots hold the state at the last event at or
/// before each requested time.
pub fn simulate_abm(cfg: &AbmConfig) -> Result<Vec<Snapshot>> {
    cfg.validate()?;
    Ok(run_trajectory(cfg, RandomSource::new(cfg.seed, ABM_STREAM).substream(0)))
}

/// Runs independent replicas in parallel. Replica `r` draws from substream
/// `r`, so replica 0 equals [`simulate_abm`] and results do not depend on
/// the worker count.
pub fn simulate_abm_replicas(cfg: &AbmConfig, replicas: usize) -> Result<Vec<Vec<Snapshot>>> {
    cfg.validate()?;
    let root = RandomSource::new(cfg.seed, ABM_STREAM);
    Ok((0..replicas)
        .into_par_iter()
        .map(|r| run_trajectory(cfg, root.substream(r as u64)))
        .collect())
}

fn run_trajectory(cfg: &AbmConfig, source: RandomSource) -> Vec<Snapshot> {
    let mut rng = source.rng();
    let n = cfg.n_agents;
    let mut x: Vec<f64> = (0..n).map(|_| cfg.init.draw(&mut rng)).collect();
    let times = cfg.snapshots();
    let rate = cfg.clock_rate.rate(n);
    let (mu_minus, mu_plus) = (cfg.params.mu_minus, cfg.params.mu_plus);

    let mut out = Vec::with_capacity(times.len());
    let mut next_snap = 0;
    let mut t = 0.0;
    loop {
        let t_next = t + exp1(&mut rng) / rate;
        while next_snap < times.len() && times[next_snap] < t_next {
            out.push(Snapshot {
                time: times[next_snap],
                samples: SampleSet::from_trusted(x.clone()),
            });
            next_snap += 1;
        }
        if t_next > cfg.t_end {
            break;
        }
        t = t_next;
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let u = uniform01(&mut rng);
        x[i] = interact_raw(x[i], x[j], mu_minus, mu_plus, u);
    }
    out
}
