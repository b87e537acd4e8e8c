//! Mean-field limit: closed-form first moment, second-moment ODE solution,
//! and Monte Carlo simulation of the linear time-inhomogeneous jump process.

use rayon::prelude::*;

use crate::abm::{check_snapshot_times, Snapshot, DEFAULT_MAX_STORED_VALUES};
use crate::error::{Error, Result};
use crate::model::{check_mu_open, exp1, uniform01, InitSpec, ModelParams, RandomSource, SampleSet};

const INIT_STREAM: u64 = 0x1417;
const JUMP_STREAM: u64 = 0x1a4b;

/// Default Simpson step for the second-moment quadrature.
pub const DEFAULT_QUAD_STEP: f64 = 1e-3;

/// Mean opinion `m_t`. The symmetric case and `m0 = +-1` are exact fixed points.
pub fn mean_at(t: f64, m0: f64, params: &ModelParams) -> f64 {
    debug_assert!(t >= 0.0);
    if params.symmetric || m0 >= 1.0 || m0 <= -1.0 {
        return m0;
    }
    let ratio = (1.0 + m0) / (1.0 - m0);
    1.0 - 2.0 / (1.0 + ratio * (params.drift() * t).exp())
}

/// Coefficients `(alpha, beta)` of the second-moment ODE `q' = alpha q + beta`
/// at current mean `m`.
pub fn moment_auxiliaries(m: f64, params: &ModelParams) -> (f64, f64) {
    let (mp, mm) = (params.mu_plus, params.mu_minus);
    let (ap, am) = ((1.0 - mp).powi(2), (1.0 - mm).powi(2));
    let alpha = 0.5 * (ap - am) * m + 0.5 * (ap + am) - 1.0;
    let beta = 0.5 * (1.0 + m) * (mp * mp + 2.0 * (1.0 - mp) * mp * m)
        + 0.5 * (1.0 - m) * (mm * mm - 2.0 * (1.0 - mm) * mm * m);
    (alpha, beta)
}

/// Time series of the first and second moments with the integrating factor.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentTrace {
    pub times: Vec<f64>,
    pub m: Vec<f64>,
    pub q: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `I_t = exp(-int_0^t alpha)`.
    pub integrating_factor: Vec<f64>,
}

fn check_moment_inputs(q0: f64, m0: f64, quad_step: f64) -> Result<()> {
    if !(quad_step.is_finite() && quad_step > 0.0) {
        return Err(Error::domain("quad_step", format!("{quad_step} must be positive")));
    }
    if !(-1.0..=1.0).contains(&m0) {
        return Err(Error::domain("m0", format!("{m0} is outside [-1, 1]")));
    }
    if !(q0 >= m0 * m0 - 1e-12 && q0 <= 1.0 + 1e-12) {
        return Err(Error::domain("q0", format!("{q0} is outside [m0^2, 1]")));
    }
    Ok(())
}

/// Second moment `q_t`. Symmetric parameters use the constant-coefficient
/// closed form; otherwise composite Simpson quadrature at `quad_step`.
pub fn second_moment_at(t: f64, q0: f64, m0: f64, params: &ModelParams, quad_step: f64) -> Result<f64> {
    check_moment_inputs(q0, m0, quad_step)?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::domain("t", format!("{t} is not a nonnegative time")));
    }
    if params.symmetric {
        let (alpha, beta) = moment_auxiliaries(m0, params);
        let q_star = -beta / alpha;
        return Ok(q_star + (q0 - q_star) * (alpha * t).exp());
    }
    second_moment_quadrature(t, q0, m0, params, quad_step)
}

/// Quadrature route for `q_t`, usable in every case (including symmetric).
pub fn second_moment_quadrature(t: f64, q0: f64, m0: f64, params: &ModelParams, quad_step: f64) -> Result<f64> {
    Ok(*moment_trace(&[t], q0, m0, params, quad_step)?.q.last().unwrap())
}

/// Moments at sorted `times`, integrated by composite Simpson panels of width
/// at most `quad_step`.
pub fn moment_trace(times: &[f64], q0: f64, m0: f64, params: &ModelParams, quad_step: f64) -> Result<MomentTrace> {
    check_moment_inputs(q0, m0, quad_step)?;
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || times.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::domain("times", "times must be sorted and nonnegative"));
    }
    let coeffs = |s: f64| moment_auxiliaries(mean_at(s, m0, params), params);

    let mut trace = MomentTrace {
        times: times.to_vec(),
        m: Vec::with_capacity(times.len()),
        q: Vec::with_capacity(times.len()),
        alpha: Vec::with_capacity(times.len()),
        beta: Vec::with_capacity(times.len()),
        integrating_factor: Vec::with_capacity(times.len()),
    };
    // running integrals: a = int_0^s alpha, j = int_0^s beta I
    let (mut s, mut a, mut j) = (0.0f64, 0.0f64, 0.0f64);
    for &target in times {
        let span = target - s;
        if span > 0.0 {
            let panels = (span / quad_step).ceil().max(1.0) as usize;
            let h = span / panels as f64;
            for k in 0..panels {
                let s0 = s + k as f64 * h;
                let (al0, be0) = coeffs(s0);
                let (al_q, _) = coeffs(s0 + 0.25 * h);
                let (al_m, be_m) = coeffs(s0 + 0.5 * h);
                let (al1, be1) = coeffs(s0 + h);
                let a_mid = a + h / 12.0 * (al0 + 4.0 * al_q + al_m);
                let a_end = a + h / 6.0 * (al0 + 4.0 * al_m + al1);
                j += h / 6.0 * (be0 * (-a).exp() + 4.0 * be_m * (-a_mid).exp() + be1 * (-a_end).exp());
                a = a_end;
            }
            s = target;
        }
        let i_t = (-a).exp();
        let (alpha, beta) = coeffs(target);
        trace.m.push(mean_at(target, m0, params));
        trace.q.push((q0 + j) / i_t);
        trace.alpha.push(alpha);
        trace.beta.push(beta);
        trace.integrating_factor.push(i_t);
    }
    Ok(trace)
}

/// Stationary variance `mu (1 - m0^2) / (2 - mu)` in the symmetric case.
pub fn stationary_variance(mu: f64, m0: f64) -> Result<f64> {
    check_mu_open(mu)?;
    if !(-1.0..=1.0).contains(&m0) {
        return Err(Error::domain("m0", format!("{m0} is outside [-1, 1]")));
    }
    Ok(mu * (1.0 - m0 * m0) / (2.0 - mu))
}

#[derive(Clone, Debug)]
pub struct ParticleConfig {
    pub n: usize,
    pub t_end: f64,
    pub m0: f64,
    pub params: ModelParams,
    pub init: InitSpec,
    pub seed: u64,
    /// Sorted times in `[0, t_end]`; empty means `[t_end]`.
    pub snapshot_times: Vec<f64>,
    pub max_stored_values: u128,
}

impl ParticleConfig {
    pub fn new(n: usize, t_end: f64, params: ModelParams, init: InitSpec, seed: u64) -> Self {
        ParticleConfig {
            n,
            t_end,
            m0: init.mean(),
            params,
            init,
            seed,
            snapshot_times: vec![t_end],
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
        if self.n == 0 {
            return Err(Error::domain("n", "at least one particle is required"));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::domain("t_end", format!("{} is not a nonnegative time", self.t_end)));
        }
        check_snapshot_times(&self.snapshots(), self.t_end)?;
        self.init.validate()?;
        self.init.check_mean(self.m0)?;
        let requested = self.n as u128 * self.snapshots().len() as u128;
        if requested > self.max_stored_values {
            return Err(Error::ScaleGuard {
                requested,
                cap: self.max_stored_values,
            });
        }
        Ok(())
    }
}

/// Simulates `n` independent copies of the linear jump process.
///
/// Particle `k` takes its initial value and its jump clock from substream
/// `k` of two separate streams; two runs with the same seed therefore share
/// every jump time and every uniform draw, whatever their initial data.
pub fn simulate_particles(cfg: &ParticleConfig) -> Result<Vec<Snapshot>> {
    cfg.validate()?;
    let times = cfg.snapshots();
    let s = times.len();
    let init_root = RandomSource::new(cfg.seed, INIT_STREAM);
    let jump_root = RandomSource::new(cfg.seed, JUMP_STREAM);
    let params = cfg.params;
    let m0 = cfg.m0;
    let p_const = 0.5 * (1.0 + m0);

    let mut buf = vec![0.0f64; cfg.n * s];
    buf.par_chunks_mut(s).enumerate().for_each(|(k, row)| {
        let mut z = cfg.init.draw(&mut init_root.substream(k as u64).rng());
        let mut rng = jump_root.substream(k as u64).rng();
        let mut t_jump = exp1(&mut rng);
        for (slot, &ts) in row.iter_mut().zip(&times) {
            while t_jump <= ts {
                let p = if params.symmetric {
                    p_const
                } else {
                    0.5 * (1.0 + mean_at(t_jump, m0, &params))
                };
                z = if uniform01(&mut rng) < p {
                    z + params.mu_plus * (1.0 - z)
                } else {
                    z - params.mu_minus * (1.0 + z)
                };
                debug_assert!((-1.0..=1.0).contains(&z));
                t_jump += exp1(&mut rng);
            }
            *slot = z;
        }
    });

    Ok(times
        .iter()
        .enumerate()
        .map(|(c, &time)| Snapshot {
            time,
            samples: SampleSet::from_trusted(buf.iter().skip(c).step_by(s).copied().collect()),
        })
        .collect())
}

/// Mean `|a_k - b_k|` over paired particles: the coupling estimate of W1
/// for two runs that share their jump events.
pub fn coupling_distance(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::domain("samples", "coupled runs must have equal sizes"));
    }
    let sum: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).sum();
    Ok(sum / a.len() as f64)
}
