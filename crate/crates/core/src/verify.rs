//! Theorem-check suite run by `opk verify` and the acceptance tests.
//!
//! Every check owns its seeds, so a report is reproducible and independent
//! of how many worker threads run it.

use std::time::Instant;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::abm::{simulate_abm, AbmConfig};
use crate::equilibrium::{
    cantor_level, cantor_level_exact, cantor_total_length_exact, char_fn_equilibrium, d4_to_gaussian,
    hausdorff_dimension, sample_equilibrium, volcano_density,
};
use crate::error::Result;
use crate::kinetic::{apply_q_star, min_spectral_depth, moments_from_grid, solve_pde, solve_spectral, GridDensity};
use crate::meanfield::{
    coupling_distance, mean_at, second_moment_at, second_moment_quadrature, simulate_particles, ParticleConfig,
};
use crate::metrics::{default_xi_grid, histogram, ks_distance, log_grid, toscani_distance, uniform_cdf, w1_to_point, wasserstein_1};
use crate::model::{sinc, CharacteristicFunction, InitSpec, ModelParams};
use crate::rational::MU_VOLCANO;

/// Grid spacing and time step used by every grid solve in the suite.
const DX: f64 = 1e-4;
const DT: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    /// Desk scale: 10^5 to 10^6 samples.
    Fast,
    /// Population size 5 * 10^6 for the Monte Carlo checks.
    Paper,
}

impl Suite {
    fn particles(self) -> usize {
        match self {
            Suite::Fast => 100_000,
            Suite::Paper => 5_000_000,
        }
    }

    fn large_particles(self) -> usize {
        match self {
            Suite::Fast => 1_000_000,
            Suite::Paper => 5_000_000,
        }
    }
}

impl std::str::FromStr for Suite {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Suite::Fast),
            "paper" => Ok(Suite::Paper),
            other => Err(crate::Error::Parse(format!("unknown suite {other:?} (fast|paper)"))),
        }
    }
}

/// One measured quantity and the bound it is held to.
#[derive(Clone, Debug, Serialize)]
pub struct Measurement {
    pub name: String,
    pub measured: f64,
    pub bound: String,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub id: u32,
    pub name: &'static str,
    pub description: &'static str,
    pub measurements: Vec<Measurement>,
    /// Set when the check could not run.
    pub error: Option<String>,
    pub pass: bool,
    pub runtime_s: f64,
}

impl CheckResult {
    /// One-line summary, `PASS`/`FAIL` first.
    pub fn summary_line(&self) -> String {
        let status = if self.pass { "PASS" } else { "FAIL" };
        let detail = match &self.error {
            Some(e) => format!("error: {e}"),
            None => self
                .measurements
                .iter()
                .map(|m| format!("{}={:.6e} ({})", m.name, m.measured, m.bound))
                .collect::<Vec<_>>()
                .join("; "),
        };
        format!(
            "{status} [{:>2}] {:<22} {detail} [{:.1}s]",
            self.id, self.name, self.runtime_s
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// The checks as a JSON array, in id order.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.checks).expect("report serializes")
    }
}

struct Check {
    id: u32,
    name: &'static str,
    description: &'static str,
    run: fn(Suite, u64) -> Result<Vec<Measurement>>,
}

const CHECKS: &[Check] = &[
    Check { id: 1, name: "mean-conservation", description: "symmetric model keeps the mean: agents and grid solver", run: check_mean_conservation },
    Check { id: 2, name: "mean-trajectory", description: "particle mean follows the closed-form logistic path", run: check_mean_trajectory },
    Check { id: 3, name: "consensus-at-one", description: "asymmetric drift concentrates the law at +1", run: check_consensus },
    Check { id: 4, name: "w1-contraction", description: "coupled runs contract in W1 at rate close to mu", run: check_w1_contraction },
    Check { id: 5, name: "fourier-contraction", description: "d_2 between grid solutions decays at the predicted rate", run: check_fourier_contraction },
    Check { id: 6, name: "equilibrium-variance", description: "equilibrium sampler variance matches mu/(2-mu)", run: check_equilibrium_variance },
    Check { id: 7, name: "uniform-equilibrium", description: "mu = 1/2 equilibrium is uniform", run: check_uniform_equilibrium },
    Check { id: 8, name: "cantor-support", description: "mu = 2/3 equilibrium lives on a measure-zero Cantor set", run: check_cantor },
    Check { id: 9, name: "volcano-density", description: "mu = 1 - 1/sqrt2 equilibrium has the piecewise-linear density", run: check_volcano },
    Check { id: 10, name: "gaussian-limit", description: "d_4 to the Gaussian shrinks linearly in mu", run: check_gaussian_limit },
    Check { id: 11, name: "sinc-product", description: "mu = 1/2 cosine product equals sin(xi)/xi", run: check_sinc },
    Check { id: 12, name: "cross-method", description: "grid solver, particles, spectral chain and product agree", run: check_cross_method },
    Check { id: 13, name: "second-moment", description: "closed-form and quadrature second moments agree", run: check_second_moment },
];

/// Ids of all checks, in order.
pub fn check_ids() -> Vec<u32> {
    CHECKS.iter().map(|c| c.id).collect()
}

/// Runs the selected checks (all when `only` is empty) in parallel.
pub fn run_checks(suite: Suite, seed: u64, only: &[u32]) -> VerifyReport {
    let selected: Vec<&Check> = CHECKS
        .iter()
        .filter(|c| only.is_empty() || only.contains(&c.id))
        .collect();
    let checks = selected
        .par_iter()
        .map(|c| run_one(c, suite, seed))
        .collect();
    VerifyReport { suite, checks }
}

fn run_one(c: &Check, suite: Suite, seed: u64) -> CheckResult {
    let start = Instant::now();
    let outcome = (c.run)(suite, seed.wrapping_add(1000 * c.id as u64));
    let runtime_s = start.elapsed().as_secs_f64();
    let (measurements, error) = match outcome {
        Ok(m) => (m, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    let pass = error.is_none() && !measurements.is_empty() && measurements.iter().all(|m| m.pass);
    CheckResult {
        id: c.id,
        name: c.name,
        description: c.description,
        measurements,
        error,
        pass,
        runtime_s,
    }
}

fn below(name: &str, measured: f64, bound: f64) -> Measurement {
    Measurement {
        name: name.into(),
        measured,
        bound: format!("< {bound}"),
        pass: measured < bound,
    }
}

fn at_most(name: &str, measured: f64, bound: f64) -> Measurement {
    Measurement {
        name: name.into(),
        measured,
        bound: format!("<= {bound:.6e}"),
        pass: measured <= bound,
    }
}

fn within(name: &str, measured: f64, lo: f64, hi: f64) -> Measurement {
    Measurement {
        name: name.into(),
        measured,
        bound: format!("in [{lo}, {hi}]"),
        pass: (lo..=hi).contains(&measured),
    }
}

fn sym(mu: f64) -> Result<ModelParams> {
    ModelParams::symmetric(mu)
}

fn grid_points() -> usize {
    GridDensity::points_for_spacing(DX)
}

fn check_mean_conservation(suite: Suite, seed: u64) -> Result<Vec<Measurement>> {
    let (mu, m0, t) = (0.3, 0.2, 10.0);
    let params = sym(mu)?;
    let cfg = AbmConfig::new(suite.particles(), t, InitSpec::PointMass(m0), params, seed);
    let abm_mean = simulate_abm(&cfg)?[0].samples.mean();

    let rho0 = GridDensity::linear(grid_points(), m0)?;
    let sol = solve_pde(&rho0, t, DT, &params, m0, &[])?;
    let (pde_mean, _) = moments_from_grid(&sol.snapshots[0].1);
    Ok(vec![
        below("abm |mean - m0|", (abm_mean - m0).abs(), 0.01),
        below("pde |mean - m0|", (pde_mean - m0).abs(), 1e-3),
    ])
}

fn asymmetric_run(suite: Suite, seed: u64, times: Vec<f64>) -> Result<(ModelParams, Vec<crate::abm::Snapshot>)> {
    let params = ModelParams::new(0.3, 0.6)?;
    let t_end = *times.last().unwrap();
    let cfg = ParticleConfig::new(suite.particles(), t_end, params, InitSpec::Uniform, seed).with_snapshots(times);
    Ok((params, simulate_particles(&cfg)?))
}

fn check_mean_trajectory(suite: Suite, seed: u64) -> Result<Vec<Measurement>> {
    let (params, snaps) = asymmetric_run(suite, seed, vec![1.0, 2.0, 5.0, 10.0])?;
    let worst = snaps
        .iter()
        .map(|s| (s.samples.mean() - mean_at(s.time, 0.0, &params)).abs())
        .fold(0.0, f64::max);
    Ok(vec![below("sup |mean - m_t|", worst, 0.02)])
}

fn check_consensus(suite: Suite, seed: u64) -> Result<Vec<Measurement>> {
    let (_, snaps) = asymmetric_run(suite, seed, vec![5.0, 10.0])?;
    let m0: f64 = 0.0;
    let mut out = Vec::new();
    for s in &snaps {
        let bound = 2.0 * ((1.0 - m0) / (1.0 + m0)) * (-0.3 * s.time).exp() + 0.02;
        out.push(at_most(&format!("W1(rho_{}, delta_1)", s.time), w1_to_point(&s.samples, 1.0), bound));
    }
    out.push(below("variance at t=10", snaps[1].samples.variance(), 0.05));
    Ok(out)
}

fn check_w1_contraction(suite: Suite, seed: u64) -> Result<Vec<Measurement>> {
    let params = sym(0.4)?;
    let times: Vec<f64> = (0..=20).map(|k| 0.5 * k as f64).collect();
    let run = |init: InitSpec| {
        let cfg = ParticleConfig::new(suite.particles(), 10.0, params, init, seed).with_snapshots(times.clone());
        simulate_particles(&cfg)
    };
    let a = run(InitSpec::PointMass(0.0))?;
    let b = run(InitSpec::Uniform)?;
    let mut pts = Vec::with_capacity(times.len());
    for (sa, sb) in a.iter().zip(&b) {
        pts.push((sa.time, coupling_distance(&sa.samples, &sb.samples)?.ln()));
    }
    let rate = -least_squares_slope(&pts);
    Ok(vec![within("fitted decay rate", rate, 0.32, 0.48)])
}

fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

fn check_fourier_contraction(_: Suite, _: u64) -> Result<Vec<Measurement>> {
    let mu = 0.3;
    let params = sym(mu)?;
    let grid = default_xi_grid();
    let times = [1.0, 2.0, 5.0];
    let a0 = GridDensity::uniform(grid_points())?;
    let b0 = GridDensity::tent(grid_points())?;
    let sa = solve_pde(&a0, 5.0, DT, &params, 0.0, &times)?;
    let sb = solve_pde(&b0, 5.0, DT, &params, 0.0, &times)?;
    let d0 = toscani_distance(&a0, &b0, 2.0, &grid)?;
    let mut out = Vec::new();
    for ((t, a), (_, b)) in sa.snapshots.iter().zip(&sb.snapshots) {
        let ratio = toscani_distance(a, b, 2.0, &grid)? / d0;
        let bound = (-(1.0 - (1.0 - mu) * (1.0 - mu)) * t).exp() * 1.05;
        out.push(at_most(&format!("d2 ratio t={t}"), ratio, bound));
    }
    Ok(out)
}

fn check_equilibrium_variance(_: Suite, seed: u64) -> Result<Vec<Measurement>> {
    let s = sample_equilibrium(0.3, 0.0, 1e-9, 1_000_000, seed)?;
    Ok(vec![below("|variance - 0.17647|", (s.variance() - 0.17647).abs(), 0.003)])
}

fn check_uniform_equilibrium(suite: Suite, seed: u64) -> Result<Vec<Measurement>> {
    let s = sample_equilibrium(0.5, 0.0, 1e-9, 1_000_000, seed)?;
    let cfg = ParticleConfig::new(suite.particles(), 20.0, sym(0.5)?, InitSpec::PointMass(0.0), seed + 1);
    let p = simulate_particles(&cfg)?;
    Ok(vec![
        below("sampler KS", ks_distance(&s, uniform_cdf), 0.002),
        below("particles KS at t=20", ks_distance(&p[0].samples, uniform_cdf), 0.005),
    ])
}

fn check_cantor(_: Suite, seed: u64) -> Result<Vec<Measurement>> {
    let mu = 2.0 / 3.0;
    let s = sample_equilibrium(mu, 0.0, 1e-9, 1_000_000, seed)?;
    let c8 = cantor_level(mu, 8)?;
    let outside = s.values().iter().filter(|&&x| !c8.contains(x, 1e-9)).count();
    let c1 = cantor_level(mu, 1)?;
    let left = s.values().iter().filter(|&&x| x <= c1.intervals[0].1 + 1e-9).count() as f64 / s.len() as f64;

    let mu_exact = BigRational::new(2.into(), 3.into());
    let mut mismatched = 0;
    for n in 0..=12 {
        let level = cantor_level_exact(&mu_exact, n)?;
        let formula = BigRational::from_integer(2.into())
            * num_traits::pow(BigRational::from_integer(2.into()) * (BigRational::from_integer(1.into()) - &mu_exact), n as usize);
        if level.total_length() != formula || cantor_total_length_exact(&mu_exact, n)? != formula {
            mismatched += 1;
        }
    }
    let dim_err = (hausdorff_dimension(mu)? - 2f64.ln() / 3f64.ln()).abs();
    Ok(vec![
        at_most("samples outside C_8", outside as f64, 0.0),
        at_most("|left mass - 1/2|", (left - 0.5).abs(), 0.002),
        at_most("exact length mismatches", mismatched as f64, 0.0),
        at_most("|dim - ln2/ln3|", dim_err, 1e-12),
    ])
}

fn check_volcano(_: Suite, seed: u64) -> Result<Vec<Measurement>> {
    let s = sample_equilibrium(MU_VOLCANO, 0.0, 1e-12, 1_000_000, seed)?;
    let h = histogram(&s, 200)?;
    let l1 = h.l1_distance_to(|x| volcano_density(x).unwrap_or(0.0));
    let rho = GridDensity::from_fn(grid_points(), |x| volcano_density(x).unwrap_or(0.0))?;
    let residual = apply_q_star(&rho, 0.0, &sym(MU_VOLCANO)?)?
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    Ok(vec![
        below("histogram L1", l1, 0.02),
        at_most("max |Q*(rho)|", residual, 10.0 * rho.dx()),
    ])
}

fn check_gaussian_limit(_: Suite, _: u64) -> Result<Vec<Measurement>> {
    let grid = log_grid(1e-2, 10.0, 400);
    let d: Vec<f64> = [0.2, 0.1, 0.05]
        .iter()
        .map(|&mu| d4_to_gaussian(mu, &grid, 4000))
        .collect::<Result<_>>()?;
    let monotone = d.windows(2).all(|w| w[1] <= w[0]);
    Ok(vec![
        Measurement {
            name: "d4(0.2), d4(0.1), d4(0.05) decreasing".into(),
            measured: if monotone { 1.0 } else { 0.0 },
            bound: "== 1".into(),
            pass: monotone,
        },
        within("d4(0.1)/d4(0.2)", d[1] / d[0], 0.4, 0.6),
        within("d4(0.05)/d4(0.1)", d[2] / d[1], 0.4, 0.6),
    ])
}

fn check_sinc(_: Suite, _: u64) -> Result<Vec<Measurement>> {
    let f = char_fn_equilibrium(0.5, 60)?;
    let worst = (0..=40_000)
        .map(|k| -20.0 + k as f64 * 1e-3)
        .map(|xi| (f.eval(xi).re - sinc(xi)).abs())
        .fold(0.0, f64::max);
    Ok(vec![below("max |product - sinc|", worst, 1e-9)])
}

fn check_cross_method(suite: Suite, seed: u64) -> Result<Vec<Measurement>> {
    let (mu, t) = (0.25, 20.0);
    let params = sym(mu)?;
    let n = suite.large_particles();
    let rho0 = GridDensity::uniform(grid_points())?;
    let sol = solve_pde(&rho0, t, DT, &params, 0.0, &[])?;
    let grid_samples = sol.snapshots[0].1.quantile_samples(n)?;
    let cfg = ParticleConfig::new(n, t, params, InitSpec::Uniform, seed);
    let particles = simulate_particles(&cfg)?;
    let w1 = wasserstein_1(&grid_samples, &particles[0].samples)?;

    let product = char_fn_equilibrium(mu, 400)?;
    let mut spectral_gap: f64 = 0.0;
    for xi in [1.0, 2.0, 5.0] {
        let depth = min_spectral_depth(mu, xi) + 10;
        let s = solve_spectral(mu, 0.0, &InitSpec::Uniform, xi, depth, t, DT)?;
        spectral_gap = spectral_gap.max((s.top() - product.eval(xi)).norm());
    }
    Ok(vec![
        below("W1(grid, particles)", w1, 0.01),
        below("max |spectral - product|", spectral_gap, 1e-4),
    ])
}

fn check_second_moment(_: Suite, _: u64) -> Result<Vec<Measurement>> {
    let params = sym(0.3)?;
    let (q0, m0) = (0.3, 0.2);
    let mut worst: f64 = 0.0;
    for t in [1.0, 5.0, 10.0] {
        let closed = second_moment_at(t, q0, m0, &params, 1e-3)?;
        let quad = second_moment_quadrature(t, q0, m0, &params, 1e-3)?;
        worst = worst.max((closed - quad).abs());
    }
    Ok(vec![below("max |closed - quadrature|", worst, 1e-8)])
}
