//! Deterministic solvers for the kinetic equation: RK4 on a uniform density
//! grid, and RK4 on the Fourier-side chain over a geometric frequency grid.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::meanfield::{mean_at, second_moment_at, DEFAULT_QUAD_STEP};
use crate::model::{check_mu_open, CharacteristicFunction, InitSpec, ModelParams, SampleSet};

/// Largest symmetric `mu` the grid solver accepts; above it the long-time
/// limit approaches a singular measure.
pub const MAX_GRID_MU: f64 = 0.45;

/// Largest admissible time step.
pub const MAX_DT: f64 = 0.1;

/// Largest tolerated single-step mass drift before renormalization.
pub const MASS_DRIFT_LIMIT: f64 = 1e-4;

/// Largest `|xi_(K+1)|` for which the small-frequency closure is trusted.
pub const CLOSURE_XI_LIMIT: f64 = 0.1;

/// Density tabulated on the uniform grid `x_k = -1 + k dx`, `dx = 2/(n-1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity {
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(Error::domain("n_points", "a grid needs at least 3 points"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::domain("rho", "density values must be finite and nonnegative"));
        }
        Ok(GridDensity { values })
    }

    /// Tabulates `f` and normalizes to unit trapezoid mass.
    pub fn from_fn(n_points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        if n_points < 3 {
            return Err(Error::domain("n_points", "a grid needs at least 3 points"));
        }
        let dx = 2.0 / (n_points - 1) as f64;
        let mut g = GridDensity::new((0..n_points).map(|k| f(-1.0 + k as f64 * dx)).collect())?;
        g.normalize()?;
        Ok(g)
    }

    /// Number of points for grid spacing `dx` (rounded to the nearest grid).
    pub fn points_for_spacing(dx: f64) -> usize {
        (2.0 / dx).round() as usize + 1
    }

    pub fn uniform(n_points: usize) -> Result<Self> {
        Self::from_fn(n_points, |_| 0.5)
    }

    /// Linear density `(1 + 3 m x) / 2` with mean `m`, `|m| <= 1/3`.
    pub fn linear(n_points: usize, mean: f64) -> Result<Self> {
        if mean.abs() > 1.0 / 3.0 {
            return Err(Error::domain("mean", format!("{mean} is outside [-1/3, 1/3]")));
        }
        Self::from_fn(n_points, |x| 0.5 * (1.0 + 3.0 * mean * x))
    }

    /// Tent density `1 - |x|`.
    pub fn tent(n_points: usize) -> Result<Self> {
        Self::from_fn(n_points, |x| 1.0 - x.abs())
    }

    /// A point mass at `x0` smoothed into a tent of half-width `width`,
    /// truncated to `[-1, 1]`.
    pub fn mollified_point_mass(n_points: usize, x0: f64, width: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&x0) {
            return Err(Error::domain("x0", format!("{x0} is outside [-1, 1]")));
        }
        let dx = 2.0 / (n_points.max(2) - 1) as f64;
        if !(width >= dx) {
            return Err(Error::domain("width", format!("{width} is below the grid spacing {dx}")));
        }
        Self::from_fn(n_points, |x| (width - (x - x0).abs()).max(0.0))
    }

    pub fn n_points(&self) -> usize {
        self.values.len()
    }

    pub fn dx(&self) -> f64 {
        2.0 / (self.values.len() - 1) as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        -1.0 + k as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.x(k)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.values, self.dx())
    }

    fn normalize(&mut self) -> Result<()> {
        let m = self.mass();
        if !(m > 0.0) {
            return Err(Error::domain("rho", "density has zero mass"));
        }
        self.values.iter_mut().for_each(|v| *v /= m);
        Ok(())
    }

    /// Linear interpolation; zero outside `[-1, 1]`.
    #[inline]
    pub fn interpolate(&self, y: f64) -> f64 {
        interpolate(&self.values, self.dx(), y)
    }

    /// CDF at the grid nodes (cumulative trapezoid).
    pub fn cdf(&self) -> Vec<f64> {
        let dx = self.dx();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(self.values.len());
        out.push(0.0);
        for w in self.values.windows(2) {
            acc += 0.5 * dx * (w[0] + w[1]);
            out.push(acc);
        }
        out
    }

    /// `n` deterministic quantile points `F^{-1}((k + 1/2) / n)`, with the
    /// CDF interpolated linearly between nodes.
    pub fn quantile_samples(&self, n: usize) -> Result<SampleSet> {
        if n == 0 {
            return Err(Error::domain("n", "at least one sample is required"));
        }
        let cdf = self.cdf();
        let total = *cdf.last().unwrap();
        let dx = self.dx();
        let mut out = Vec::with_capacity(n);
        let mut j = 0;
        for k in 0..n {
            let u = (k as f64 + 0.5) / n as f64 * total;
            while j + 2 < cdf.len() && cdf[j + 1] < u {
                j += 1;
            }
            let span = cdf[j + 1] - cdf[j];
            let frac = if span > 0.0 { ((u - cdf[j]) / span).clamp(0.0, 1.0) } else { 0.5 };
            out.push((-1.0 + (j as f64 + frac) * dx).clamp(-1.0, 1.0));
        }
        SampleSet::new(out)
    }

    /// W1 between two densities on the same grid: `int |F - G| dx`.
    pub fn w1(&self, other: &GridDensity) -> Result<f64> {
        if self.n_points() != other.n_points() {
            return Err(Error::domain("grid", "densities live on different grids"));
        }
        let diff: Vec<f64> = self
            .cdf()
            .iter()
            .zip(other.cdf())
            .map(|(a, b)| (a - b).abs())
            .collect();
        Ok(trapezoid(&diff, self.dx()))
    }
}

impl CharacteristicFunction for GridDensity {
    /// Trapezoid rule for `int rho(x) exp(-i x xi) dx`.
    fn eval(&self, xi: f64) -> Complex64 {
        let dx = self.dx();
        let n = self.values.len();
        let (mut re, mut im) = (0.0, 0.0);
        for (k, &v) in self.values.iter().enumerate() {
            let w = if k == 0 || k == n - 1 { 0.5 } else { 1.0 };
            let (s, c) = (self.x(k) * xi).sin_cos();
            re += w * v * c;
            im -= w * v * s;
        }
        Complex64::new(re * dx, im * dx)
    }
}

fn trapezoid(v: &[f64], dx: f64) -> f64 {
    let n = v.len();
    dx * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
}

fn trapezoid_weighted(v: &[f64], dx: f64, w: impl Fn(usize) -> f64) -> f64 {
    let n = v.len();
    let inner: f64 = v.iter().enumerate().map(|(k, x)| x * w(k)).sum();
    dx * (inner - 0.5 * (v[0] * w(0) + v[n - 1] * w(n - 1)))
}

#[inline]
fn interpolate(v: &[f64], dx: f64, y: f64) -> f64 {
    let s = (y + 1.0) / dx;
    let last = (v.len() - 1) as f64;
    if !(s >= 0.0 && s <= last) {
        // tolerate round-off just outside the grid
        if s > -1e-9 && s < 0.0 {
            return v[0];
        }
        if s > last && s < last + 1e-9 {
            return v[v.len() - 1];
        }
        return 0.0;
    }
    let k = (s.floor() as usize).min(v.len() - 2);
    let f = s - k as f64;
    v[k] + f * (v[k + 1] - v[k])
}

/// Gain/loss operator of the kinetic equation, evaluated on the grid.
///
/// Preimages `(x - mu_plus)/(1 - mu_plus)` and `(x + mu_minus)/(1 - mu_minus)`
/// are interpolated linearly. A grid node lying exactly on an indicator
/// threshold takes half the gain (the trapezoid-consistent value at a jump),
/// and each gain term is corrected by a linear factor so its trapezoid mass
/// and first moment equal those of the exact affine image of `rho`. The
/// result integrates to zero and moves the first moment at the exact rate.
pub fn apply_q_star(rho: &GridDensity, m: f64, params: &ModelParams) -> Result<Vec<f64>> {
    check_strong_form(params)?;
    let mut out = vec![0.0; rho.n_points()];
    q_star_into(&rho.values, m, params, &mut out);
    Ok(out)
}

fn check_strong_form(params: &ModelParams) -> Result<()> {
    if params.mu_plus >= 1.0 || params.mu_minus >= 1.0 {
        return Err(Error::domain(
            "mu",
            "mu = 1 maps everything to the endpoints; the density form is undefined",
        ));
    }
    Ok(())
}

fn q_star_into(rho: &[f64], m: f64, params: &ModelParams, out: &mut [f64]) {
    let n = rho.len();
    let dx = 2.0 / (n - 1) as f64;
    let (mp, mm) = (params.mu_plus, params.mu_minus);
    let a_plus = 2.0 * mp - 1.0;
    let b_minus = 1.0 - 2.0 * mm;
    let on_node = 1e-9 * dx;
    let c_plus = 0.5 * (1.0 + m) / (1.0 - mp);
    let c_minus = 0.5 * (1.0 - m) / (1.0 - mm);

    let mut gain_plus = vec![0.0; n];
    let mut gain_minus = vec![0.0; n];
    gain_plus
        .par_iter_mut()
        .zip(gain_minus.par_iter_mut())
        .enumerate()
        .for_each(|(k, (gp, gm))| {
            let x = -1.0 + k as f64 * dx;
            let wp = if (x - a_plus).abs() <= on_node {
                0.5
            } else if x > a_plus {
                1.0
            } else {
                0.0
            };
            let wm = if (x - b_minus).abs() <= on_node {
                0.5
            } else if x < b_minus {
                1.0
            } else {
                0.0
            };
            if wp > 0.0 {
                *gp = wp * c_plus * interpolate(rho, dx, (x - mp) / (1.0 - mp));
            }
            if wm > 0.0 {
                *gm = wm * c_minus * interpolate(rho, dx, (x + mm) / (1.0 - mm));
            }
        });

    // Each gain term is the image of rho under an affine map, so its mass and
    // first moment are known exactly from those of rho. A linear factor
    // `a + b x` restores both on the grid.
    let xs = |k: usize| -1.0 + k as f64 * dx;
    let mass = trapezoid(rho, dx);
    let first = trapezoid_weighted(rho, dx, |k| xs(k));
    let terms = [
        (&mut gain_plus, 0.5 * (1.0 + m), 1.0 - mp, mp),
        (&mut gain_minus, 0.5 * (1.0 - m), 1.0 - mm, -mm),
    ];
    for (gain, share, slope, shift) in terms {
        let want0 = share * mass;
        let want1 = share * (slope * first + shift * mass);
        let g0 = trapezoid(gain, dx);
        if !(g0 > 0.0) {
            continue;
        }
        let g1 = trapezoid_weighted(gain, dx, |k| xs(k));
        let g2 = trapezoid_weighted(gain, dx, |k| xs(k) * xs(k));
        let det = g0 * g2 - g1 * g1;
        let (a, b) = if det > 1e-12 * g0 * g0 {
            ((want0 * g2 - want1 * g1) / det, (g0 * want1 - g1 * want0) / det)
        } else {
            (want0 / g0, 0.0)
        };
        gain.iter_mut().enumerate().for_each(|(k, g)| *g *= a + b * xs(k));
    }
    for k in 0..n {
        out[k] = gain_plus[k] + gain_minus[k] - rho[k];
    }
}

/// Snapshots of a grid solve plus per-step diagnostics.
#[derive(Clone, Debug)]
pub struct PdeSolution {
    pub snapshots: Vec<(f64, GridDensity)>,
    /// Largest `|mass change|` of a single RK4 step, before renormalization.
    pub max_mass_drift: f64,
    pub steps: usize,
}

/// Integrates the kinetic equation with classical RK4, `m_t` taken from the
/// closed-form mean. After each step negatives are clipped and the mass is
/// renormalized to one.
pub fn solve_pde(
    rho0: &GridDensity,
    t_end: f64,
    dt: f64,
    params: &ModelParams,
    m0: f64,
    snapshot_times: &[f64],
) -> Result<PdeSolution> {
    check_strong_form(params)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain("dt", format!("{dt} must be positive")));
    }
    if dt > MAX_DT {
        return Err(Error::domain("dt", format!("{dt} exceeds the stability guard {MAX_DT}")));
    }
    if params.symmetric && params.mu_plus > MAX_GRID_MU {
        return Err(Error::domain(
            "mu",
            format!(
                "symmetric mu = {} > {MAX_GRID_MU}: the equilibrium approaches a singular (Cantor-like) \
                 measure a fixed grid cannot resolve; use the equilibrium sampler or product formula instead",
                params.mu_plus
            ),
        ));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::domain("t_end", format!("{t_end} is not a nonnegative time")));
    }
    let times: Vec<f64> = if snapshot_times.is_empty() { vec![t_end] } else { snapshot_times.to_vec() };
    crate::abm::check_snapshot_times(&times, t_end)?;
    let (grid_mean, _) = moments_from_grid(rho0);
    if (grid_mean - m0).abs() > 1e-4 {
        return Err(Error::domain(
            "m0",
            format!("initial density has mean {grid_mean}, inconsistent with m0 = {m0}"),
        ));
    }

    let n = rho0.n_points();
    let dx = rho0.dx();
    let mut rho = rho0.values.clone();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut stage = vec![0.0; n];
    let mut t = 0.0;
    let mut max_drift: f64 = 0.0;
    let mut steps = 0;
    let mut snapshots = Vec::with_capacity(times.len());

    for &ts in &times {
        while ts - t > 1e-12 {
            let h = dt.min(ts - t);
            let m_a = mean_at(t, m0, params);
            let m_b = mean_at(t + 0.5 * h, m0, params);
            let m_c = mean_at(t + h, m0, params);
            let mass_before = trapezoid(&rho, dx);

            q_star_into(&rho, m_a, params, &mut k1);
            axpy(&rho, 0.5 * h, &k1, &mut stage);
            q_star_into(&stage, m_b, params, &mut k2);
            axpy(&rho, 0.5 * h, &k2, &mut stage);
            q_star_into(&stage, m_b, params, &mut k3);
            axpy(&rho, h, &k3, &mut stage);
            q_star_into(&stage, m_c, params, &mut k4);
            for i in 0..n {
                rho[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }

            let drift = (trapezoid(&rho, dx) - mass_before).abs();
            if !drift.is_finite() || drift > MASS_DRIFT_LIMIT {
                return Err(Error::NumericInstability(format!(
                    "mass drift {drift:e} in one step at t = {t}"
                )));
            }
            max_drift = max_drift.max(drift);
            rho.iter_mut().for_each(|v| *v = v.max(0.0));
            let mass = trapezoid(&rho, dx);
            rho.iter_mut().for_each(|v| *v /= mass);
            t += h;
            steps += 1;
        }
        snapshots.push((ts, GridDensity { values: rho.clone() }));
    }
    Ok(PdeSolution {
        snapshots,
        max_mass_drift: max_drift,
        steps,
    })
}

fn axpy(base: &[f64], a: f64, dir: &[f64], out: &mut [f64]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + a * d;
    }
}

/// Trapezoid first and second moments.
pub fn moments_from_grid(rho: &GridDensity) -> (f64, f64) {
    let dx = rho.dx();
    let first: Vec<f64> = rho.values.iter().enumerate().map(|(k, v)| rho.x(k) * v).collect();
    let second: Vec<f64> = rho.values.iter().enumerate().map(|(k, v)| rho.x(k).powi(2) * v).collect();
    let mass = rho.mass();
    (trapezoid(&first, dx) / mass, trapezoid(&second, dx) / mass)
}

/// Fourier-side state on the geometric grid `xi_n = xi_top (1 - mu)^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub mu: f64,
    pub m0: f64,
    pub xi_top: f64,
    pub time: f64,
    pub xis: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl SpectralState {
    pub fn depth(&self) -> usize {
        self.values.len() - 1
    }

    /// Transform at `xi_top`.
    pub fn top(&self) -> Complex64 {
        self.values[0]
    }
}

/// Smallest depth whose closure frequency `|xi_(K+1)|` is within the limit.
pub fn min_spectral_depth(mu: f64, xi_top: f64) -> usize {
    let mut k = 1;
    while xi_top.abs() * (1.0 - mu).powi(k as i32 + 1) > CLOSURE_XI_LIMIT {
        k += 1;
    }
    k
}

/// Integrates the Fourier chain
/// `d/dt f(xi_n) = [cos(mu xi_n) - i m0 sin(mu xi_n)] f(xi_(n+1)) - f(xi_n)`
/// for `n = 0..=depth` with RK4. The value below the deepest node is closed
/// by the moment expansion `1 - i m0 xi - q_t xi^2 / 2`.
pub fn solve_spectral(
    mu: f64,
    m0: f64,
    init: &InitSpec,
    xi_top: f64,
    depth: usize,
    t_end: f64,
    dt: f64,
) -> Result<SpectralState> {
    check_mu_open(mu)?;
    init.validate()?;
    init.check_mean(m0)?;
    if depth < 1 {
        return Err(Error::domain("depth", "depth must be at least 1"));
    }
    if !(xi_top.is_finite() && xi_top > 0.0) {
        return Err(Error::domain("xi_top", format!("{xi_top} must be positive")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::domain("dt", format!("{dt} must be positive")));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::domain("t_end", format!("{t_end} is not a nonnegative time")));
    }
    let xi_next = xi_top * (1.0 - mu).powi(depth as i32 + 1);
    if xi_next > CLOSURE_XI_LIMIT {
        return Err(Error::DepthTooSmall {
            xi_next,
            limit: CLOSURE_XI_LIMIT,
        });
    }
    let params = ModelParams::symmetric(mu)?;
    let q0 = init.second_moment();
    let xis: Vec<f64> = (0..=depth).map(|k| xi_top * (1.0 - mu).powi(k as i32)).collect();
    let coef: Vec<Complex64> = xis
        .iter()
        .map(|&x| Complex64::new((mu * x).cos(), -m0 * (mu * x).sin()))
        .collect();
    let closure = |t: f64| -> Complex64 {
        let q = second_moment_at(t, q0, m0, &params, DEFAULT_QUAD_STEP).unwrap_or(q0);
        Complex64::new(1.0 - 0.5 * q * xi_next * xi_next, -m0 * xi_next)
    };
    let rhs = |t: f64, v: &[Complex64], out: &mut [Complex64]| {
        let tail = closure(t);
        for k in 0..v.len() {
            let below = if k + 1 < v.len() { v[k + 1] } else { tail };
            out[k] = coef[k] * below - v[k];
        }
    };

    let mut v: Vec<Complex64> = xis.iter().map(|&x| init.char_fn(x)).collect();
    let len = v.len();
    let zero = Complex64::new(0.0, 0.0);
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
        (vec![zero; len], vec![zero; len], vec![zero; len], vec![zero; len], vec![zero; len]);
    let mut t = 0.0;
    while t_end - t > 1e-12 {
        let h = dt.min(t_end - t);
        rhs(t, &v, &mut k1);
        for i in 0..len {
            tmp[i] = v[i] + k1[i] * (0.5 * h);
        }
        rhs(t + 0.5 * h, &tmp, &mut k2);
        for i in 0..len {
            tmp[i] = v[i] + k2[i] * (0.5 * h);
        }
        rhs(t + 0.5 * h, &tmp, &mut k3);
        for i in 0..len {
            tmp[i] = v[i] + k3[i] * h;
        }
        rhs(t + h, &tmp, &mut k4);
        for i in 0..len {
            v[i] += (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (h / 6.0);
        }
        t += h;
    }
    Ok(SpectralState {
        mu,
        m0,
        xi_top,
        time: t_end,
        xis,
        values: v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{char_fn_equilibrium, volcano_density};
    use crate::meanfield::stationary_variance;
    use crate::metrics::toscani_distance;
    use crate::rational::MU_VOLCANO;

    const PAPER_POINTS: usize = 20_001; // dx = 1e-4

    fn sym(mu: f64) -> ModelParams {
        ModelParams::symmetric(mu).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridDensity::new(vec![1.0, 1.0]).is_err());
        assert!(GridDensity::new(vec![1.0, -1.0, 1.0]).is_err());
        assert_eq!(GridDensity::points_for_spacing(1e-4), PAPER_POINTS);
        let g = GridDensity::uniform(PAPER_POINTS).unwrap();
        assert!((g.dx() - 1e-4).abs() < 1e-18);
        assert!((g.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn q_star_vanishes_on_uniform_at_half() {
        let g = GridDensity::uniform(PAPER_POINTS).unwrap();
        let d = apply_q_star(&g, 0.0, &sym(0.5)).unwrap();
        let worst = d[1..d.len() - 1].iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst < 1e-12, "max |Q*| = {worst}");
    }

    #[test]
    fn q_star_vanishes_on_volcano() {
        let g = GridDensity::from_fn(PAPER_POINTS, |x| volcano_density(x).unwrap()).unwrap();
        let d = apply_q_star(&g, 0.0, &sym(MU_VOLCANO)).unwrap();
        let worst = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst <= 10.0 * g.dx(), "max residual {worst}");
    }

    #[test]
    fn q_star_conserves_mass() {
        let cases: Vec<(GridDensity, f64, ModelParams)> = vec![
            (GridDensity::uniform(2001).unwrap(), 0.0, sym(0.3)),
            (GridDensity::uniform(PAPER_POINTS).unwrap(), 0.2, sym(0.37)),
            (GridDensity::tent(1001).unwrap(), -0.4, ModelParams::new(0.3, 0.6).unwrap()),
            (GridDensity::linear(777, 0.3).unwrap(), 0.3, ModelParams::new(0.15, 0.05).unwrap()),
            (GridDensity::from_fn(3001, |x| (5.0 * x).sin().powi(2)).unwrap(), 0.5, ModelParams::new(0.9, 0.2).unwrap()),
        ];
        for (g, m, p) in cases {
            let d = apply_q_star(&g, m, &p).unwrap();
            let integral = trapezoid(&d, g.dx());
            assert!(integral.abs() < 1e-8, "integral {integral}");
        }
    }

    #[test]
    fn q_star_rejects_unit_mu() {
        let g = GridDensity::uniform(11).unwrap();
        assert!(apply_q_star(&g, 0.0, &ModelParams::new(0.5, 1.0).unwrap()).is_err());
    }

    #[test]
    fn moments_examples() {
        let (m, q) = moments_from_grid(&GridDensity::uniform(PAPER_POINTS).unwrap());
        assert!(m.abs() < 1e-14);
        assert!((q - 1.0 / 3.0).abs() < 1e-8);

        let mut v = vec![0.0; 101];
        v[100] = 1.0;
        let spike = GridDensity::from_fn(101, |x| if x > 0.999 { 1.0 } else { 0.0 }).unwrap();
        let (m, q) = moments_from_grid(&spike);
        assert!((m - 1.0).abs() < 1e-12 && (q - 1.0).abs() < 1e-12);

        let g = GridDensity::from_fn(PAPER_POINTS, |x| volcano_density(x).unwrap()).unwrap();
        let (m, q) = moments_from_grid(&g);
        assert!(m.abs() < 1e-8);
        assert!((q - stationary_variance(MU_VOLCANO, 0.0).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn zero_time_is_identity() {
        let g = GridDensity::tent(501).unwrap();
        let sol = solve_pde(&g, 0.0, 0.01, &sym(0.3), 0.0, &[]).unwrap();
        assert_eq!(sol.snapshots[0].1, g);
        assert_eq!(sol.steps, 0);
    }

    #[test]
    fn solver_guards() {
        let g = GridDensity::uniform(101).unwrap();
        assert!(solve_pde(&g, 1.0, 0.2, &sym(0.3), 0.0, &[]).is_err());
        assert!(solve_pde(&g, 1.0, 0.0, &sym(0.3), 0.0, &[]).is_err());
        assert!(solve_pde(&g, 1.0, 0.01, &sym(0.3), 0.3, &[]).is_err());
        match solve_pde(&g, 1.0, 0.01, &sym(0.6), 0.0, &[]) {
            Err(Error::Domain { reason, .. }) => assert!(reason.contains("equilibrium")),
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn mean_conserved_with_offset() {
        let g = GridDensity::linear(PAPER_POINTS, 0.2).unwrap();
        let times = [1.0, 2.5, 5.0, 10.0];
        let sol = solve_pde(&g, 10.0, 0.01, &sym(0.3), 0.2, &times).unwrap();
        for (t, rho) in &sol.snapshots {
            let (m, _) = moments_from_grid(rho);
            assert!((m - 0.2).abs() < 1e-3, "t={t} m={m}");
        }
        assert!(sol.max_mass_drift < 1e-8, "drift {}", sol.max_mass_drift);
    }

    #[test]
    fn mean_fidelity_across_parameters() {
        let mut cases: Vec<ModelParams> = [0.25, 0.3, 0.4].iter().map(|&mu| sym(mu)).collect();
        cases.push(ModelParams::new(0.3, 0.6).unwrap());
        let times = [2.0, 5.0, 10.0, 20.0];
        for p in cases {
            let g = GridDensity::uniform(PAPER_POINTS).unwrap();
            let sol = solve_pde(&g, 20.0, 0.01, &p, 0.0, &times).unwrap();
            for (t, rho) in &sol.snapshots {
                let (m, _) = moments_from_grid(rho);
                let exact = mean_at(*t, 0.0, &p);
                assert!((m - exact).abs() < 1e-3, "{p:?} t={t}: {m} vs {exact}");
            }
            assert!(sol.max_mass_drift < 1e-8, "{p:?} drift {}", sol.max_mass_drift);
        }
    }

    #[test]
    fn spectral_recovers_sinc_at_half() {
        let depth = min_spectral_depth(0.5, 5.0) + 10;
        let s = solve_spectral(0.5, 0.0, &InitSpec::PointMass(0.0), 5.0, depth, 30.0, 0.01).unwrap();
        let target = 5f64.sin() / 5.0;
        assert!((s.top() - Complex64::new(target, 0.0)).norm() < 1e-4);
    }

    #[test]
    fn spectral_zero_time_and_guards() {
        let s = solve_spectral(0.3, 0.0, &InitSpec::Uniform, 2.0, 40, 0.0, 0.01).unwrap();
        for (x, v) in s.xis.iter().zip(&s.values) {
            assert_eq!(*v, InitSpec::Uniform.char_fn(*x));
        }
        assert!(matches!(
            solve_spectral(0.3, 0.0, &InitSpec::Uniform, 5.0, 2, 1.0, 0.01),
            Err(Error::DepthTooSmall { .. })
        ));
        assert!(solve_spectral(0.3, 0.0, &InitSpec::Uniform, 5.0, 0, 1.0, 0.01).is_err());
        assert!(solve_spectral(1.0, 0.0, &InitSpec::Uniform, 5.0, 40, 1.0, 0.01).is_err());
    }

    #[test]
    fn spectral_reaches_equilibrium_product() {
        let xi = 1.7;
        let s = solve_spectral(0.3, 0.0, &InitSpec::Uniform, xi, min_spectral_depth(0.3, xi) + 10, 30.0, 0.01).unwrap();
        let eq = char_fn_equilibrium(0.3, 200).unwrap().eval(xi);
        assert!((s.top().norm() - eq.norm()).abs() < 1e-4);
        assert!((s.top() - eq).norm() < 1e-4);
    }

    #[test]
    fn spectral_with_offset_mean_tracks_particles() {
        // nonzero m0: chain with complex coefficients against a direct product
        let (mu, m0) = (0.4, 0.3);
        let xi = 2.0;
        let s = solve_spectral(mu, m0, &InitSpec::PointMass(m0), xi, min_spectral_depth(mu, xi) + 10, 40.0, 0.01).unwrap();
        let eq = crate::equilibrium::char_fn_equilibrium_biased(mu, m0, 200).unwrap().eval(xi);
        assert!((s.top() - eq).norm() < 1e-4, "{} vs {}", s.top(), eq);
    }

    #[test]
    fn spectral_agrees_with_grid() {
        for mu in [0.25, 0.4] {
            let g = GridDensity::uniform(PAPER_POINTS).unwrap();
            let sol = solve_pde(&g, 10.0, 0.01, &sym(mu), 0.0, &[]).unwrap();
            let rho = &sol.snapshots[0].1;
            for xi in [1.0, 2.0, 5.0] {
                let depth = min_spectral_depth(mu, xi) + 10;
                let s = solve_spectral(mu, 0.0, &InitSpec::Uniform, xi, depth, 10.0, 0.01).unwrap();
                let diff = (rho.eval(xi) - s.top()).norm();
                assert!(diff < 1e-3, "mu={mu} xi={xi} diff={diff}");
            }
        }
    }

    #[test]
    fn contraction_in_fourier_and_w1() {
        let mu = 0.3;
        let grid = crate::metrics::default_xi_grid();
        let a0 = GridDensity::uniform(PAPER_POINTS).unwrap();
        let b0 = GridDensity::tent(PAPER_POINTS).unwrap();
        let times = [1.0, 2.0, 5.0];
        let sa = solve_pde(&a0, 5.0, 0.01, &sym(mu), 0.0, &times).unwrap();
        let sb = solve_pde(&b0, 5.0, 0.01, &sym(mu), 0.0, &times).unwrap();
        let d0 = toscani_distance(&a0, &b0, 2.0, &grid).unwrap();
        let w0 = a0.w1(&b0).unwrap();
        for ((t, a), (_, b)) in sa.snapshots.iter().zip(&sb.snapshots) {
            let ratio = toscani_distance(a, b, 2.0, &grid).unwrap() / d0;
            let bound = (-(1.0 - (1.0 - mu).powi(2)) * t).exp() * 1.05;
            assert!(ratio <= bound, "t={t} d2 ratio {ratio} > {bound}");
            let w = a.w1(b).unwrap();
            assert!(w <= w0 * (-mu * t).exp() * 1.05, "t={t} w1 {w}");
        }
    }

    #[test]
    fn quantile_samples_follow_density() {
        let g = GridDensity::tent(2001).unwrap();
        let s = g.quantile_samples(10_000).unwrap();
        assert!(s.mean().abs() < 1e-6);
        assert!((s.variance() - 1.0 / 6.0).abs() < 1e-4);
        let cdf = |x: f64| if x < 0.0 { 0.5 * (1.0 + x).powi(2) } else { 1.0 - 0.5 * (1.0 - x).powi(2) };
        assert!(crate::metrics::ks_distance(&s, cdf) < 1e-3);
    }

    #[test]
    fn grid_char_fn_matches_closed_form() {
        let g = GridDensity::uniform(PAPER_POINTS).unwrap();
        for xi in [0.5, 2.0, 10.0] {
            assert!((g.eval(xi).re - xi.sin() / xi).abs() < 1e-8);
            assert!(g.eval(xi).im.abs() < 1e-12);
        }
    }

    #[test]
    fn mollified_point_mass_centered() {
        let g = GridDensity::mollified_point_mass(2001, 0.1, 0.05).unwrap();
        let (m, _) = moments_from_grid(&g);
        assert!((m - 0.1).abs() < 1e-10);
        assert!(GridDensity::mollified_point_mass(2001, 0.1, 1e-6).is_err());
    }
}
