//! C ABI for `opinion-kinetics`.
//!
//! Every fallible function returns an [`OpkStatus`] and writes results
//! through out-pointers. On failure the message is kept per thread and can
//! be read with [`opk_last_error_message`]. Sample sets and grid densities
//! cross the boundary as opaque handles that the caller releases with the
//! matching `_free` function.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use opinion_kinetics::abm::{simulate_abm, AbmConfig};
use opinion_kinetics::equilibrium::{
    cantor_total_length, char_fn_equilibrium_biased, hausdorff_dimension, sample_equilibrium,
};
use opinion_kinetics::kinetic::{solve_pde, GridDensity};
use opinion_kinetics::meanfield::{mean_at, second_moment_at, simulate_particles, stationary_variance, ParticleConfig};
use opinion_kinetics::metrics::{ks_distance, uniform_cdf, wasserstein_1, wasserstein_2};
use opinion_kinetics::verify::{run_checks, Suite};
use opinion_kinetics::{CharacteristicFunction, Error, InitSpec, ModelParams, SampleSet};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpkStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    NumericInstability = 3,
    DepthTooSmall = 4,
    ScaleGuard = 5,
    Io = 6,
    Parse = 7,
    /// A Rust panic was caught at the boundary.
    Internal = 8,
}

/// Initial distribution selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpkInit {
    /// Uniform on [-1, 1]; the value argument is ignored.
    Uniform = 0,
    /// Point mass at the value argument.
    PointMass = 1,
}

/// Check suite selector for `opk_verify`.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpkSuite {
    Fast = 0,
    Paper = 1,
}

/// Opaque sample set.
pub struct OpkSampleSet(SampleSet);

/// Opaque grid density on [-1, 1].
pub struct OpkGridDensity(GridDensity);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> OpkStatus {
    match err {
        Error::Domain { .. } => OpkStatus::Domain,
        Error::NumericInstability(_) => OpkStatus::NumericInstability,
        Error::DepthTooSmall { .. } => OpkStatus::DepthTooSmall,
        Error::ScaleGuard { .. } => OpkStatus::ScaleGuard,
        Error::Io(_) => OpkStatus::Io,
        Error::Parse(_) => OpkStatus::Parse,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), OpkStatusError>) -> OpkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OpkStatus::Ok
        }
        Ok(Err(OpkStatusError::Null(name))) => {
            set_last_error(format!("null pointer: {name}"));
            OpkStatus::NullPointer
        }
        Ok(Err(OpkStatusError::Lib(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic".into());
            OpkStatus::Internal
        }
    }
}

enum OpkStatusError {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for OpkStatusError {
    fn from(e: Error) -> Self {
        OpkStatusError::Lib(e)
    }
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, OpkStatusError> {
    p.as_mut().ok_or(OpkStatusError::Null(name))
}

unsafe fn input<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, OpkStatusError> {
    p.as_ref().ok_or(OpkStatusError::Null(name))
}

fn params(mu_minus: f64, mu_plus: f64) -> Result<ModelParams, Error> {
    ModelParams::new(mu_minus, mu_plus)
}

fn init_spec(kind: OpkInit, value: f64) -> InitSpec {
    match kind {
        OpkInit::Uniform => InitSpec::Uniform,
        OpkInit::PointMass => InitSpec::PointMass(value),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn opk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL; 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn opk_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the number of bytes written without the NUL.
#[no_mangle]
pub unsafe extern "C" fn opk_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let bytes = e.borrow().as_ref().map(|c| c.as_bytes().to_vec()).unwrap_or_default();
        let n = bytes.len().min(len - 1);
        ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
        *buf.add(n) = 0;
        n
    })
}

/// Closed-form mean `m_t`.
#[no_mangle]
pub unsafe extern "C" fn opk_mean_at(t: f64, m0: f64, mu_minus: f64, mu_plus: f64, m_out: *mut f64) -> OpkStatus {
    guard(|| {
        let p = params(mu_minus, mu_plus)?;
        *out(m_out, "m_out")? = mean_at(t, m0, &p);
        Ok(())
    })
}

/// Second moment `q_t` with quadrature step 1e-3.
#[no_mangle]
pub unsafe extern "C" fn opk_second_moment_at(
    t: f64,
    q0: f64,
    m0: f64,
    mu_minus: f64,
    mu_plus: f64,
    q_out: *mut f64,
) -> OpkStatus {
    guard(|| {
        let p = params(mu_minus, mu_plus)?;
        *out(q_out, "q_out")? = second_moment_at(t, q0, m0, &p, 1e-3)?;
        Ok(())
    })
}

/// Equilibrium variance `mu (1 - m0^2) / (2 - mu)`.
#[no_mangle]
pub unsafe extern "C" fn opk_stationary_variance(mu: f64, m0: f64, var_out: *mut f64) -> OpkStatus {
    guard(|| {
        *out(var_out, "var_out")? = stationary_variance(mu, m0)?;
        Ok(())
    })
}

/// Equilibrium characteristic function at `xi`.
#[no_mangle]
pub unsafe extern "C" fn opk_char_fn_equilibrium(
    mu: f64,
    m0: f64,
    n_terms: usize,
    xi: f64,
    re_out: *mut f64,
    im_out: *mut f64,
) -> OpkStatus {
    guard(|| {
        let v = char_fn_equilibrium_biased(mu, m0, n_terms)?.eval(xi);
        *out(re_out, "re_out")? = v.re;
        *out(im_out, "im_out")? = v.im;
        Ok(())
    })
}

/// Lebesgue measure of the level-`n` Cantor set.
#[no_mangle]
pub unsafe extern "C" fn opk_cantor_total_length(mu: f64, n: u32, len_out: *mut f64) -> OpkStatus {
    guard(|| {
        *out(len_out, "len_out")? = cantor_total_length(mu, n)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn opk_hausdorff_dimension(mu: f64, dim_out: *mut f64) -> OpkStatus {
    guard(|| {
        *out(dim_out, "dim_out")? = hausdorff_dimension(mu)?;
        Ok(())
    })
}

fn store_set(set_out: *mut *mut OpkSampleSet, s: SampleSet) -> Result<(), OpkStatusError> {
    let slot = unsafe { out(set_out, "set_out")? };
    *slot = Box::into_raw(Box::new(OpkSampleSet(s)));
    Ok(())
}

/// Draws `n` samples of the truncated equilibrium series.
#[no_mangle]
pub unsafe extern "C" fn opk_sample_equilibrium(
    mu: f64,
    m0: f64,
    eps_trunc: f64,
    n: usize,
    seed: u64,
    set_out: *mut *mut OpkSampleSet,
) -> OpkStatus {
    guard(|| store_set(set_out, sample_equilibrium(mu, m0, eps_trunc, n, seed)?))
}

/// Final state of an agent simulation with `n` agents.
#[no_mangle]
pub unsafe extern "C" fn opk_simulate_abm(
    n: usize,
    t_end: f64,
    mu_minus: f64,
    mu_plus: f64,
    init: OpkInit,
    init_value: f64,
    seed: u64,
    set_out: *mut *mut OpkSampleSet,
) -> OpkStatus {
    guard(|| {
        let cfg = AbmConfig::new(n, t_end, init_spec(init, init_value), params(mu_minus, mu_plus)?, seed);
        store_set(set_out, simulate_abm(&cfg)?.pop().expect("final snapshot").samples)
    })
}

/// Final state of `n` mean-field particles.
#[no_mangle]
pub unsafe extern "C" fn opk_simulate_particles(
    n: usize,
    t_end: f64,
    mu_minus: f64,
    mu_plus: f64,
    init: OpkInit,
    init_value: f64,
    seed: u64,
    set_out: *mut *mut OpkSampleSet,
) -> OpkStatus {
    guard(|| {
        let cfg = ParticleConfig::new(n, t_end, params(mu_minus, mu_plus)?, init_spec(init, init_value), seed);
        store_set(set_out, simulate_particles(&cfg)?.pop().expect("final snapshot").samples)
    })
}

/// Copies `len` values from `values` into a new sample set.
#[no_mangle]
pub unsafe extern "C" fn opk_sample_set_from_values(
    values: *const f64,
    len: usize,
    set_out: *mut *mut OpkSampleSet,
) -> OpkStatus {
    guard(|| {
        if values.is_null() {
            return Err(OpkStatusError::Null("values"));
        }
        let v = std::slice::from_raw_parts(values, len).to_vec();
        store_set(set_out, SampleSet::new(v)?)
    })
}

/// Number of values; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn opk_sample_set_len(set: *const OpkSampleSet) -> usize {
    set.as_ref().map_or(0, |s| s.0.len())
}

/// Copies up to `len` values into `buf`; returns the number copied.
#[no_mangle]
pub unsafe extern "C" fn opk_sample_set_copy(set: *const OpkSampleSet, buf: *mut f64, len: usize) -> usize {
    match (set.as_ref(), buf.is_null()) {
        (Some(s), false) => {
            let n = s.0.len().min(len);
            ptr::copy_nonoverlapping(s.0.values().as_ptr(), buf, n);
            n
        }
        _ => 0,
    }
}

/// Sample mean and population variance.
#[no_mangle]
pub unsafe extern "C" fn opk_sample_set_moments(
    set: *const OpkSampleSet,
    mean_out: *mut f64,
    var_out: *mut f64,
) -> OpkStatus {
    guard(|| {
        let s = &input(set, "set")?.0;
        *out(mean_out, "mean_out")? = s.mean();
        *out(var_out, "var_out")? = s.variance();
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn opk_sample_set_free(set: *mut OpkSampleSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

#[no_mangle]
pub unsafe extern "C" fn opk_wasserstein_1(
    a: *const OpkSampleSet,
    b: *const OpkSampleSet,
    w_out: *mut f64,
) -> OpkStatus {
    guard(|| {
        *out(w_out, "w_out")? = wasserstein_1(&input(a, "a")?.0, &input(b, "b")?.0)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn opk_wasserstein_2(
    a: *const OpkSampleSet,
    b: *const OpkSampleSet,
    w_out: *mut f64,
) -> OpkStatus {
    guard(|| {
        *out(w_out, "w_out")? = wasserstein_2(&input(a, "a")?.0, &input(b, "b")?.0)?;
        Ok(())
    })
}

/// Kolmogorov-Smirnov distance to Uniform[-1, 1].
#[no_mangle]
pub unsafe extern "C" fn opk_ks_uniform(a: *const OpkSampleSet, ks_out: *mut f64) -> OpkStatus {
    guard(|| {
        *out(ks_out, "ks_out")? = ks_distance(&input(a, "a")?.0, uniform_cdf);
        Ok(())
    })
}

/// Uniform density on `n_points` grid nodes.
#[no_mangle]
pub unsafe extern "C" fn opk_grid_uniform(n_points: usize, grid_out: *mut *mut OpkGridDensity) -> OpkStatus {
    guard(|| {
        let g = GridDensity::uniform(n_points)?;
        *out(grid_out, "grid_out")? = Box::into_raw(Box::new(OpkGridDensity(g)));
        Ok(())
    })
}

/// Density from `len` nonnegative node values (normalized to unit mass).
#[no_mangle]
pub unsafe extern "C" fn opk_grid_from_values(
    values: *const f64,
    len: usize,
    grid_out: *mut *mut OpkGridDensity,
) -> OpkStatus {
    guard(|| {
        if values.is_null() {
            return Err(OpkStatusError::Null("values"));
        }
        let v = std::slice::from_raw_parts(values, len);
        let dx = 2.0 / (len.max(2) - 1) as f64;
        let g = GridDensity::from_fn(len, |x| v[(((x + 1.0) / dx).round() as usize).min(len - 1)])?;
        *out(grid_out, "grid_out")? = Box::into_raw(Box::new(OpkGridDensity(g)));
        Ok(())
    })
}

/// Solves the kinetic equation to `t_end` with RK4 step `dt`.
#[no_mangle]
pub unsafe extern "C" fn opk_solve_pde(
    rho0: *const OpkGridDensity,
    t_end: f64,
    dt: f64,
    mu_minus: f64,
    mu_plus: f64,
    m0: f64,
    grid_out: *mut *mut OpkGridDensity,
) -> OpkStatus {
    guard(|| {
        let rho0 = &input(rho0, "rho0")?.0;
        let mut sol = solve_pde(rho0, t_end, dt, &params(mu_minus, mu_plus)?, m0, &[])?;
        let (_, g) = sol.snapshots.pop().expect("final snapshot");
        *out(grid_out, "grid_out")? = Box::into_raw(Box::new(OpkGridDensity(g)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn opk_grid_len(grid: *const OpkGridDensity) -> usize {
    grid.as_ref().map_or(0, |g| g.0.n_points())
}

/// Copies up to `len` node values; returns the number copied.
#[no_mangle]
pub unsafe extern "C" fn opk_grid_copy(grid: *const OpkGridDensity, buf: *mut f64, len: usize) -> usize {
    match (grid.as_ref(), buf.is_null()) {
        (Some(g), false) => {
            let n = g.0.n_points().min(len);
            ptr::copy_nonoverlapping(g.0.values().as_ptr(), buf, n);
            n
        }
        _ => 0,
    }
}

/// Trapezoid mean and second moment.
#[no_mangle]
pub unsafe extern "C" fn opk_grid_moments(
    grid: *const OpkGridDensity,
    m_out: *mut f64,
    q_out: *mut f64,
) -> OpkStatus {
    guard(|| {
        let (m, q) = opinion_kinetics::kinetic::moments_from_grid(&input(grid, "grid")?.0);
        *out(m_out, "m_out")? = m;
        *out(q_out, "q_out")? = q;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn opk_grid_free(grid: *mut OpkGridDensity) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Runs the check suite; `*passed_out` is 1 when every check passes.
#[no_mangle]
pub unsafe extern "C" fn opk_verify(suite: OpkSuite, seed: u64, passed_out: *mut i32) -> OpkStatus {
    guard(|| {
        let suite = match suite {
            OpkSuite::Fast => Suite::Fast,
            OpkSuite::Paper => Suite::Paper,
        };
        *out(passed_out, "passed_out")? = i32::from(run_checks(suite, seed, &[]).pass());
        Ok(())
    })
}
