//! The `opk` command-line front end.
//!
//! Settings resolve as: command-line flag, then the `--config` TOML file
//! (a `[command]` table overrides top-level keys), then built-in defaults.
//! Every CSV output starts with `#` comment lines carrying the version and the
//! fully resolved configuration, enough to reproduce the file.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::abm::{simulate_abm, AbmConfig, ClockRate, Snapshot};
use crate::equilibrium::{
    cantor_level, cantor_level_exact, cantor_total_length, cantor_total_length_exact, char_fn_equilibrium_biased,
    hausdorff_dimension, sample_equilibrium, volcano_cdf, volcano_density,
};
use crate::error::{Error, Result};
use crate::kinetic::{min_spectral_depth, solve_pde, solve_spectral, GridDensity};
use crate::meanfield::{simulate_particles, stationary_variance, ParticleConfig};
use crate::metrics::{
    default_xi_grid, ks_distance, log_grid, toscani_distance, uniform_cdf, wasserstein_1, wasserstein_2,
};
use crate::model::{CharacteristicFunction, InitSpec, ModelParams, SampleSet};
use crate::rational::{ParamValue, MU_VOLCANO};
use crate::verify::{run_checks, Suite};
use crate::VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "opk", version, about = "Opinion-kinetics simulation and verification toolkit")]
pub struct Cli {
    /// TOML file with default settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Finite-N agent simulation.
    SimulateAbm(SimArgs),
    /// Mean-field particle simulation.
    SimulateMf(SimArgs),
    /// Grid solver for the kinetic equation.
    SolvePde(PdeArgs),
    /// Fourier-side chain solver.
    SolveSpectral(SpectralArgs),
    /// Equilibrium sampling and tabulation.
    Equilibrium(EquilibriumArgs),
    /// Cantor-set levels of the equilibrium support.
    Cantor(CantorArgs),
    /// Distances and summaries between CSV inputs.
    Metrics(MetricsArgs),
    /// Grid of runs over (mu, m0).
    Sweep(SweepArgs),
    /// Theorem-check suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Default)]
pub struct ParamArgs {
    /// Symmetric step size (decimal, `p/q` or `1-1/sqrt2`).
    #[arg(long)]
    pub mu: Option<ParamValue>,
    #[arg(long)]
    pub mu_minus: Option<ParamValue>,
    #[arg(long)]
    pub mu_plus: Option<ParamValue>,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Population size.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Comma-separated snapshot times (default: t_end).
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    /// `uniform`, `point:<x>` or `file:<samples.csv>`.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Global event rate of the agent clock: `n` or `n-half`.
    #[arg(long)]
    pub clock_rate: Option<String>,
    /// Output CSV; with several snapshots, one file per time is written as
    /// `<stem>_t<time>.csv`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct PdeArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// `uniform`, `tent`, `linear:<m>`, `point:<x>` (mollified) or `file:<x,rho.csv>`.
    #[arg(long)]
    pub init: Option<String>,
    /// Half-width of the tent replacing a point mass.
    #[arg(long)]
    pub mollify: Option<f64>,
    #[arg(long)]
    pub dx: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub snapshots: Option<Vec<f64>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpectralArgs {
    #[arg(long)]
    pub mu: Option<ParamValue>,
    /// `uniform`, `point:<x>` or `file:<samples.csv>`.
    #[arg(long)]
    pub init: Option<String>,
    #[arg(long)]
    pub xi_top: Option<f64>,
    /// Chain depth (default: 10 past the smallest admissible depth).
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EquilibriumArgs {
    #[arg(long)]
    pub mu: Option<ParamValue>,
    #[arg(long)]
    pub m0: Option<f64>,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sup-norm truncation error of the series.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Tabulate instead of sampling: `density`, `cdf` or `char-fn`.
    #[arg(long)]
    pub tabulate: Option<String>,
    /// Number of tabulation points.
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CantorArgs {
    #[arg(long)]
    pub mu: Option<ParamValue>,
    /// Construction level n (2^n intervals).
    #[arg(long)]
    pub levels: Option<u32>,
    /// `json` or `csv`.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// First input: sample CSV (`x`) or density CSV (`x,rho`).
    #[arg(long)]
    pub a: PathBuf,
    /// Optional second input.
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Reference law for KS: `uniform` or `volcano`.
    #[arg(long)]
    pub reference: Option<String>,
    /// Order of the Fourier-based distance.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Comma-separated mu values.
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<ParamValue>>,
    /// Comma-separated m0 values.
    #[arg(long, value_delimiter = ',')]
    pub m0: Option<Vec<f64>>,
    /// Per-cell command: `equilibrium`, `simulate-mf` or `simulate-abm`.
    #[arg(long)]
    pub command: Option<String>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Base seed; cell `k` uses `seed + k`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// `fast` or `paper`.
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated check ids to run (default: all).
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<u32>>,
    /// Report JSON path (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("opk: {e}");
            EXIT_DOMAIN
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    let file = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            text.parse::<toml::Table>()
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        }
        None => toml::Table::new(),
    };
    match cli.command {
        Command::SimulateAbm(a) => cmd_simulate(Settings::new(&file, "simulate-abm"), a, true),
        Command::SimulateMf(a) => cmd_simulate(Settings::new(&file, "simulate-mf"), a, false),
        Command::SolvePde(a) => cmd_pde(Settings::new(&file, "solve-pde"), a),
        Command::SolveSpectral(a) => cmd_spectral(Settings::new(&file, "solve-spectral"), a),
        Command::Equilibrium(a) => cmd_equilibrium(Settings::new(&file, "equilibrium"), a),
        Command::Cantor(a) => cmd_cantor(Settings::new(&file, "cantor"), a),
        Command::Metrics(a) => cmd_metrics(Settings::new(&file, "metrics"), a),
        Command::Sweep(a) => cmd_sweep(Settings::new(&file, "sweep"), a),
        Command::Verify(a) => cmd_verify(Settings::new(&file, "verify"), a),
    }
}

/// Resolves settings and records the resolved values for output headers.
struct Settings<'a> {
    file: &'a toml::Table,
    command: &'static str,
    resolved: Map<String, Value>,
}

impl<'a> Settings<'a> {
    fn new(file: &'a toml::Table, command: &'static str) -> Self {
        Settings {
            file,
            command,
            resolved: Map::new(),
        }
    }

    fn lookup(&self, key: &str) -> Option<&toml::Value> {
        let alt = key.replace('-', "_");
        let find = |t: &'a toml::Table| t.get(key).or_else(|| t.get(&alt));
        self.file
            .get(self.command)
            .and_then(|v| v.as_table())
            .and_then(find)
            .or_else(|| find(self.file))
    }

    fn config_error(&self, key: &str, want: &str) -> Error {
        Error::Parse(format!("config key {key:?} must be {want}"))
    }

    fn f64(&mut self, key: &str, flag: Option<f64>, default: f64) -> Result<f64> {
        let v = match flag {
            Some(v) => v,
            None => match self.lookup(key) {
                Some(toml::Value::Float(f)) => *f,
                Some(toml::Value::Integer(i)) => *i as f64,
                Some(_) => return Err(self.config_error(key, "a number")),
                None => default,
            },
        };
        self.resolved.insert(key.into(), json!(v));
        Ok(v)
    }

    fn u64(&mut self, key: &str, flag: Option<u64>, default: u64) -> Result<u64> {
        let v = match flag {
            Some(v) => v,
            None => match self.lookup(key) {
                Some(toml::Value::Integer(i)) if *i >= 0 => *i as u64,
                Some(toml::Value::Float(f)) if *f >= 0.0 && f.fract() == 0.0 => *f as u64,
                Some(_) => return Err(self.config_error(key, "a nonnegative integer")),
                None => default,
            },
        };
        self.resolved.insert(key.into(), json!(v));
        Ok(v)
    }

    fn usize(&mut self, key: &str, flag: Option<usize>, default: usize) -> Result<usize> {
        Ok(self.u64(key, flag.map(|v| v as u64), default as u64)? as usize)
    }

    fn opt_usize(&mut self, key: &str, flag: Option<usize>) -> Result<Option<usize>> {
        if flag.is_none() && self.lookup(key).is_none() {
            return Ok(None);
        }
        self.usize(key, flag, 0).map(Some)
    }

    fn string(&mut self, key: &str, flag: Option<String>, default: &str) -> Result<String> {
        let v = match flag {
            Some(v) => v,
            None => match self.lookup(key) {
                Some(toml::Value::String(s)) => s.clone(),
                Some(_) => return Err(self.config_error(key, "a string")),
                None => default.to_string(),
            },
        };
        self.resolved.insert(key.into(), json!(v));
        Ok(v)
    }

    fn param(&mut self, key: &str, flag: Option<ParamValue>) -> Result<Option<ParamValue>> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.lookup(key) {
                Some(toml::Value::String(s)) => Some(s.parse()?),
                Some(toml::Value::Float(f)) => Some(ParamValue::from_f64(*f)),
                Some(toml::Value::Integer(i)) => Some(ParamValue::from_f64(*i as f64)),
                Some(_) => return Err(self.config_error(key, "a number or string")),
                None => None,
            },
        };
        if let Some(p) = &v {
            self.resolved.insert(key.into(), json!(p.as_str()));
        }
        Ok(v)
    }

    fn require_param(&mut self, key: &str, flag: Option<ParamValue>) -> Result<ParamValue> {
        self.param(key, flag)?
            .ok_or_else(|| Error::domain(key, "missing; pass --mu or set it in the config file"))
    }

    fn list_f64(&mut self, key: &str, flag: Option<Vec<f64>>) -> Result<Option<Vec<f64>>> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.lookup(key) {
                Some(toml::Value::Array(items)) => Some(
                    items
                        .iter()
                        .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
                        .collect::<Option<Vec<f64>>>()
                        .ok_or_else(|| self.config_error(key, "an array of numbers"))?,
                ),
                Some(_) => return Err(self.config_error(key, "an array of numbers")),
                None => None,
            },
        };
        if let Some(list) = &v {
            self.resolved.insert(key.into(), json!(list));
        }
        Ok(v)
    }

    fn list_param(&mut self, key: &str, flag: Option<Vec<ParamValue>>) -> Result<Option<Vec<ParamValue>>> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.lookup(key) {
                Some(toml::Value::Array(items)) => Some(
                    items
                        .iter()
                        .map(|x| match x {
                            toml::Value::String(s) => s.parse(),
                            toml::Value::Float(f) => Ok(ParamValue::from_f64(*f)),
                            toml::Value::Integer(i) => Ok(ParamValue::from_f64(*i as f64)),
                            _ => Err(self.config_error(key, "an array of numbers or strings")),
                        })
                        .collect::<Result<Vec<_>>>()?,
                ),
                Some(_) => return Err(self.config_error(key, "an array")),
                None => None,
            },
        };
        if let Some(list) = &v {
            let texts: Vec<&str> = list.iter().map(|p| p.as_str()).collect();
            self.resolved.insert(key.into(), json!(texts));
        }
        Ok(v)
    }

    fn path(&mut self, key: &str, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
        let v = match flag {
            Some(v) => Some(v),
            None => match self.lookup(key) {
                Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
                Some(_) => return Err(self.config_error(key, "a path string")),
                None => None,
            },
        };
        // output locations do not affect content and stay out of headers
        Ok(v)
    }

    fn model_params(&mut self, args: ParamArgs) -> Result<ModelParams> {
        let mu = self.param("mu", args.mu)?;
        let minus = self.param("mu-minus", args.mu_minus)?;
        let plus = self.param("mu-plus", args.mu_plus)?;
        match (mu, minus, plus) {
            (Some(mu), None, None) => ModelParams::symmetric(mu.value),
            (None, Some(a), Some(b)) => ModelParams::new(a.value, b.value),
            (None, None, None) => Err(Error::domain("mu", "missing; pass --mu or --mu-minus with --mu-plus")),
            _ => Err(Error::domain("mu", "pass either --mu or both --mu-minus and --mu-plus")),
        }
    }

    fn header(&self) -> String {
        let config = serde_json::to_string(&self.resolved).expect("config serializes");
        format!(
            "# opinion-kinetics v{VERSION}\n# command: {}\n# config: {config}\n",
            self.command
        )
    }
}

fn parse_sample_init(spec: &str) -> Result<InitSpec> {
    let init = match spec.split_once(':') {
        None if spec == "uniform" => InitSpec::Uniform,
        Some(("point", x)) => InitSpec::PointMass(parse_f64("init", x)?),
        Some(("file", path)) => InitSpec::Samples(read_samples(Path::new(path))?),
        _ => {
            return Err(Error::domain(
                "init",
                format!("{spec:?} is not one of uniform, point:<x>, file:<path>"),
            ))
        }
    };
    init.validate()?;
    Ok(init)
}

fn parse_f64(name: &str, text: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("{name}: cannot parse {text:?} as a number")))
}

/// Data rows of a CSV file: `#` comments and the header row are skipped.
fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| Error::Parse(format!("{}: no header row", path.display())))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| parse_f64("csv", c)).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    if rows.iter().any(|r| r.len() != header.len()) {
        return Err(Error::Parse(format!("{}: ragged rows", path.display())));
    }
    Ok((header, rows))
}

fn read_samples(path: &Path) -> Result<SampleSet> {
    let (header, rows) = read_rows(path)?;
    if header != ["x"] {
        return Err(Error::Parse(format!("{}: expected a single `x` column", path.display())));
    }
    SampleSet::new(rows.into_iter().map(|r| r[0]).collect())
}

fn read_density(path: &Path) -> Result<GridDensity> {
    let (header, rows) = read_rows(path)?;
    if header != ["x", "rho"] {
        return Err(Error::Parse(format!("{}: expected `x,rho` columns", path.display())));
    }
    let g = GridDensity::new(rows.iter().map(|r| r[1]).collect())?;
    let spacing_ok = rows
        .iter()
        .enumerate()
        .all(|(k, r)| (r[0] - g.x(k)).abs() < 1e-9);
    if !spacing_ok {
        return Err(Error::Parse(format!(
            "{}: x column must be the uniform grid on [-1, 1]",
            path.display()
        )));
    }
    Ok(g)
}

/// Writes `text` to `out`, or stdout when absent.
fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text)?;
        }
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `<stem>_t<time>.<ext>` next to `out`.
fn snapshot_path(out: &Path, time: f64) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = out.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    out.with_file_name(format!("{stem}_t{time}.{ext}"))
}

fn samples_csv(header: &str, time: Option<f64>, samples: &[f64]) -> String {
    let mut s = String::with_capacity(header.len() + samples.len() * 22);
    s.push_str(header);
    if let Some(t) = time {
        s.push_str(&format!("# time: {t}\n"));
    }
    s.push_str("x\n");
    for x in samples {
        s.push_str(&format!("{x}\n"));
    }
    s
}

fn emit_snapshots<T>(
    out: Option<&Path>,
    items: &[(f64, T)],
    render: impl Fn(f64, &T) -> String,
) -> Result<()> {
    if items.len() == 1 {
        return emit(out, &render(items[0].0, &items[0].1));
    }
    let out = out.ok_or_else(|| Error::domain("out", "several snapshots need --out"))?;
    for (t, item) in items {
        emit(Some(&snapshot_path(out, *t)), &render(*t, item))?;
    }
    Ok(())
}

fn resolve_times(settings: &mut Settings, t_end: Option<f64>, snapshots: Option<Vec<f64>>) -> Result<(f64, Vec<f64>)> {
    let snaps = settings.list_f64("snapshots", snapshots)?;
    let default_end = snaps.as_ref().and_then(|s| s.last().copied()).unwrap_or(20.0);
    let t_end = settings.f64("t-end", t_end, default_end)?;
    Ok((t_end, snaps.unwrap_or_else(|| vec![t_end])))
}

fn cmd_simulate(mut st: Settings, a: SimArgs, agents: bool) -> Result<i32> {
    let params = st.model_params(a.params)?;
    let n = st.usize("n", a.n, 100_000)?;
    let (t_end, times) = resolve_times(&mut st, a.t_end, a.snapshots)?;
    let init = parse_sample_init(&st.string("init", a.init, "uniform")?)?;
    let seed = st.u64("seed", a.seed, 0)?;
    let out = st.path("out", a.out)?;
    let snaps: Vec<Snapshot> = if agents {
        let clock_rate = match st.string("clock-rate", a.clock_rate, "n")?.as_str() {
            "n" => ClockRate::N,
            "n-half" => ClockRate::NHalf,
            other => return Err(Error::domain("clock-rate", format!("{other:?} is not n or n-half"))),
        };
        let mut cfg = AbmConfig::new(n, t_end, init, params, seed).with_snapshots(times);
        cfg.clock_rate = clock_rate;
        simulate_abm(&cfg)?
    } else {
        simulate_particles(&ParticleConfig::new(n, t_end, params, init, seed).with_snapshots(times))?
    };
    let header = st.header();
    let items: Vec<(f64, SampleSet)> = snaps.into_iter().map(|s| (s.time, s.samples)).collect();
    emit_snapshots(out.as_deref(), &items, |t, s| samples_csv(&header, Some(t), s.values()))?;
    Ok(EXIT_OK)
}

fn cmd_pde(mut st: Settings, a: PdeArgs) -> Result<i32> {
    let params = st.model_params(a.params)?;
    let dx = st.f64("dx", a.dx, 1e-4)?;
    if !(dx > 0.0 && dx <= 1.0) {
        return Err(Error::domain("dx", format!("{dx} is outside (0, 1]")));
    }
    let n_points = GridDensity::points_for_spacing(dx);
    let dt = st.f64("dt", a.dt, 0.01)?;
    let (t_end, times) = resolve_times(&mut st, a.t_end, a.snapshots)?;
    let init = st.string("init", a.init, "uniform")?;
    let rho0 = match init.split_once(':') {
        None if init == "uniform" => GridDensity::uniform(n_points)?,
        None if init == "tent" => GridDensity::tent(n_points)?,
        Some(("linear", m)) => GridDensity::linear(n_points, parse_f64("init", m)?)?,
        Some(("point", x)) => {
            let width = st.f64("mollify", a.mollify, 0.01)?;
            GridDensity::mollified_point_mass(n_points, parse_f64("init", x)?, width)?
        }
        Some(("file", path)) => read_density(Path::new(path))?,
        _ => {
            return Err(Error::domain(
                "init",
                format!("{init:?} is not one of uniform, tent, linear:<m>, point:<x>, file:<path>"),
            ))
        }
    };
    let (m0, _) = crate::kinetic::moments_from_grid(&rho0);
    let out = st.path("out", a.out)?;
    let sol = solve_pde(&rho0, t_end, dt, &params, m0, &times)?;
    let header = st.header();
    emit_snapshots(out.as_deref(), &sol.snapshots, |t, rho| {
        let mut s = header.clone();
        s.push_str(&format!("# time: {t}\nx,rho\n"));
        for (k, v) in rho.values().iter().enumerate() {
            s.push_str(&format!("{},{v}\n", rho.x(k)));
        }
        s
    })?;
    Ok(EXIT_OK)
}

fn cmd_spectral(mut st: Settings, a: SpectralArgs) -> Result<i32> {
    let mu = st.require_param("mu", a.mu)?.value;
    let init = parse_sample_init(&st.string("init", a.init, "uniform")?)?;
    let xi_top = st.f64("xi-top", a.xi_top, 5.0)?;
    let depth = match st.opt_usize("depth", a.depth)? {
        Some(d) => d,
        None => {
            if !(mu > 0.0 && mu < 1.0) || !(xi_top > 0.0 && xi_top.is_finite()) {
                crate::model::check_mu_open(mu)?;
                return Err(Error::domain("xi_top", format!("{xi_top} must be positive")));
            }
            let d = min_spectral_depth(mu, xi_top) + 10;
            st.resolved.insert("depth".into(), json!(d));
            d
        }
    };
    let dt = st.f64("dt", a.dt, 0.01)?;
    let t_end = st.f64("t-end", a.t_end, 20.0)?;
    let out = st.path("out", a.out)?;
    let state = solve_spectral(mu, init.mean(), &init, xi_top, depth, t_end, dt)?;
    let mut s = st.header();
    s.push_str("xi,re,im\n");
    for (xi, v) in state.xis.iter().zip(&state.values) {
        s.push_str(&format!("{xi},{},{}\n", v.re, v.im));
    }
    emit(out.as_deref(), &s)?;
    Ok(EXIT_OK)
}

fn cmd_equilibrium(mut st: Settings, a: EquilibriumArgs) -> Result<i32> {
    let mu = st.require_param("mu", a.mu)?.value;
    let m0 = st.f64("m0", a.m0, 0.0)?;
    let out = st.path("out", a.out)?;
    let tabulate = if a.tabulate.is_some() || st.lookup("tabulate").is_some() {
        Some(st.string("tabulate", a.tabulate, "")?)
    } else {
        None
    };
    let text = match tabulate.as_deref() {
        None => {
            let n = st.usize("n", a.n, 100_000)?;
            let seed = st.u64("seed", a.seed, 0)?;
            let eps = st.f64("eps", a.eps, 1e-9)?;
            let s = sample_equilibrium(mu, m0, eps, n, seed)?;
            samples_csv(&st.header(), None, s.values())
        }
        Some("char-fn") => {
            let points = st.usize("points", a.points, 400)?;
            let f = char_fn_equilibrium_biased(mu, m0, 400)?;
            let mut s = st.header();
            s.push_str("xi,re,im\n");
            for xi in log_grid(1e-2, 1e2, points.max(2)) {
                let v: Complex64 = f.eval(xi);
                s.push_str(&format!("{xi},{},{}\n", v.re, v.im));
            }
            s
        }
        Some(kind @ ("density" | "cdf")) => {
            let points = st.usize("points", a.points, 2001)?;
            if points < 2 {
                return Err(Error::domain("points", "at least two points are required"));
            }
            let (density, cdf): (fn(f64) -> f64, fn(f64) -> f64) = closed_form_law(mu, m0)?;
            let mut s = st.header();
            s.push_str(if kind == "density" { "x,rho\n" } else { "x,cdf\n" });
            for k in 0..points {
                let x = -1.0 + 2.0 * k as f64 / (points - 1) as f64;
                let v = if kind == "density" { density(x) } else { cdf(x) };
                s.push_str(&format!("{x},{v}\n"));
            }
            s
        }
        Some(other) => {
            return Err(Error::domain(
                "tabulate",
                format!("{other:?} is not one of density, cdf, char-fn"),
            ))
        }
    };
    emit(out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

/// Density and CDF where the equilibrium has a closed form.
fn closed_form_law(mu: f64, m0: f64) -> Result<(fn(f64) -> f64, fn(f64) -> f64)> {
    if m0 != 0.0 {
        return Err(Error::domain("m0", "closed-form equilibrium laws exist only for m0 = 0"));
    }
    if (mu - 0.5).abs() < 1e-15 {
        return Ok((|_| 0.5, uniform_cdf));
    }
    if (mu - MU_VOLCANO).abs() < 1e-15 {
        return Ok((|x| volcano_density(x).unwrap_or(0.0), volcano_cdf));
    }
    Err(Error::domain(
        "mu",
        format!("no closed-form density for mu = {mu}; only 1/2 and 1-1/sqrt2 (sample instead)"),
    ))
}

fn cmd_cantor(mut st: Settings, a: CantorArgs) -> Result<i32> {
    let mu = st.require_param("mu", a.mu)?;
    let level = st.u64("levels", a.levels.map(u64::from), 3)?;
    let level = u32::try_from(level).map_err(|_| Error::domain("levels", "too large"))?;
    let format = st.string("format", a.format, "json")?;
    let out = st.path("out", a.out)?;
    let dim = hausdorff_dimension(mu.value)?;

    let (intervals, total, exact) = match &mu.exact {
        Some(r) => {
            let set = cantor_level_exact(r, level)?;
            let total = cantor_total_length_exact(r, level)?;
            let exact_pairs: Vec<(String, String)> = set
                .intervals
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect();
            let total_f = num_traits::ToPrimitive::to_f64(&total).unwrap_or(f64::NAN);
            (set.to_f64().intervals, total_f, Some((exact_pairs, total.to_string())))
        }
        None => (
            cantor_level(mu.value, level)?.intervals,
            cantor_total_length(mu.value, level)?,
            None,
        ),
    };

    let text = match format.as_str() {
        "json" => {
            let mut obj = Map::new();
            obj.insert("mu".into(), json!(mu.value));
            obj.insert("level".into(), json!(level));
            obj.insert(
                "intervals".into(),
                json!(intervals.iter().map(|(a, b)| [*a, *b]).collect::<Vec<_>>()),
            );
            obj.insert("total_length".into(), json!(total));
            obj.insert("hausdorff_dim".into(), json!(dim));
            if let Some((pairs, total)) = &exact {
                obj.insert(
                    "exact".into(),
                    json!({
                        "mu": mu.as_str(),
                        "intervals": pairs.iter().map(|(a, b)| [a, b]).collect::<Vec<_>>(),
                        "total_length": total,
                    }),
                );
            }
            let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("json serializes");
            s.push('\n');
            s
        }
        "csv" => {
            let mut s = st.header();
            s.push_str(&format!("# total_length: {total}\n# hausdorff_dim: {dim}\n"));
            match &exact {
                Some((pairs, _)) => {
                    s.push_str("a,b,length,a_exact,b_exact\n");
                    for ((a, b), (ea, eb)) in intervals.iter().zip(pairs) {
                        s.push_str(&format!("{a},{b},{},{ea},{eb}\n", b - a));
                    }
                }
                None => {
                    s.push_str("a,b,length\n");
                    for (a, b) in &intervals {
                        s.push_str(&format!("{a},{b},{}\n", b - a));
                    }
                }
            }
            s
        }
        other => return Err(Error::domain("format", format!("{other:?} is not json or csv"))),
    };
    emit(out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

enum Input {
    Samples(SampleSet),
    Density(GridDensity),
}

impl Input {
    fn read(path: &Path) -> Result<Input> {
        let (header, _) = read_rows(path)?;
        if header == ["x"] {
            Ok(Input::Samples(read_samples(path)?))
        } else {
            Ok(Input::Density(read_density(path)?))
        }
    }

    fn cf(&self) -> &dyn CharacteristicFunction {
        match self {
            Input::Samples(s) => s,
            Input::Density(g) => g,
        }
    }

    fn moments(&self) -> (f64, f64) {
        match self {
            Input::Samples(s) => (s.mean(), s.variance()),
            Input::Density(g) => {
                let (m, q) = crate::kinetic::moments_from_grid(g);
                (m, q - m * m)
            }
        }
    }

    /// Samples, or one million quantile points of a density.
    fn as_samples(&self) -> Result<SampleSet> {
        match self {
            Input::Samples(s) => Ok(s.clone()),
            Input::Density(g) => g.quantile_samples(1_000_000),
        }
    }
}

fn cmd_metrics(mut st: Settings, a: MetricsArgs) -> Result<i32> {
    let s_order = st.f64("s", a.s, 2.0)?;
    let reference = if a.reference.is_some() || st.lookup("reference").is_some() {
        Some(st.string("reference", a.reference, "")?)
    } else {
        None
    };
    let out = st.path("out", a.out)?;
    let first = Input::read(&a.a)?;
    let mut result = Map::new();
    let (m, v) = first.moments();
    result.insert("a_mean".into(), json!(m));
    result.insert("a_variance".into(), json!(v));
    if let Some(path) = &a.b {
        let second = Input::read(path)?;
        let (m, v) = second.moments();
        result.insert("b_mean".into(), json!(m));
        result.insert("b_variance".into(), json!(v));
        let w1 = match (&first, &second) {
            (Input::Density(f), Input::Density(g)) if f.n_points() == g.n_points() => f.w1(g)?,
            _ => wasserstein_1(&first.as_samples()?, &second.as_samples()?)?,
        };
        result.insert("w1".into(), json!(w1));
        if let (Input::Samples(f), Input::Samples(g)) = (&first, &second) {
            result.insert("w2".into(), json!(wasserstein_2(f, g)?));
        }
        let ds = toscani_distance(first.cf(), second.cf(), s_order, &default_xi_grid())?;
        result.insert("toscani_s".into(), json!(s_order));
        result.insert("toscani".into(), json!(ds));
    }
    if let Some(r) = reference {
        let cdf: fn(f64) -> f64 = match r.as_str() {
            "uniform" => uniform_cdf,
            "volcano" => volcano_cdf,
            other => return Err(Error::domain("reference", format!("{other:?} is not uniform or volcano"))),
        };
        result.insert("ks".into(), json!(ks_distance(&first.as_samples()?, cdf)));
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(result)).expect("json serializes");
    text.push('\n');
    emit(out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

struct CellOutcome {
    mean: f64,
    variance: f64,
    expected_variance: Option<f64>,
}

fn cmd_sweep(mut st: Settings, a: SweepArgs) -> Result<i32> {
    let mus = st
        .list_param("mu", a.mu)?
        .ok_or_else(|| Error::domain("mu", "missing; pass --mu with a comma-separated list"))?;
    let m0s = st.list_f64("m0", a.m0)?.unwrap_or_else(|| vec![0.0]);
    if mus.is_empty() || m0s.is_empty() {
        return Err(Error::domain("grid", "mu and m0 lists must be nonempty"));
    }
    let command = st.string("command", a.command, "equilibrium")?;
    if !matches!(command.as_str(), "equilibrium" | "simulate-mf" | "simulate-abm") {
        return Err(Error::domain("command", format!("{command:?} cannot be swept")));
    }
    let n = st.usize("n", a.n, 100_000)?;
    let t_end = st.f64("t-end", a.t_end, 20.0)?;
    let base_seed = st.u64("seed", a.seed, 0)?;
    let out_dir = st
        .path("out-dir", a.out_dir)?
        .ok_or_else(|| Error::domain("out-dir", "missing; pass --out-dir"))?;
    fs::create_dir_all(&out_dir)?;
    let header = st.header();

    let cells: Vec<(usize, ParamValue, f64)> = mus
        .iter()
        .flat_map(|mu| m0s.iter().map(move |m0| (mu.clone(), *m0)))
        .enumerate()
        .map(|(k, (mu, m0))| (k, mu, m0))
        .collect();

    let outcomes: Vec<Result<CellOutcome>> = cells
        .par_iter()
        .map(|(k, mu, m0)| {
            let seed = base_seed.wrapping_add(*k as u64);
            let samples = run_cell(&command, mu.value, *m0, n, t_end, seed)?;
            let cell_header = format!("{header}# cell: {k}\n# mu: {mu}\n# m0: {m0}\n# seed: {seed}\n");
            emit(
                Some(&out_dir.join(format!("cell_{k:04}.csv"))),
                &samples_csv(&cell_header, None, samples.values()),
            )?;
            let expected_variance = match command.as_str() {
                "equilibrium" => stationary_variance(mu.value, *m0).ok(),
                _ => None,
            };
            Ok(CellOutcome {
                mean: samples.mean(),
                variance: samples.variance(),
                expected_variance,
            })
        })
        .collect();

    let mut summary = header.clone();
    summary.push_str("cell,mu,m0,seed,status,mean,variance,expected_variance,error\n");
    let mut failures = 0;
    for ((k, mu, m0), outcome) in cells.iter().zip(&outcomes) {
        let seed = base_seed.wrapping_add(*k as u64);
        match outcome {
            Ok(c) => {
                let expected = c.expected_variance.map(|v| v.to_string()).unwrap_or_default();
                summary.push_str(&format!(
                    "{k},{mu},{m0},{seed},ok,{},{},{expected},\n",
                    c.mean, c.variance
                ));
            }
            Err(e) => {
                failures += 1;
                let msg = e.to_string().replace([',', '\n'], ";");
                summary.push_str(&format!("{k},{mu},{m0},{seed},error,,,,{msg}\n"));
            }
        }
    }
    emit(Some(&out_dir.join("summary.csv")), &summary)?;
    if failures > 0 {
        eprintln!("opk: {failures} of {} sweep cells failed; see summary.csv", cells.len());
        return Ok(EXIT_DOMAIN);
    }
    Ok(EXIT_OK)
}

fn run_cell(command: &str, mu: f64, m0: f64, n: usize, t_end: f64, seed: u64) -> Result<SampleSet> {
    match command {
        "equilibrium" => sample_equilibrium(mu, m0, 1e-9, n, seed),
        "simulate-mf" => {
            let cfg = ParticleConfig::new(n, t_end, ModelParams::symmetric(mu)?, InitSpec::PointMass(m0), seed);
            Ok(simulate_particles(&cfg)?.remove(0).samples)
        }
        _ => {
            let cfg = AbmConfig::new(n, t_end, InitSpec::PointMass(m0), ModelParams::symmetric(mu)?, seed);
            Ok(simulate_abm(&cfg)?.remove(0).samples)
        }
    }
}

fn cmd_verify(mut st: Settings, a: VerifyArgs) -> Result<i32> {
    let suite: Suite = st.string("suite", a.suite, "fast")?.parse()?;
    let seed = st.u64("seed", a.seed, 20_240_601)?;
    let only = match a.only {
        Some(ids) => ids,
        None => match st.list_f64("only", None)? {
            Some(ids) => ids.into_iter().map(|x| x as u32).collect(),
            None => Vec::new(),
        },
    };
    let out = st.path("out", a.out)?;
    let report = run_checks(suite, seed, &only);
    for c in &report.checks {
        eprintln!("{}", c.summary_line());
    }
    let mut json = report.to_json();
    json.push('\n');
    emit(out.as_deref(), &json)?;
    Ok(if report.pass() { EXIT_OK } else { EXIT_VERIFY })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(text: &str) -> toml::Table {
        text.parse().unwrap()
    }

    #[test]
    fn flags_override_config_override_defaults() {
        let file = table("n = 10\nseed = 3\n[equilibrium]\nn = 20\n");
        let mut st = Settings::new(&file, "equilibrium");
        assert_eq!(st.usize("n", None, 1).unwrap(), 20);
        assert_eq!(st.usize("n", Some(30), 1).unwrap(), 30);
        assert_eq!(st.u64("seed", None, 0).unwrap(), 3);
        assert_eq!(st.f64("eps", None, 1e-9).unwrap(), 1e-9);
        let mut other = Settings::new(&file, "cantor");
        assert_eq!(other.usize("n", None, 1).unwrap(), 10);
    }

    #[test]
    fn config_accepts_underscored_keys() {
        let file = table("t_end = 4.5\nmu = \"2/3\"\n");
        let mut st = Settings::new(&file, "simulate-mf");
        assert_eq!(st.f64("t-end", None, 1.0).unwrap(), 4.5);
        let mu = st.param("mu", None).unwrap().unwrap();
        assert!(mu.exact.is_some());
    }

    #[test]
    fn config_type_errors_are_reported() {
        let file = table("n = \"many\"\n");
        let mut st = Settings::new(&file, "equilibrium");
        assert!(st.usize("n", None, 1).is_err());
    }

    #[test]
    fn init_specs_parse() {
        assert_eq!(parse_sample_init("uniform").unwrap(), InitSpec::Uniform);
        assert_eq!(parse_sample_init("point:0.25").unwrap(), InitSpec::PointMass(0.25));
        assert!(parse_sample_init("point:2").is_err());
        assert!(parse_sample_init("gaussian").is_err());
    }

    #[test]
    fn snapshot_paths() {
        assert_eq!(snapshot_path(Path::new("d/run.csv"), 2.5), PathBuf::from("d/run_t2.5.csv"));
    }

    #[test]
    fn usage_errors_exit_64() {
        assert_eq!(run_command(["opk", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run_command(["opk", "cantor", "--bogus"]), EXIT_USAGE);
        assert_eq!(run_command(["opk", "--help"]), EXIT_OK);
    }

    #[test]
    fn domain_errors_exit_1() {
        assert_eq!(run_command(["opk", "cantor", "--mu", "0.4", "--levels", "2"]), EXIT_DOMAIN);
        assert_eq!(run_command(["opk", "equilibrium", "--mu", "1.5", "--n", "10"]), EXIT_DOMAIN);
    }

    #[test]
    fn closed_forms_only_where_known() {
        assert!(closed_form_law(0.5, 0.0).is_ok());
        assert!(closed_form_law(MU_VOLCANO, 0.0).is_ok());
        assert!(closed_form_law(0.3, 0.0).is_err());
        assert!(closed_form_law(0.5, 0.1).is_err());
    }
}
