//! Shared domain types: model parameters, opinions, sample sets, and the
//! seed-deterministic random source.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Persuasion strengths toward `-1` (`mu_minus`) and `+1` (`mu_plus`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub symmetric: bool,
}

impl ModelParams {
    /// Validates `mu_minus, mu_plus in (0, 1]`.
    pub fn new(mu_minus: f64, mu_plus: f64) -> Result<Self> {
        check_unit_half_open("mu_minus", mu_minus)?;
        check_unit_half_open("mu_plus", mu_plus)?;
        Ok(ModelParams {
            mu_minus,
            mu_plus,
            symmetric: mu_minus == mu_plus,
        })
    }

    pub fn symmetric(mu: f64) -> Result<Self> {
        Self::new(mu, mu)
    }

    /// Both parameters equal to one: the voter-model edge.
    pub fn is_voter_edge(&self) -> bool {
        self.mu_minus == 1.0 && self.mu_plus == 1.0
    }

    /// The common value in the symmetric case.
    pub fn mu(&self) -> Option<f64> {
        self.symmetric.then_some(self.mu_plus)
    }

    /// Drift rate `mu_plus - mu_minus` of the mean opinion.
    pub fn drift(&self) -> f64 {
        self.mu_plus - self.mu_minus
    }
}

/// Same as [`ModelParams::new`].
pub fn validate_params(mu_minus: f64, mu_plus: f64) -> Result<ModelParams> {
    ModelParams::new(mu_minus, mu_plus)
}

fn check_unit_half_open(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::domain(name, format!("{v} is outside (0, 1]")))
    }
}

/// Requires `mu in (0, 1)`, as the equilibrium analysis does.
pub(crate) fn check_mu_open(mu: f64) -> Result<()> {
    if mu.is_finite() && mu > 0.0 && mu < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("mu", format!("{mu} is outside (0, 1)")))
    }
}

/// An opinion in `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Opinion(f64);

impl Opinion {
    pub fn new(value: f64) -> Result<Self> {
        if (-1.0..=1.0).contains(&value) {
            Ok(Opinion(value))
        } else {
            Err(Error::domain("opinion", format!("{value} is outside [-1, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Wraps a value produced by an affine contraction of `[-1, 1]`.
    #[inline]
    pub(crate) fn from_contraction(value: f64) -> Self {
        debug_assert!(
            (-1.0..=1.0).contains(&value),
            "opinion {value} escaped [-1, 1]"
        );
        Opinion(value)
    }
}

/// Random sign: `+1` iff `u < p`.
#[inline]
pub fn rademacher(p: f64, u: f64) -> i8 {
    if u < p {
        1
    } else {
        -1
    }
}

/// A finite, nonempty multiset of opinions.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    values: Vec<f64>,
    sorted: bool,
}

impl SampleSet {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("samples", "sample set is empty"));
        }
        if let Some(bad) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::domain("samples", format!("value {bad} is outside [-1, 1]")));
        }
        let sorted = values.windows(2).all(|w| w[0] <= w[1]);
        Ok(SampleSet { values, sorted })
    }

    /// Builds from values already known to lie in `[-1, 1]`.
    pub(crate) fn from_trusted(values: Vec<f64>) -> Self {
        debug_assert!(!values.is_empty());
        debug_assert!(values.iter().all(|v| (-1.0..=1.0).contains(v)));
        SampleSet {
            values,
            sorted: false,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted
    }

    /// Sorts in place (no-op when already sorted).
    pub fn sort(&mut self) {
        if !self.sorted {
            self.values.sort_unstable_by(f64::total_cmp);
            self.sorted = true;
        }
    }

    pub fn into_sorted(mut self) -> Self {
        self.sort();
        self
    }

    /// Sorted view; clones only if not already sorted.
    pub fn sorted_values(&self) -> std::borrow::Cow<'_, [f64]> {
        if self.sorted {
            std::borrow::Cow::Borrowed(&self.values)
        } else {
            let mut v = self.values.clone();
            v.sort_unstable_by(f64::total_cmp);
            std::borrow::Cow::Owned(v)
        }
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn second_moment(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>() / self.values.len() as f64
    }

    /// Population variance (divides by `n`).
    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / self.values.len() as f64
    }
}

/// Seed-keyed source of independent random streams.
///
/// A `(seed, stream)` pair always produces the same sequence. Substreams are
/// keyed by an index (particle, replica, cell) so parallel loops stay
/// deterministic regardless of how work is split across threads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RandomSource {
    pub seed: u64,
    pub stream: u64,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        RandomSource { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Child source keyed by `index`; distinct indices give independent streams.
    pub fn substream(&self, index: u64) -> RandomSource {
        let key = splitmix64(self.seed ^ splitmix64(self.stream ^ 0xa076_1d64_78bd_642f));
        RandomSource {
            seed: key,
            stream: index,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in `[0, 1)`.
#[inline]
pub(crate) fn uniform01<R: Rng>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Rate-1 exponential draw.
#[inline]
pub(crate) fn exp1<R: Rng>(rng: &mut R) -> f64 {
    -(1.0 - rng.random::<f64>()).ln()
}

/// Initial opinion distribution.
#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    /// Uniform on `[-1, 1]`.
    Uniform,
    PointMass(f64),
    /// Resample uniformly from an explicit sample set.
    Samples(SampleSet),
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            InitSpec::PointMass(x) if !(-1.0..=1.0).contains(x) => Err(Error::domain(
                "init",
                format!("point mass {x} is outside [-1, 1]"),
            )),
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            InitSpec::Uniform => 0.0,
            InitSpec::PointMass(x) => *x,
            InitSpec::Samples(s) => s.mean(),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match self {
            InitSpec::Uniform => 1.0 / 3.0,
            InitSpec::PointMass(x) => x * x,
            InitSpec::Samples(s) => s.second_moment(),
        }
    }

    /// Checks that the initial mean is `m0`: exactly for the closed-form
    /// inits, up to four standard errors for explicit samples.
    pub fn check_mean(&self, m0: f64) -> Result<()> {
        let tol = match self {
            InitSpec::Samples(s) => 1e-12 + 4.0 * (s.variance() / s.len() as f64).sqrt(),
            _ => 1e-12,
        };
        let mean = self.mean();
        if (mean - m0).abs() <= tol {
            Ok(())
        } else {
            Err(Error::domain(
                "m0",
                format!("initial distribution has mean {mean}, inconsistent with m0 = {m0}"),
            ))
        }
    }

    #[inline]
    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            InitSpec::Uniform => 2.0 * uniform01(rng) - 1.0,
            InitSpec::PointMass(x) => *x,
            InitSpec::Samples(s) => s.values[rng.random_range(0..s.len())],
        }
    }

    /// Draws `n` i.i.d. values; value `k` comes from substream `k`.
    pub fn sample(&self, n: usize, source: RandomSource) -> SampleSet {
        use rayon::prelude::*;
        let values = (0..n)
            .into_par_iter()
            .map(|k| self.draw(&mut source.substream(k as u64).rng()))
            .collect();
        SampleSet::from_trusted(values)
    }

    /// Fourier transform `E[exp(-i xi X)]`.
    pub fn char_fn(&self, xi: f64) -> Complex64 {
        match self {
            InitSpec::Uniform => Complex64::new(sinc(xi), 0.0),
            InitSpec::PointMass(x) => Complex64::from_polar(1.0, -x * xi),
            InitSpec::Samples(s) => s.eval(xi),
        }
    }
}

/// `sin(x) / x` with the removable singularity filled in.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// A rule `xi -> E[exp(-i xi X)]`.
pub trait CharacteristicFunction: Sync {
    fn eval(&self, xi: f64) -> Complex64;
}

impl<F> CharacteristicFunction for F
where
    F: Fn(f64) -> Complex64 + Sync,
{
    fn eval(&self, xi: f64) -> Complex64 {
        self(xi)
    }
}

impl CharacteristicFunction for SampleSet {
    fn eval(&self, xi: f64) -> Complex64 {
        crate::metrics::empirical_char_fn(self, xi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_symmetric_flag() {
        assert!(validate_params(0.5, 0.5).unwrap().symmetric);
        assert!(!validate_params(0.3, 0.6).unwrap().symmetric);
        assert!(validate_params(1.0, 1.0).unwrap().is_voter_edge());
    }

    #[test]
    fn params_reject_out_of_range() {
        match validate_params(0.0, 0.5) {
            Err(Error::Domain { name, .. }) => assert_eq!(name, "mu_minus"),
            other => panic!("expected domain error, got {other:?}"),
        }
        match validate_params(0.5, 1.5) {
            Err(Error::Domain { name, .. }) => assert_eq!(name, "mu_plus"),
            other => panic!("expected domain error, got {other:?}"),
        }
        assert!(validate_params(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn rademacher_examples() {
        assert_eq!(rademacher(1.0, 0.999), 1);
        assert_eq!(rademacher(0.5, 0.3), 1);
        assert_eq!(rademacher(0.25, 0.5), -1);
        assert_eq!(rademacher(0.0, 0.0), -1);
    }

    #[test]
    fn rademacher_mean_converges() {
        let n = 1_000_000;
        let mut rng = RandomSource::new(11, 0).rng();
        for p in [0.1, 0.5, 0.83] {
            let s: i64 = (0..n).map(|_| rademacher(p, uniform01(&mut rng)) as i64).sum();
            let mean = s as f64 / n as f64;
            assert!((mean - (2.0 * p - 1.0)).abs() <= 4.0 / (n as f64).sqrt(), "p={p} mean={mean}");
        }
    }

    #[test]
    fn random_source_reproducible_and_distinct() {
        let a: Vec<u64> = {
            let mut r = RandomSource::new(7, 3).rng();
            (0..8).map(|_| r.random()).collect()
        };
        let b: Vec<u64> = {
            let mut r = RandomSource::new(7, 3).rng();
            (0..8).map(|_| r.random()).collect()
        };
        let c: Vec<u64> = {
            let mut r = RandomSource::new(7, 4).rng();
            (0..8).map(|_| r.random()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
        let root = RandomSource::new(7, 0);
        assert_eq!(root.substream(5), root.substream(5));
        assert_ne!(root.substream(5), root.substream(6));
        assert_ne!(root.substream(5), RandomSource::new(7, 1).substream(5));
    }

    #[test]
    fn substreams_are_uncorrelated() {
        let root = RandomSource::new(99, 0);
        let n = 200_000;
        let mut a = root.substream(0).rng();
        let mut b = root.substream(1).rng();
        let mut sxy = 0.0;
        for _ in 0..n {
            let x = uniform01(&mut a) - 0.5;
            let y = uniform01(&mut b) - 0.5;
            sxy += x * y;
        }
        // correlation estimate has sd 1/sqrt(n)
        let corr = sxy / n as f64 * 12.0;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr={corr}");
    }

    #[test]
    fn sample_set_validation() {
        assert!(SampleSet::new(vec![]).is_err());
        assert!(SampleSet::new(vec![0.0, 1.5]).is_err());
        let s = SampleSet::new(vec![-1.0, 0.0, 1.0]).unwrap();
        assert!(s.is_sorted());
        assert!((s.variance() - 2.0 / 3.0).abs() < 1e-15);
        let mut t = SampleSet::new(vec![0.5, -0.5]).unwrap();
        assert!(!t.is_sorted());
        t.sort();
        assert_eq!(t.values(), &[-0.5, 0.5]);
    }

    #[test]
    fn init_mean_check() {
        assert!(InitSpec::Uniform.check_mean(0.0).is_ok());
        assert!(InitSpec::Uniform.check_mean(0.2).is_err());
        assert!(InitSpec::PointMass(0.2).check_mean(0.2).is_ok());
        assert!(InitSpec::PointMass(1.2).validate().is_err());
    }
}
