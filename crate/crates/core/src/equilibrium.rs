//! Stationary distribution of the symmetric model: the random series
//! `Z = mu * sum (1 - mu)^k B_k`, its cosine-product transform, the Cantor
//! geometry of its support for `mu > 1/2`, and closed-form special cases.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{check_mu_open, rademacher, uniform01, CharacteristicFunction, Opinion, RandomSource, SampleSet};

const EQ_STREAM: u64 = 0xe9b1;
const CHUNK: usize = 4096;

/// Deepest Cantor level materialized (`2^n` intervals).
pub const MAX_CANTOR_LEVEL: u32 = 24;

/// Number of series terms giving a tail of at most `eps`.
pub fn truncation_depth(mu: f64, eps: f64) -> Result<usize> {
    check_mu_open(mu)?;
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::domain("eps_trunc", format!("{eps} must be positive")));
    }
    if eps >= 1.0 {
        return Ok(0);
    }
    Ok((eps.ln() / (1.0 - mu).ln()).ceil() as usize)
}

/// `n` i.i.d. draws of the truncated series with `B_k` signs of mean `m0`.
/// The sup-norm truncation error is `(1 - mu)^K <= eps_trunc`.
pub fn sample_equilibrium(mu: f64, m0: f64, eps_trunc: f64, n: usize, seed: u64) -> Result<SampleSet> {
    let depth = truncation_depth(mu, eps_trunc)?;
    if !(m0 > -1.0 && m0 < 1.0) {
        return Err(Error::domain("m0", format!("{m0} is outside (-1, 1)")));
    }
    if n == 0 {
        return Err(Error::domain("n", "at least one sample is required"));
    }
    let p = 0.5 * (1.0 + m0);
    let source = RandomSource::new(seed, EQ_STREAM);
    let mut values = vec![0.0; n];
    values.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        let mut rng = source.substream(c as u64).rng();
        for v in chunk.iter_mut() {
            let mut z = 0.0;
            let mut w = mu;
            for _ in 0..depth {
                z += w * rademacher(p, uniform01(&mut rng)) as f64;
                w *= 1.0 - mu;
            }
            *v = z.clamp(-1.0, 1.0);
        }
    });
    Ok(SampleSet::from_trusted(values))
}

/// `z -> (1 - mu) z + mu b`.
pub fn fixed_point_map(z: Opinion, b: i8, mu: f64) -> Opinion {
    Opinion::from_contraction(((1.0 - mu) * z.value() + mu * b as f64).clamp(-1.0, 1.0))
}

/// Truncated product `prod_{n < n_terms} [cos(a_n xi) - i m0 sin(a_n xi)]`
/// with `a_n = scale * mu * (1 - mu)^n`.
///
/// Dropping the factors past `n_terms` changes the value by at most about
/// `(scale mu xi)^2 (1 - mu)^(2 n_terms) / (2 (1 - (1 - mu)^2))`.
#[derive(Clone, Debug, PartialEq)]
pub struct CharFunction {
    pub mu: f64,
    pub m0: f64,
    pub n_terms: usize,
    pub scale: f64,
}

impl CharFunction {
    fn new(mu: f64, m0: f64, n_terms: usize, scale: f64) -> Result<Self> {
        check_mu_open(mu)?;
        if n_terms < 1 {
            return Err(Error::domain("n_terms", "at least one factor is required"));
        }
        if !(-1.0..=1.0).contains(&m0) {
            return Err(Error::domain("m0", format!("{m0} is outside [-1, 1]")));
        }
        Ok(CharFunction { mu, m0, n_terms, scale })
    }

    fn phases(&self, xi: f64) -> impl Iterator<Item = f64> + '_ {
        let r = 1.0 - self.mu;
        (0..self.n_terms).scan(self.scale * self.mu * xi, move |a, _| {
            let out = *a;
            *a *= r;
            Some(out)
        })
    }
}

impl CharacteristicFunction for CharFunction {
    fn eval(&self, xi: f64) -> Complex64 {
        if self.m0 == 0.0 {
            return Complex64::new(self.phases(xi).map(f64::cos).product(), 0.0);
        }
        self.phases(xi).fold(Complex64::new(1.0, 0.0), |acc, x| {
            acc * Complex64::new(x.cos(), -self.m0 * x.sin())
        })
    }
}

/// `xi -> prod cos(mu (1 - mu)^n xi)`.
pub fn char_fn_equilibrium(mu: f64, n_terms: usize) -> Result<CharFunction> {
    CharFunction::new(mu, 0.0, n_terms, 1.0)
}

/// Transform of the series with biased signs of mean `m0`.
pub fn char_fn_equilibrium_biased(mu: f64, m0: f64, n_terms: usize) -> Result<CharFunction> {
    CharFunction::new(mu, m0, n_terms, 1.0)
}

/// Transform of the standardized law `Z / sigma`, `sigma^2 = mu / (2 - mu)`.
pub fn gaussian_char_fn(mu: f64, n_terms: usize) -> Result<CharFunction> {
    check_mu_open(mu)?;
    CharFunction::new(mu, 0.0, n_terms, ((2.0 - mu) / mu).sqrt())
}

/// `max |f(xi) - exp(-xi^2/2)| / xi^4` over the grid, `f` the standardized
/// product.
///
/// The difference is formed as `exp(-xi^2/2) * expm1(D)` with
/// `D = sum [ln cos x_n + x_n^2/2] + (xi^2/2)(1 - mu)^(2N)`, which avoids the
/// cancellation of subtracting two numbers near one.
pub fn d4_to_gaussian(mu: f64, xi_grid: &[f64], n_terms: usize) -> Result<f64> {
    let f = gaussian_char_fn(mu, n_terms)?;
    if xi_grid.is_empty() {
        return Err(Error::domain("xi_grid", "grid is empty"));
    }
    if xi_grid.iter().any(|x| *x == 0.0 || !x.is_finite()) {
        return Err(Error::domain("xi_grid", "grid values must be finite and nonzero"));
    }
    let tail = (1.0 - mu).powi(2 * n_terms.min(i32::MAX as usize / 2) as i32);
    let mut worst: f64 = 0.0;
    for &xi in xi_grid {
        let gauss = (-0.5 * xi * xi).exp();
        let mut d = 0.5 * xi * xi * tail;
        let mut direct = false;
        for x in f.phases(xi) {
            let c = x.cos();
            if c <= 0.0 {
                direct = true;
                break;
            }
            d += log_cos_plus_half_square(x, c);
        }
        let diff = if direct {
            (f.eval(xi).re - gauss).abs()
        } else {
            (gauss * d.exp_m1()).abs()
        };
        worst = worst.max(diff / xi.powi(4));
    }
    Ok(worst)
}

/// `ln cos x + x^2/2`, by its Taylor series near zero.
fn log_cos_plus_half_square(x: f64, cos_x: f64) -> f64 {
    if x.abs() < 0.05 {
        let x2 = x * x;
        let x4 = x2 * x2;
        -x4 * (1.0 / 12.0 + x2 * (1.0 / 45.0 + x2 * (17.0 / 2520.0 + x2 * 31.0 / 14175.0)))
    } else {
        cos_x.ln() + 0.5 * x * x
    }
}

/// Sorted, pairwise disjoint closed intervals.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalSet<T> {
    pub intervals: Vec<(T, T)>,
}

impl IntervalSet<f64> {
    /// Whether `x` lies in some interval widened by `pad` on both sides.
    pub fn contains(&self, x: f64, pad: f64) -> bool {
        let k = self.intervals.partition_point(|(a, _)| *a - pad <= x);
        k > 0 && x <= self.intervals[k - 1].1 + pad
    }

    pub fn total_length(&self) -> f64 {
        self.intervals.iter().map(|(a, b)| b - a).sum()
    }
}

impl IntervalSet<BigRational> {
    pub fn total_length(&self) -> BigRational {
        self.intervals
            .iter()
            .fold(BigRational::zero(), |acc, (a, b)| acc + (b - a))
    }

    pub fn to_f64(&self) -> IntervalSet<f64> {
        IntervalSet {
            intervals: self
                .intervals
                .iter()
                .map(|(a, b)| (a.to_f64().unwrap_or(f64::NAN), b.to_f64().unwrap_or(f64::NAN)))
                .collect(),
        }
    }
}

impl<T: PartialOrd> IntervalSet<T> {
    /// Every interval of `self` lies inside some interval of `outer`.
    pub fn is_within(&self, outer: &IntervalSet<T>) -> bool {
        self.intervals.iter().all(|(a, b)| {
            outer.intervals.iter().any(|(c, d)| c <= a && b <= d)
        })
    }

    /// Sorted, nonempty and pairwise disjoint.
    pub fn is_well_formed(&self) -> bool {
        self.intervals.iter().all(|(a, b)| a <= b)
            && self.intervals.windows(2).all(|w| w[0].1 < w[1].0)
    }
}

fn check_cantor(mu: f64, n: u32) -> Result<()> {
    if !(mu > 0.5 && mu < 1.0) {
        return Err(Error::domain(
            "mu",
            format!("{mu} is outside (1/2, 1); the two affine images overlap"),
        ));
    }
    if n > MAX_CANTOR_LEVEL {
        return Err(Error::ScaleGuard {
            requested: 1u128 << n.min(127),
            cap: 1u128 << MAX_CANTOR_LEVEL,
        });
    }
    Ok(())
}

/// Level-`n` set `C_n`: `C_0 = [-1, 1]`,
/// `C_(n+1) = ((1 - mu) C_n - mu) u ((1 - mu) C_n + mu)`.
pub fn cantor_level(mu: f64, n: u32) -> Result<IntervalSet<f64>> {
    check_cantor(mu, n)?;
    let mut cur = vec![(-1.0, 1.0)];
    for _ in 0..n {
        let r = 1.0 - mu;
        let left = cur.iter().map(|(a, b)| (r * a - mu, r * b - mu));
        let right = cur.iter().map(|(a, b)| (r * a + mu, r * b + mu));
        cur = left.chain(right).collect();
    }
    Ok(IntervalSet { intervals: cur })
}

/// Exact-arithmetic [`cantor_level`].
pub fn cantor_level_exact(mu: &BigRational, n: u32) -> Result<IntervalSet<BigRational>> {
    check_cantor(mu.to_f64().unwrap_or(f64::NAN), n)?;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    if mu <= &half || mu >= &BigRational::one() {
        return Err(Error::domain("mu", format!("{mu} is outside (1/2, 1)")));
    }
    let one = BigRational::one();
    let r = &one - mu;
    let mut cur = vec![(-one.clone(), one.clone())];
    for _ in 0..n {
        let mut next = Vec::with_capacity(cur.len() * 2);
        for (a, b) in &cur {
            next.push((&r * a - mu, &r * b - mu));
        }
        for (a, b) in &cur {
            next.push((&r * a + mu, &r * b + mu));
        }
        cur = next;
    }
    Ok(IntervalSet { intervals: cur })
}

/// Lebesgue measure of `C_n`: `2 (2 (1 - mu))^n`.
pub fn cantor_total_length(mu: f64, n: u32) -> Result<f64> {
    check_cantor(mu, 0)?;
    Ok(2.0 * (2.0 * (1.0 - mu)).powi(n as i32))
}

/// Exact [`cantor_total_length`].
pub fn cantor_total_length_exact(mu: &BigRational, n: u32) -> Result<BigRational> {
    check_cantor(mu.to_f64().unwrap_or(f64::NAN), 0)?;
    let two = BigRational::from_integer(BigInt::from(2));
    let factor = &two * (BigRational::one() - mu);
    Ok(two * num_traits::pow(factor, n as usize))
}

/// `ln 2 / ln(1 / (1 - mu))`, for `mu` in `[1/2, 1)`.
pub fn hausdorff_dimension(mu: f64) -> Result<f64> {
    if !(mu >= 0.5 && mu < 1.0) {
        return Err(Error::domain("mu", format!("{mu} is outside [1/2, 1)")));
    }
    Ok(std::f64::consts::LN_2 / -(1.0 - mu).ln())
}

/// `3 - 2 sqrt 2`, the plateau half-width of the volcano density.
pub const VOLCANO_R: f64 = 3.0 - 2.0 * std::f64::consts::SQRT_2;

/// Equilibrium density at `mu = 1 - 1/sqrt 2`: linear ramps on `[-1, -r]`
/// and `[r, 1]`, flat on `[-r, r]`.
pub fn volcano_density(x: f64) -> Result<f64> {
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::domain("x", format!("{x} is outside [-1, 1]")));
    }
    let r = VOLCANO_R;
    Ok(if x.abs() <= r {
        1.0 / (1.0 + r)
    } else {
        (1.0 - x.abs()) / ((1.0 + r) * (1.0 - r))
    })
}

/// CDF of [`volcano_density`].
pub fn volcano_cdf(x: f64) -> f64 {
    let r = VOLCANO_R;
    let ramp = |y: f64| y * y / (2.0 * (1.0 + r) * (1.0 - r));
    if x <= -1.0 {
        0.0
    } else if x <= -r {
        ramp(1.0 + x)
    } else if x <= r {
        ramp(1.0 - r) + (x + r) / (1.0 + r)
    } else if x < 1.0 {
        1.0 - ramp(1.0 - x)
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::stationary_variance;
    use crate::metrics::{empirical_char_fn, ks_distance, uniform_cdf, wasserstein_1};
    use crate::model::RandomSource;
    use crate::rational::MU_VOLCANO;
    use proptest::prelude::*;

    fn ratio(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn depth_formula() {
        assert_eq!(truncation_depth(0.5, 1e-9).unwrap(), 30);
        assert_eq!(truncation_depth(2.0 / 3.0, 1e-9).unwrap(), 19);
        let k = truncation_depth(0.3, 1e-7).unwrap();
        assert!(0.7f64.powi(k as i32) <= 1e-7 && 0.7f64.powi(k as i32 - 1) > 1e-7);
        assert!(truncation_depth(1.0, 1e-9).is_err());
        assert!(truncation_depth(0.0, 1e-9).is_err());
        assert!(truncation_depth(0.5, 0.0).is_err());
    }

    #[test]
    fn sampler_uniform_at_half() {
        let s = sample_equilibrium(0.5, 0.0, 1e-9, 1_000_000, 11).unwrap();
        let u = crate::model::InitSpec::Uniform.sample(1_000_000, RandomSource::new(12, 0));
        // W1 of two independent uniform samples is ~1e-3; the bound is 3e-3
        assert!(wasserstein_1(&s, &u).unwrap() < 0.003);
        assert!(ks_distance(&s, uniform_cdf) < 0.002);
    }

    #[test]
    fn sampler_moments() {
        let n = 1_000_000;
        for (mu, m0) in [(0.2, 0.0), (0.5, 0.0), (2.0 / 3.0, 0.0), (0.2, 0.4), (0.5, 0.4), (2.0 / 3.0, 0.4)] {
            let s = sample_equilibrium(mu, m0, 1e-12, n, 5).unwrap();
            let var = stationary_variance(mu, m0).unwrap();
            let se_mean = (var / n as f64).sqrt();
            assert!((s.mean() - m0).abs() < 4.0 * se_mean, "mu={mu} m0={m0} mean {}", s.mean());
            // variance of the sample variance is bounded by E[Z^4] <= 1
            assert!((s.variance() - var).abs() < 4.0 / (n as f64).sqrt(), "mu={mu} m0={m0}");
        }
        let s = sample_equilibrium(0.3, 0.0, 1e-9, n, 3).unwrap();
        assert!((s.variance() - 0.176_47).abs() < 0.003);
        let s = sample_equilibrium(0.4, 0.999, 1e-9, n, 3).unwrap();
        let sd = stationary_variance(0.4, 0.999).unwrap().sqrt();
        assert!((s.mean() - 0.999).abs() < 3.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn sampler_is_deterministic_and_bounded() {
        let a = sample_equilibrium(0.7, 0.2, 1e-9, 10_000, 9).unwrap();
        let b = sample_equilibrium(0.7, 0.2, 1e-9, 10_000, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.values().iter().all(|x| x.abs() <= 1.0));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| sample_equilibrium(0.7, 0.2, 1e-9, 10_000, 9).unwrap());
        assert_eq!(a, c);
        assert!(sample_equilibrium(0.5, 1.0, 1e-9, 10, 0).is_err());
        assert!(sample_equilibrium(0.5, 0.0, 1e-9, 0, 0).is_err());
    }

    #[test]
    fn fixed_point_examples() {
        let o = |x| Opinion::new(x).unwrap();
        assert_eq!(fixed_point_map(o(1.0), 1, 0.37).value(), 1.0);
        assert!((fixed_point_map(o(-1.0), 1, 2.0 / 3.0).value() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(fixed_point_map(o(0.0), -1, 0.5).value(), -0.5);
    }

    proptest! {
        #[test]
        fn fixed_point_map_stays_in_range(z in -1.0f64..=1.0, up in any::<bool>(), mu in 1e-6f64..1.0) {
            let out = fixed_point_map(Opinion::new(z).unwrap(), if up { 1 } else { -1 }, mu).value();
            prop_assert!((-1.0..=1.0).contains(&out));
        }

        #[test]
        fn char_fn_invariants(mu in 0.01f64..0.99, m0 in -0.9f64..0.9, xi in -50.0f64..50.0) {
            let f = char_fn_equilibrium_biased(mu, m0, 80).unwrap();
            prop_assert!((f.eval(0.0) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
            prop_assert!(f.eval(xi).norm() <= 1.0 + 1e-12);
            prop_assert!((f.eval(-xi) - f.eval(xi).conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn fixed_point_invariance() {
        let n = 1_000_000;
        let mu = 0.3;
        let s = sample_equilibrium(mu, 0.0, 1e-12, n, 21).unwrap();
        let mut rng = RandomSource::new(22, 0).rng();
        let pushed: Vec<f64> = s
            .values()
            .iter()
            .map(|&z| fixed_point_map(Opinion::new(z).unwrap(), rademacher(0.5, uniform01(&mut rng)), mu).value())
            .collect();
        let moved = wasserstein_1(&s, &SampleSet::new(pushed).unwrap()).unwrap();

        // bootstrap noise floor: W1 between the sample and its resamples
        let mut floor = 0.0;
        let reps = 8;
        for r in 0..reps {
            let mut rng = RandomSource::new(23, r).rng();
            let boot: Vec<f64> = (0..n).map(|_| s.values()[rand::Rng::random_range(&mut rng, 0..n)]).collect();
            floor += wasserstein_1(&s, &SampleSet::new(boot).unwrap()).unwrap();
        }
        floor /= reps as f64;
        assert!(moved < 2.0 * floor, "moved {moved} vs floor {floor}");
    }

    #[test]
    fn char_fn_examples() {
        let f = char_fn_equilibrium(0.5, 60).unwrap();
        assert!(f.eval(std::f64::consts::PI).norm() < 1e-10);
        assert!((f.eval(2.0).re - 2f64.sin() / 2.0).abs() < 1e-10);
        assert!((f.eval(2.0).re - 0.454_648_7).abs() < 1e-7);
        for mu in [0.1, 0.5, 0.9] {
            assert_eq!(char_fn_equilibrium(mu, 10).unwrap().eval(0.0), Complex64::new(1.0, 0.0));
        }
        assert!(char_fn_equilibrium(0.5, 0).is_err());
        assert!(char_fn_equilibrium(1.0, 10).is_err());
    }

    #[test]
    fn finite_product_identity() {
        // prod_{n=1..N} cos(xi / 2^n) = sin xi / (2^N sin(xi / 2^N))
        let f = char_fn_equilibrium(0.5, 12).unwrap();
        for xi in [0.3f64, 2.0, 7.5] {
            let closed = xi.sin() / (4096.0 * (xi / 4096.0).sin());
            assert!((f.eval(xi).re - closed).abs() < 1e-13);
        }
    }

    #[test]
    fn product_matches_sinc_on_wide_range() {
        let f = char_fn_equilibrium(0.5, 60).unwrap();
        let worst = (0..=4000)
            .map(|k| -20.0 + k as f64 * 0.01)
            .map(|xi| (f.eval(xi).re - crate::model::sinc(xi)).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn biased_product_matches_samples() {
        let n = 1_000_000;
        for (mu, m0) in [(0.3, 0.0), (0.6, 0.0), (0.3, 0.5)] {
            let s = sample_equilibrium(mu, m0, 1e-12, n, 31).unwrap();
            let f = char_fn_equilibrium_biased(mu, m0, 200).unwrap();
            for xi in [1.0, 3.0, 10.0] {
                let diff = (empirical_char_fn(&s, xi) - f.eval(xi)).norm();
                assert!(diff < 4.0 / (n as f64).sqrt(), "mu={mu} m0={m0} xi={xi} diff={diff}");
            }
        }
    }

    #[test]
    fn cantor_examples() {
        let c1 = cantor_level(2.0 / 3.0, 1).unwrap();
        assert_eq!(c1.intervals.len(), 2);
        let exact = cantor_level_exact(&ratio(2, 3), 2).unwrap();
        assert_eq!(
            exact.intervals,
            vec![
                (ratio(-1, 1), ratio(-7, 9)),
                (ratio(-5, 9), ratio(-1, 3)),
                (ratio(1, 3), ratio(5, 9)),
                (ratio(7, 9), ratio(1, 1)),
            ]
        );
        assert_eq!(exact.total_length(), ratio(8, 9));
        assert_eq!(cantor_total_length_exact(&ratio(2, 3), 2).unwrap(), ratio(8, 9));
        assert_eq!(cantor_level(0.8, 0).unwrap().intervals, vec![(-1.0, 1.0)]);
        assert_eq!(cantor_total_length(0.9, 0).unwrap(), 2.0);
        assert!((cantor_total_length(0.75, 10).unwrap() - 2.0 / 1024.0).abs() < 1e-15);
        assert!(cantor_level(0.5, 3).is_err());
        assert!(cantor_level_exact(&ratio(1, 2), 3).is_err());
        assert!(cantor_level(0.7, MAX_CANTOR_LEVEL + 1).is_err());
    }

    #[test]
    fn cantor_nesting_exact() {
        for mu in [ratio(2, 3), ratio(3, 4), ratio(51, 100), ratio(9, 10)] {
            let mut prev = cantor_level_exact(&mu, 0).unwrap();
            for n in 1..=8 {
                let cur = cantor_level_exact(&mu, n).unwrap();
                assert!(cur.is_well_formed());
                assert!(cur.is_within(&prev));
                assert_eq!(cur.intervals.len(), 1 << n);
                let len = BigRational::from_integer(2.into()) * num_traits::pow(BigRational::one() - &mu, n as usize);
                assert!(cur.intervals.iter().all(|(a, b)| b - a == len));
                assert_eq!(cur.total_length(), cantor_total_length_exact(&mu, n).unwrap());
                prev = cur;
            }
        }
    }

    #[test]
    fn support_and_level_one_masses() {
        let mu = 2.0 / 3.0;
        let s = sample_equilibrium(mu, 0.0, 1e-9, 1_000_000, 41).unwrap();
        let c8 = cantor_level(mu, 8).unwrap();
        assert!(s.values().iter().all(|&x| c8.contains(x, 1e-9)));
        let c1 = cantor_level(mu, 1).unwrap();
        let left = s.values().iter().filter(|&&x| x <= c1.intervals[0].1 + 1e-9).count();
        let frac = left as f64 / s.len() as f64;
        assert!((frac - 0.5).abs() < 0.002, "{frac}");
    }

    #[test]
    fn interval_contains() {
        let c = cantor_level(2.0 / 3.0, 1).unwrap();
        assert!(c.contains(-1.0, 0.0));
        assert!(c.contains(-1.0 / 3.0, 1e-12));
        assert!(!c.contains(0.0, 1e-9));
        assert!(c.contains(0.5, 0.0));
        assert!(!c.contains(1.1, 1e-9));
        assert!(!c.contains(-1.1, 1e-9));
    }

    #[test]
    fn hausdorff_examples() {
        assert!((hausdorff_dimension(2.0 / 3.0).unwrap() - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!((hausdorff_dimension(2.0 / 3.0).unwrap() - 0.630_930).abs() < 1e-6);
        assert_eq!(hausdorff_dimension(0.5).unwrap(), 1.0);
        assert!((hausdorff_dimension(0.75).unwrap() - 0.5).abs() < 1e-15);
        assert!(hausdorff_dimension(0.4).is_err());
        assert!(hausdorff_dimension(1.0).is_err());
    }

    #[test]
    fn volcano_examples() {
        assert!((volcano_density(0.0).unwrap() - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-12);
        assert!((volcano_density(0.0).unwrap() - 0.853_553).abs() < 1e-6);
        assert_eq!(volcano_density(1.0).unwrap(), 0.0);
        assert_eq!(volcano_density(-1.0).unwrap(), 0.0);
        assert!(volcano_density(1.5).is_err());
        let n = 200_001;
        let dx = 2.0 / (n - 1) as f64;
        let vals: Vec<f64> = (0..n).map(|k| volcano_density(-1.0 + k as f64 * dx).unwrap()).collect();
        let mass = dx * (vals.iter().sum::<f64>() - 0.5 * (vals[0] + vals[n - 1]));
        assert!((mass - 1.0).abs() < 1e-10, "{mass}");
        assert!((volcano_cdf(1.0) - 1.0).abs() < 1e-15);
        assert!((volcano_cdf(0.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn volcano_matches_sampler() {
        let s = sample_equilibrium(MU_VOLCANO, 0.0, 1e-12, 1_000_000, 51).unwrap();
        assert!(ks_distance(&s, volcano_cdf) < 0.002);
        let h = crate::metrics::histogram(&s, 200).unwrap();
        let l1 = h.l1_distance_to(|x| volcano_density(x).unwrap());
        assert!(l1 < 0.02, "{l1}");
    }

    #[test]
    fn gaussian_examples() {
        assert_eq!(gaussian_char_fn(0.3, 50).unwrap().eval(0.0), Complex64::new(1.0, 0.0));
        let s3 = 3f64.sqrt();
        assert!((gaussian_char_fn(0.5, 60).unwrap().eval(1.0).re - s3.sin() / s3).abs() < 1e-8);
        assert!((gaussian_char_fn(0.05, 2000).unwrap().eval(1.0).re - (-0.5f64).exp()).abs() < 0.01);
    }

    #[test]
    fn d4_small_frequency_limit() {
        // the xi -> 0 limit of the ratio is mu^2 (2-mu)^2 / (12 (1 - (1-mu)^4))
        for mu in [0.2f64, 0.1, 0.05] {
            let c = (mu * (2.0 - mu)).powi(2) / (1.0 - (1.0f64 - mu).powi(4)) / 12.0;
            let d = d4_to_gaussian(mu, &[1e-3], 4000).unwrap();
            assert!((d - c).abs() < 1e-6 * c, "mu={mu}: {d} vs {c}");
        }
    }

    #[test]
    fn d4_decreases_linearly() {
        let grid = crate::metrics::log_grid(1e-2, 10.0, 400);
        let d: Vec<f64> = [0.2, 0.1, 0.05].iter().map(|&mu| d4_to_gaussian(mu, &grid, 4000).unwrap()).collect();
        assert!(d[1] <= d[0] && d[2] <= d[1]);
        for w in d.windows(2) {
            let r = w[1] / w[0];
            assert!((0.4..=0.6).contains(&r), "ratio {r}");
        }
        assert!(d4_to_gaussian(0.2, &[], 100).is_err());
        assert!(d4_to_gaussian(0.2, &[0.0], 100).is_err());
    }
}
