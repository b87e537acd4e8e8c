//! Distances and summaries between distributions on `[-1, 1]`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CharacteristicFunction, SampleSet};

/// W1 between empirical measures.
///
/// Equal sizes reduce to the mean absolute difference of sorted samples;
/// otherwise the quantile functions are integrated exactly over the merged
/// breakpoints `i/n_a` and `j/n_b`.
pub fn wasserstein_1(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    quantile_distance(a, b, 1)
}

/// W2 between empirical measures (same quantile construction, squared).
pub fn wasserstein_2(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    quantile_distance(a, b, 2).map(f64::sqrt)
}

fn quantile_distance(a: &SampleSet, b: &SampleSet, p: i32) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("samples", "empty sample set"));
    }
    let xa = a.sorted_values();
    let xb = b.sorted_values();
    let cost = |d: f64| if p == 1 { d.abs() } else { d * d };
    if xa.len() == xb.len() {
        let s: f64 = xa.iter().zip(xb.iter()).map(|(x, y)| cost(x - y)).sum();
        return Ok(s / xa.len() as f64);
    }
    // walk the merged partition of [0, 1]; u = i/na vs j/nb compared exactly
    // as i*nb vs j*na
    let (na, nb) = (xa.len() as u128, xb.len() as u128);
    let (mut i, mut j) = (0u128, 0u128);
    let mut last = 0u128; // position scaled by na*nb
    let mut total = 0.0;
    while i < na && j < nb {
        let next_a = (i + 1) * nb;
        let next_b = (j + 1) * na;
        let next = next_a.min(next_b);
        total += (next - last) as f64 * cost(xa[i as usize] - xb[j as usize]);
        last = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    Ok(total / (na * nb) as f64)
}

/// Exact W1 to the point mass at `c`.
pub fn w1_to_point(a: &SampleSet, c: f64) -> f64 {
    a.values().iter().map(|x| (x - c).abs()).sum::<f64>() / a.len() as f64
}

/// `(1/n) sum exp(-i x_k xi)`.
pub fn empirical_char_fn(a: &SampleSet, xi: f64) -> Complex64 {
    let (mut re, mut im) = (0.0, 0.0);
    for &x in a.values() {
        let (s, c) = (x * xi).sin_cos();
        re += c;
        im -= s;
    }
    let n = a.len() as f64;
    Complex64::new(re / n, im / n)
}

/// `n` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (l + (h - l) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// 200 log-spaced magnitudes on `[1e-2, 1e2]`, both signs.
pub fn default_xi_grid() -> Vec<f64> {
    let pos = log_grid(1e-2, 1e2, 200);
    pos.iter().rev().map(|x| -x).chain(pos.iter().copied()).collect()
}

/// Grid approximation of the Fourier-based distance
/// `sup |f(xi) - g(xi)| / |xi|^s`.
///
/// The supremum is taken over `xi_grid` only, which should reach down to
/// `|xi| = 1e-2`; pairs with matching moments up to order `floor(s)` have a
/// finite supremum.
pub fn toscani_distance(
    f: &dyn CharacteristicFunction,
    g: &dyn CharacteristicFunction,
    s: f64,
    xi_grid: &[f64],
) -> Result<f64> {
    if xi_grid.is_empty() {
        return Err(Error::domain("xi_grid", "empty frequency grid"));
    }
    if !(s >= 1.0) {
        return Err(Error::domain("s", format!("order {s} must be at least 1")));
    }
    if xi_grid.iter().any(|&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::domain("xi_grid", "frequencies must be finite and nonzero"));
    }
    Ok(xi_grid
        .iter()
        .map(|&xi| (f.eval(xi) - g.eval(xi)).norm() / xi.abs().powf(s))
        .fold(0.0, f64::max))
}

/// One-sample Kolmogorov-Smirnov statistic against a continuous CDF.
pub fn ks_distance(a: &SampleSet, reference_cdf: impl Fn(f64) -> f64) -> f64 {
    let x = a.sorted_values();
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let f = reference_cdf(xi);
            (((i + 1) as f64 / n) - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// CDF of Uniform[-1, 1].
pub fn uniform_cdf(x: f64) -> f64 {
    (0.5 * (x + 1.0)).clamp(0.0, 1.0)
}

/// Density histogram with equal-width bins on `[-1, 1]`.
///
/// Bins are right-open except the last, which is closed, so `x = 1` is
/// counted.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
}

pub fn histogram(a: &SampleSet, n_bins: usize) -> Result<Histogram> {
    if n_bins < 1 {
        return Err(Error::domain("n_bins", "at least one bin is required"));
    }
    let width = 2.0 / n_bins as f64;
    let mut counts = vec![0u64; n_bins];
    for &x in a.values() {
        let k = (((x + 1.0) / width).floor() as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let n = a.len() as f64;
    Ok(Histogram {
        bin_edges: (0..=n_bins).map(|k| -1.0 + k as f64 * width).collect(),
        densities: counts.iter().map(|&c| c as f64 / (n * width)).collect(),
    })
}

impl Histogram {
    pub fn total_mass(&self) -> f64 {
        self.densities
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(d, e)| d * (e[1] - e[0]))
            .sum()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }

    /// `int |h(x) - rho(x)| dx`, with `rho` resolved by a 32-point midpoint
    /// rule inside each bin.
    pub fn l1_distance_to(&self, rho: impl Fn(f64) -> f64) -> f64 {
        const SUB: usize = 32;
        self.densities
            .iter()
            .zip(self.bin_edges.windows(2))
            .map(|(&h, e)| {
                let w = (e[1] - e[0]) / SUB as f64;
                (0..SUB)
                    .map(|k| (h - rho(e[0] + (k as f64 + 0.5) * w)).abs() * w)
                    .sum::<f64>()
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitSpec, RandomSource};
    use proptest::prelude::*;

    fn ss(v: &[f64]) -> SampleSet {
        SampleSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn w1_examples() {
        let a = ss(&[0.3, -0.2, 0.9]);
        assert_eq!(wasserstein_1(&a, &a).unwrap(), 0.0);
        assert_eq!(wasserstein_1(&ss(&[-1.0, -1.0]), &ss(&[1.0, 1.0])).unwrap(), 2.0);
        assert!((wasserstein_1(&ss(&[0.0, 1.0]), &ss(&[0.5, 0.5])).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn w2_examples() {
        let a = ss(&[0.3, -0.2, 0.9]);
        assert_eq!(wasserstein_2(&a, &a).unwrap(), 0.0);
        assert_eq!(wasserstein_2(&ss(&[-1.0]), &ss(&[1.0])).unwrap(), 2.0);
        assert!((wasserstein_2(&ss(&[0.0, 1.0]), &ss(&[0.5, 0.5])).unwrap() - 0.5).abs() < 1e-15);
    }

    /// Brute-force W1 for unequal sizes: integrate |F_a - F_b| over the
    /// merged support.
    fn w1_cdf_oracle(a: &[f64], b: &[f64]) -> f64 {
        let mut pts: Vec<f64> = a.iter().chain(b).copied().collect();
        pts.sort_by(f64::total_cmp);
        let cdf = |v: &[f64], x: f64| v.iter().filter(|&&y| y <= x).count() as f64 / v.len() as f64;
        pts.windows(2).map(|w| (cdf(a, w[0]) - cdf(b, w[0])).abs() * (w[1] - w[0])).sum()
    }

    #[test]
    fn unequal_sizes_match_cdf_integral() {
        let a = [0.1, -0.7, 0.4];
        let b = [0.9, -0.2, 0.0, 0.3, -1.0];
        let w = wasserstein_1(&ss(&a), &ss(&b)).unwrap();
        assert!((w - w1_cdf_oracle(&a, &b)).abs() < 1e-14);
        // repeated sample is the same measure
        let a2: Vec<f64> = a.iter().chain(a.iter()).copied().collect();
        assert!(wasserstein_1(&ss(&a), &ss(&a2)).unwrap() < 1e-15);
        assert!(wasserstein_2(&ss(&a), &ss(&a2)).unwrap() < 1e-15);
    }

    fn arb_set() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0f64..=1.0, 1..40)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn wasserstein_metric_properties(a in arb_set(), b in arb_set(), c in arb_set()) {
            let (a, b, c) = (ss(&a), ss(&b), ss(&c));
            let ab1 = wasserstein_1(&a, &b).unwrap();
            let ba1 = wasserstein_1(&b, &a).unwrap();
            let ab2 = wasserstein_2(&a, &b).unwrap();
            prop_assert!((ab1 - ba1).abs() < 1e-12);
            prop_assert!(ab1 >= 0.0);
            prop_assert!(ab1 <= ab2 + 1e-12);
            prop_assert!(ab2 <= (2.0 * ab1).sqrt() + 1e-12);
            let ac1 = wasserstein_1(&a, &c).unwrap();
            let cb1 = wasserstein_1(&c, &b).unwrap();
            prop_assert!(ab1 <= ac1 + cb1 + 1e-12);
            let ac2 = wasserstein_2(&a, &c).unwrap();
            let cb2 = wasserstein_2(&c, &b).unwrap();
            prop_assert!(ab2 <= ac2 + cb2 + 1e-12);
        }
    }

    #[test]
    fn w1_to_point_examples() {
        assert_eq!(w1_to_point(&ss(&[0.2, 0.2]), 0.2), 0.0);
        assert!((w1_to_point(&ss(&[-1.0, 0.0, 1.0]), 0.0) - 2.0 / 3.0).abs() < 1e-15);
        let u = InitSpec::Uniform.sample(200_000, RandomSource::new(1, 0));
        assert!((w1_to_point(&u, 1.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn toscani_examples() {
        let grid = default_xi_grid();
        let delta0 = |_: f64| Complex64::new(1.0, 0.0);
        assert_eq!(toscani_distance(&delta0, &delta0, 2.0, &grid).unwrap(), 0.0);

        // delta_0 vs delta_a, s = 1: sup_xi 2|sin(a xi / 2)| / |xi| = a, approached from below
        let a = 0.7;
        let delta_a = move |xi: f64| Complex64::from_polar(1.0, -a * xi);
        let coarse = toscani_distance(&delta0, &delta_a, 1.0, &log_grid(0.5, 10.0, 50)).unwrap();
        let fine = toscani_distance(&delta0, &delta_a, 1.0, &log_grid(1e-3, 10.0, 400)).unwrap();
        assert!(coarse < fine && fine <= a);
        assert!(a - fine < 1e-6);

        let prod = |xi: f64| Complex64::new((0..60).map(|n| (0.3 * 0.7f64.powi(n) * xi).cos()).product(), 0.0);
        let shifted: Vec<f64> = grid.iter().map(|x| x * 1.013).collect();
        assert!(toscani_distance(&prod, &prod, 2.0, &shifted).unwrap() < 1e-12);

        assert!(toscani_distance(&delta0, &delta0, 2.0, &[]).is_err());
        assert!(toscani_distance(&delta0, &delta0, 2.0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn ks_examples() {
        assert!((ks_distance(&ss(&[0.0]), uniform_cdf) - 0.5).abs() < 1e-15);
        assert!((ks_distance(&ss(&[-1.0]), uniform_cdf) - 1.0).abs() < 1e-15);
        let u = InitSpec::Uniform.sample(1_000_000, RandomSource::new(2, 0));
        assert!(ks_distance(&u, uniform_cdf) < 0.002);
    }

    #[test]
    fn ecf_examples() {
        let a = ss(&[0.3, -0.8]);
        assert_eq!(empirical_char_fn(&a, 0.0), Complex64::new(1.0, 0.0));
        let one = empirical_char_fn(&ss(&[1.0]), std::f64::consts::PI);
        assert!((one - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let u = InitSpec::Uniform.sample(1_000_000, RandomSource::new(3, 0));
        let v = empirical_char_fn(&u, 2.0);
        assert!((v - Complex64::new(2f64.sin() / 2.0, 0.0)).norm() < 0.004);
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&ss(&[0.0]), 2).unwrap();
        assert_eq!(h.densities, vec![0.0, 1.0]);
        let h = histogram(&ss(&[1.0, -1.0]), 4).unwrap();
        assert_eq!(h.densities, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(histogram(&ss(&[0.0]), 0).is_err());

        let u = InitSpec::Uniform.sample(1_000_000, RandomSource::new(4, 0));
        let h = histogram(&u, 100).unwrap();
        assert!(h.densities.iter().all(|d| (d - 0.5).abs() < 0.02));
        assert!((h.total_mass() - 1.0).abs() < 1e-10);
        assert!(h.l1_distance_to(|_| 0.5) < 0.02);
    }
}
