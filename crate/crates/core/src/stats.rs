//! Goodness-of-fit statistics used by the verification suites.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Kolmogorov–Smirnov distance between the empirical law of `sample` and a
/// continuous `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> f64 {
    assert!(!sample.is_empty(), "KS statistic of an empty sample");
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("NaN in sample"));
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Counts occurrences of each value.
pub fn tally<K: Eq + Hash + Clone, I: IntoIterator<Item = K>>(items: I) -> HashMap<K, usize> {
    let mut counts = HashMap::new();
    for k in items {
        *counts.entry(k).or_insert(0) += 1;
    }
    counts
}

/// Total-variation distance between empirical counts and a reference law.
/// Keys missing from either side count with probability zero.
pub fn tv_counts<K: Eq + Hash>(counts: &HashMap<K, usize>, law: &HashMap<K, f64>) -> f64 {
    let total: usize = counts.values().sum();
    let total = total as f64;
    let mut d = 0.0;
    for (k, &p) in law {
        let q = counts.get(k).copied().unwrap_or(0) as f64 / total;
        d += (p - q).abs();
    }
    for (k, &c) in counts {
        if !law.contains_key(k) {
            d += c as f64 / total;
        }
    }
    0.5 * d
}

/// Total-variation distance between two probability vectors on `0..len`.
pub fn tv_vectors(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    0.5 * (0..n)
        .map(|i| (p.get(i).copied().unwrap_or(0.0) - q.get(i).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
}

/// Total-variation distance between two empirical tallies.
pub fn tv_between_counts<K: Eq + Hash + Clone + Ord>(
    a: &HashMap<K, usize>,
    b: &HashMap<K, usize>,
) -> f64 {
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    let keys: BTreeMap<K, ()> = a.keys().chain(b.keys()).map(|k| (k.clone(), ())).collect();
    0.5 * keys
        .keys()
        .map(|k| {
            let pa = a.get(k).copied().unwrap_or(0) as f64 / na as f64;
            let pb = b.get(k).copied().unwrap_or(0) as f64 / nb as f64;
            (pa - pb).abs()
        })
        .sum::<f64>()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of observed counts against expected
/// probabilities (same order). Categories with zero expected mass must have
/// zero counts.
pub fn chi_square(observed: &[usize], expected: &[f64]) -> ChiSquare {
    assert_eq!(observed.len(), expected.len());
    assert!(observed.len() >= 2, "chi-square needs two categories");
    let n: usize = observed.iter().sum();
    let n = n as f64;
    let mut stat = 0.0;
    let mut cats = 0usize;
    for (&o, &p) in observed.iter().zip(expected) {
        if p <= 0.0 {
            if o > 0 {
                return ChiSquare {
                    statistic: f64::INFINITY,
                    dof: observed.len() - 1,
                    p_value: 0.0,
                };
            }
            continue;
        }
        let e = n * p;
        stat += (o as f64 - e).powi(2) / e;
        cats += 1;
    }
    let dof = cats.saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    ChiSquare {
        statistic: stat,
        dof,
        p_value: 1.0 - dist.cdf(stat),
    }
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Raw empirical moments `E[X^k]` for `k = 1..=k_max`.
pub fn raw_moments(xs: &[f64], k_max: usize) -> Vec<f64> {
    let n = xs.len() as f64;
    (1..=k_max)
        .map(|k| xs.iter().map(|x| x.powi(k as i32)).sum::<f64>() / n)
        .collect()
}

/// Empirical quantile by linear interpolation (`q` in `[0, 1]`).
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = q * (s.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    s[lo] + (s[hi] - s[lo]) * (pos - lo as f64)
}

/// Least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let (mx, _) = mean_var(x);
    let (my, _) = mean_var(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_against_own_cdf_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..10_000).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let d = ks_statistic(&xs, |x| 1.0 - (-x).exp());
        assert!(d < 0.02, "{d}");
    }

    #[test]
    fn ks_disjoint_supports() {
        let a = [0.0, 0.1, 0.2];
        let b = [5.0, 6.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
        let d = ks_statistic(&b, |x| if x < 1.0 { x.max(0.0) } else { 1.0 });
        assert_eq!(d, 1.0);
    }

    #[test]
    fn chi_square_flags_mismatch() {
        let fair = chi_square(&[5010, 4990], &[0.5, 0.5]);
        assert!(fair.p_value > 0.5);
        let biased = chi_square(&[6000, 4000], &[0.5, 0.5]);
        assert!(biased.p_value < 1e-6);
    }

    #[test]
    fn tv_of_identical_laws_is_zero() {
        let counts = tally(vec![1, 1, 2, 2]);
        let law: HashMap<i32, f64> = [(1, 0.5), (2, 0.5)].into_iter().collect();
        assert_eq!(tv_counts(&counts, &law), 0.0);
        let law2: HashMap<i32, f64> = [(3, 1.0)].into_iter().collect();
        assert_eq!(tv_counts(&counts, &law2), 1.0);
        assert_eq!(tv_vectors(&[0.5, 0.5], &[1.0]), 0.5);
    }
}
