//! Galton–Watson trees: offspring laws, exact size distributions and
//! conditioned samplers.

use rand::Rng;

use crate::ensembles::cycle_lemma_rotate;
use crate::error::{invalid, Error, Result};
use crate::tree::RootedTree;

/// Truncation point of the heavy-tailed builtin law.
pub const STABLE_K_MAX: usize = 1_000_000;

/// Total number of vertices a rejection sampler may generate before giving
/// up.
pub const REJECTION_VERTEX_CAP: u64 = 10_000_000;

/// Sizes up to which exact size tables decide whether conditioning is
/// possible.
const EXACT_FEASIBILITY_MAX: usize = 2_000;

#[derive(Clone, Debug, PartialEq)]
pub struct OffspringLaw {
    name: String,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    /// `f64::INFINITY` marks laws in the domain of a stable law.
    variance: f64,
}

impl OffspringLaw {
    /// Law with the given probabilities; they must sum to one within 1e−12.
    pub fn from_pmf(name: impl Into<String>, pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() || pmf.iter().any(|p| !(*p >= 0.0)) {
            return Err(invalid("offspring probabilities must be non-negative"));
        }
        let total: f64 = pmf.iter().rev().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("offspring probabilities sum to {total}")));
        }
        if pmf.get(1).copied().unwrap_or(0.0) >= 1.0 {
            return Err(invalid("offspring law must have η(1) < 1"));
        }
        let mean = pmf.iter().enumerate().map(|(k, p)| k as f64 * p).sum::<f64>();
        let second = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| (k as f64).powi(2) * p)
            .sum::<f64>();
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(OffspringLaw {
            name: name.into(),
            pmf,
            cdf,
            mean,
            variance: second - mean * mean,
        })
    }

    /// Geometric law `η(k) = 2^{-k-1}`.
    pub fn geometric_half() -> Self {
        let pmf = (0..64).map(|k| 0.5f64.powi(k + 1)).collect();
        Self::from_pmf("geometric", pmf).expect("valid law")
    }

    pub fn poisson_one() -> Self {
        let mut pmf = Vec::with_capacity(32);
        let mut p = (-1.0f64).exp();
        for k in 0..32 {
            pmf.push(p);
            p /= (k + 1) as f64;
        }
        Self::from_pmf("poisson1", pmf).expect("valid law")
    }

    /// `η(0) = η(2) = 1/2`.
    pub fn binary() -> Self {
        Self::from_pmf("binary", vec![0.5, 0.0, 0.5]).expect("valid law")
    }

    /// `η(0) = 2 − √2`, `η(i) = (1 − 2^{-1/2})^{i−1}` for `i ≥ 2`.
    pub fn leafless_binary() -> Self {
        let r = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
        let mut pmf = vec![2.0 - std::f64::consts::SQRT_2, 0.0];
        let mut p = r;
        while p > 1e-19 {
            pmf.push(p);
            p *= r;
        }
        Self::from_pmf("leafless-binary", pmf).expect("valid law")
    }

    /// `η(k) = κ k^{−1−α}` for `2 ≤ k ≤ 10^6`, with `η(0)` and `η(1)` set
    /// so that the law is a critical probability distribution.
    pub fn stable_tail(alpha: f64, kappa: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(invalid(format!("stable tail index {alpha} outside (1, 2)")));
        }
        if !(kappa > 0.0) {
            return Err(invalid("stable tail constant must be positive"));
        }
        let mut pmf = vec![0.0; STABLE_K_MAX + 1];
        let (mut mass, mut mean) = (0.0, 0.0);
        // Smallest terms first for accuracy.
        for k in (2..=STABLE_K_MAX).rev() {
            let p = kappa * (k as f64).powf(-1.0 - alpha);
            pmf[k] = p;
            mass += p;
            mean += k as f64 * p;
        }
        if mean >= 1.0 {
            return Err(invalid(format!(
                "κ = {kappa} too large: tail alone has mean {mean}"
            )));
        }
        pmf[1] = 1.0 - mean;
        pmf[0] = mean - mass;
        let mut law = Self::from_pmf(format!("stable:alpha={alpha},kappa={kappa}"), pmf)?;
        law.variance = f64::INFINITY;
        Ok(law)
    }

    /// Looks up a builtin law: `geometric` (alias `geo2`), `poisson1`,
    /// `binary`, `leafless-binary`, or `stable:alpha=A,kappa=K`.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "geometric" | "geo2" => Ok(Self::geometric_half()),
            "poisson1" | "poisson" => Ok(Self::poisson_one()),
            "binary" => Ok(Self::binary()),
            "leafless-binary" => Ok(Self::leafless_binary()),
            s if s.starts_with("stable") => {
                let (mut alpha, mut kappa) = (1.5, 0.1);
                let params = s.trim_start_matches("stable").trim_start_matches(':');
                for kv in params.split(',').filter(|kv| !kv.is_empty()) {
                    let (k, v) = kv
                        .split_once('=')
                        .ok_or_else(|| Error::FamilySpec(format!("bad parameter {kv:?}")))?;
                    let v: f64 = v
                        .parse()
                        .map_err(|_| Error::FamilySpec(format!("bad number {v:?}")))?;
                    match k {
                        "alpha" => alpha = v,
                        "kappa" => kappa = v,
                        _ => return Err(Error::FamilySpec(format!("unknown parameter {k:?}"))),
                    }
                }
                Self::stable_tail(alpha, kappa)
            }
            _ => Err(Error::FamilySpec(format!("unknown offspring law {name:?}"))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn max_degree(&self) -> usize {
        self.pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u);
        if k < self.pmf.len() {
            k
        } else {
            self.max_degree()
        }
    }

    /// Probability `Π η(c_u)` of an ordered tree.
    pub fn tree_probability(&self, t: &RootedTree) -> f64 {
        (0..t.len()).map(|v| self.prob(t.out_degree(v))).product()
    }

    /// Largest span `d` such that the support lies in `d·Z` (0 for a point
    /// mass at 0).
    fn span(&self) -> usize {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        (0..self.pmf.len())
            .filter(|&k| self.pmf[k] > 0.0)
            .fold(0, gcd)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GwOutcome {
    Tree(RootedTree),
    Overflow,
}

/// Ordered GW tree, or [`GwOutcome::Overflow`] once it exceeds `cap`
/// vertices.
pub fn sample_gw<R: Rng + ?Sized>(law: &OffspringLaw, rng: &mut R, cap: usize) -> GwOutcome {
    let mut degrees = Vec::new();
    let mut pending: usize = 1;
    while pending > 0 {
        if degrees.len() >= cap {
            return GwOutcome::Overflow;
        }
        let d = law.sample(rng);
        degrees.push(d);
        pending = pending - 1 + d;
    }
    GwOutcome::Tree(RootedTree::from_lukasiewicz(&degrees).expect("Łukasiewicz word"))
}

/// `P(#vertices = k)` for `k = 0..=n_max` (entry 0 is zero), by forward
/// dynamic programming on the depth-first exploration walk.
pub fn size_pmf_vertices(law: &OffspringLaw, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    if n_max == 0 {
        return out;
    }
    // r[h]: probability that after t explored vertices, h remain pending
    // and the exploration has not finished.
    let mut r = vec![0.0; n_max + 1];
    r[1] = 1.0;
    let eta = law.pmf();
    for t in 1..=n_max {
        out[t] = r[1] * eta[0];
        // From t explored vertices, h pending must still be reachable to
        // zero within n_max − t more steps.
        let h_max = n_max - t;
        let mut next = vec![0.0; n_max + 1];
        for (h, &p) in r.iter().enumerate().skip(1) {
            if p == 0.0 {
                continue;
            }
            for (k, &e) in eta.iter().enumerate() {
                let nh = h + k - 1;
                if nh > h_max {
                    break;
                }
                if nh > 0 {
                    next[nh] += p * e;
                }
            }
        }
        r = next;
    }
    out
}

/// `P(#vertices = n) = n^{-1} P(S_n = n − 1)` for `n = 0..=n_max`, with
/// `S_n` a sum of `n` independent offspring counts.
pub fn size_pmf_vertices_random_walk(law: &OffspringLaw, n_max: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_max + 1];
    let eta = law.pmf();
    // conv = law of S_n restricted to values ≤ n_max.
    let mut conv = vec![0.0; n_max + 1];
    conv[0] = 1.0;
    for n in 1..=n_max {
        let mut next = vec![0.0; n_max + 1];
        for (s, &p) in conv.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (k, &e) in eta.iter().enumerate() {
                if s + k > n_max {
                    break;
                }
                next[s + k] += p * e;
            }
        }
        conv = next;
        out[n] = conv[n - 1] / n as f64;
    }
    out
}

/// `P(#childless vertices = k)` for `k = 0..=n_max`, from the series
/// identity `ℓ = (η(0) z + Σ_{k≥2} η(k) ℓ^k) / (1 − η(1))`. For `k ≥ 2`
/// childless vertices are exactly the leaves.
pub fn size_pmf_leaves(law: &OffspringLaw, n_max: usize) -> Vec<f64> {
    let mut ell = vec![0.0; n_max + 1];
    if n_max == 0 {
        return ell;
    }
    let eta = law.pmf();
    let stay = 1.0 - law.prob(1);
    let k_max = law.max_degree().min(n_max);
    // pow[k][m] = [z^m] ℓ^k for k ≥ 2 (ℓ^k has no terms below z^k).
    let mut pow = vec![vec![0.0; n_max + 1]; k_max + 1];
    for m in 1..=n_max {
        let mut acc = if m == 1 { law.prob(0) } else { 0.0 };
        for k in 2..=k_max.min(m) {
            let c = if k == 2 {
                (1..m).map(|j| ell[j] * ell[m - j]).sum::<f64>()
            } else {
                (1..=m - (k - 1)).map(|j| ell[j] * pow[k - 1][m - j]).sum::<f64>()
            };
            pow[k][m] = c;
            acc += eta[k] * c;
        }
        ell[m] = acc / stay;
        // ℓ^k terms that use ell[m] itself appear only at degrees > m.
    }
    ell
}

fn check_possible(law: &OffspringLaw, n: usize, what: &str, p: Option<f64>) -> Result<()> {
    if n == 0 {
        return Err(Error::ImpossibleConditioning(format!("{what} = 0")));
    }
    if let Some(p) = p {
        if p <= 0.0 {
            return Err(Error::ImpossibleConditioning(format!(
                "{} trees have {what} = {n} with probability zero",
                law.name()
            )));
        }
    }
    Ok(())
}

/// Ordered GW tree conditioned to have exactly `n` vertices (cycle lemma
/// with rejection on the degree sum).
pub fn sample_gw_n_vertices<R: Rng + ?Sized>(
    law: &OffspringLaw,
    n: usize,
    rng: &mut R,
) -> Result<RootedTree> {
    if n <= EXACT_FEASIBILITY_MAX {
        let p = size_pmf_vertices(law, n)[n];
        check_possible(law, n, "vertices", Some(p))?;
    } else {
        check_possible(law, n, "vertices", None)?;
        let span = law.span();
        if law.prob(0) == 0.0 || span == 0 || (n - 1) % span != 0 {
            return Err(Error::ImpossibleConditioning(format!(
                "{} trees cannot have {n} vertices",
                law.name()
            )));
        }
    }
    let mut degrees = Vec::with_capacity(n);
    let mut drawn: u64 = 0;
    loop {
        degrees.clear();
        let mut sum = 0usize;
        for _ in 0..n {
            let d = law.sample(rng);
            sum += d;
            degrees.push(d);
            if sum > n - 1 {
                break;
            }
        }
        drawn += degrees.len() as u64;
        if degrees.len() == n && sum == n - 1 {
            return RootedTree::from_lukasiewicz(&cycle_lemma_rotate(&degrees));
        }
        if drawn > REJECTION_VERTEX_CAP * 10 {
            return Err(Error::ResourceCap(format!(
                "conditioning on {n} vertices drew {drawn} offspring counts"
            )));
        }
    }
}

/// Ordered GW tree conditioned to have exactly `n` childless vertices, by
/// rejection.
pub fn sample_gw_n_leaves<R: Rng + ?Sized>(
    law: &OffspringLaw,
    n: usize,
    rng: &mut R,
) -> Result<RootedTree> {
    let p = (n <= EXACT_FEASIBILITY_MAX).then(|| size_pmf_leaves(law, n)[n]);
    check_possible(law, n, "leaves", p)?;
    let mut total: u64 = 0;
    let mut degrees = Vec::new();
    loop {
        degrees.clear();
        let mut pending = 1usize;
        let mut childless = 0usize;
        while pending > 0 && childless <= n {
            let d = law.sample(rng);
            degrees.push(d);
            childless += (d == 0) as usize;
            pending = pending - 1 + d;
            if degrees.len() as u64 + total > REJECTION_VERTEX_CAP {
                return Err(Error::ResourceCap(format!(
                    "conditioning on {n} leaves generated more than {REJECTION_VERTEX_CAP} vertices"
                )));
            }
        }
        total += degrees.len() as u64;
        if pending == 0 && childless == n {
            return RootedTree::from_lukasiewicz(&degrees);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn builtins_are_critical() {
        for name in ["geometric", "poisson1", "binary", "leafless-binary"] {
            let law = OffspringLaw::builtin(name).unwrap();
            assert!((law.mean() - 1.0).abs() < 1e-9, "{name}");
        }
        assert!((OffspringLaw::geometric_half().variance() - 2.0).abs() < 1e-12);
        assert!((OffspringLaw::poisson_one().variance() - 1.0).abs() < 1e-12);
        let lb = OffspringLaw::leafless_binary();
        let target = 4.0 * (std::f64::consts::SQRT_2 - 1.0);
        assert!((lb.variance() - target).abs() < 1e-12);
        assert!(OffspringLaw::builtin("nope").is_err());
    }

    #[test]
    fn stable_tail_is_adjusted() {
        let law = OffspringLaw::builtin("stable:alpha=1.5,kappa=0.2").unwrap();
        assert!((law.mean() - 1.0).abs() < 1e-9);
        assert!(law.variance().is_infinite());
        assert!(law.prob(0) > 0.0 && law.prob(1) > 0.0);
        assert!(OffspringLaw::stable_tail(1.5, 5.0).is_err());
        assert!(OffspringLaw::stable_tail(2.5, 0.1).is_err());
    }

    #[test]
    fn binary_sizes() {
        let b = OffspringLaw::binary();
        let p = size_pmf_vertices(&b, 7);
        assert_eq!(p[1], 0.5);
        assert_eq!(p[2], 0.0);
        assert!((p[3] - 0.125).abs() < 1e-15);
        assert!((p[5] - 2.0 / 32.0).abs() < 1e-15);
        let l = size_pmf_leaves(&b, 4);
        assert!((l[1] - 0.5).abs() < 1e-15);
        assert!((l[2] - 0.125).abs() < 1e-15);
        assert!((l[3] - p[5]).abs() < 1e-15);
    }

    #[test]
    fn two_size_routes_agree() {
        for law in [
            OffspringLaw::geometric_half(),
            OffspringLaw::poisson_one(),
            OffspringLaw::leafless_binary(),
        ] {
            let a = size_pmf_vertices(&law, 60);
            let b = size_pmf_vertices_random_walk(&law, 60);
            for n in 1..=60 {
                assert!((a[n] - b[n]).abs() < 1e-12, "{} n={n}", law.name());
            }
        }
    }

    #[test]
    fn conditioned_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = OffspringLaw::binary();
        for _ in 0..20 {
            let t = sample_gw_n_vertices(&b, 3, &mut rng).unwrap();
            assert_eq!(t.parent_array(), vec![-1, 0, 0]);
        }
        assert!(matches!(
            sample_gw_n_vertices(&b, 4, &mut rng),
            Err(Error::ImpossibleConditioning(_))
        ));
        let g = OffspringLaw::geometric_half();
        assert_eq!(sample_gw_n_vertices(&g, 5000, &mut rng).unwrap().len(), 5000);
        let t = sample_gw_n_leaves(&OffspringLaw::poisson_one(), 6, &mut rng).unwrap();
        assert_eq!(t.leaf_count(), 6);
    }

    #[test]
    fn overflow_is_a_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let heavy = OffspringLaw::from_pmf("always2", vec![0.0, 0.0, 1.0]).unwrap();
        assert_eq!(sample_gw(&heavy, &mut rng, 100), GwOutcome::Overflow);
    }
}
