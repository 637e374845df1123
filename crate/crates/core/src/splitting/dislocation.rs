use std::cell::RefCell;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp1};
use statrs::function::gamma::{gamma, ln_gamma};

use super::Estimate;
use crate::error::{invalid, Error, Result};
use crate::quad::{adaptive_gk, double_exponential};

const ABS_TOL: f64 = 1e-12;
const REL_TOL: f64 = 1e-10;
const NESTED_REL_TOL: f64 = 1e-9;

/// Which pieces of the Poisson point configuration form the masses of the
/// stable dislocation measure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StableReading {
    /// Lengths of the gaps between successive atoms, the gap below the
    /// smallest simulated atom being discarded.
    Gaps,
    /// The atoms themselves (jumps of a stable subordinator at time 1).
    Jumps,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Rule {
    Kronrod,
    TanhSinh,
}

#[derive(Clone, Debug, PartialEq)]
enum Kind {
    Brownian,
    Ford(f64),
    Kary(usize),
    Stable {
        alpha: f64,
        reading: StableReading,
        n_atoms: usize,
        n_samples: usize,
        seed: u64,
    },
    Atom {
        s: Vec<f64>,
        weight: f64,
    },
}

/// A conservative dislocation measure on the mass simplex, accessed through
/// its integrals.
#[derive(Clone, Debug, PartialEq)]
pub struct DislocationMeasure {
    kind: Kind,
}

impl DislocationMeasure {
    /// `ν_Br(s_1 ∈ dx) = √2 / (√π (x(1−x))^{3/2})` on `(1/2, 1)`, binary.
    pub fn nu_br() -> Self {
        DislocationMeasure { kind: Kind::Brownian }
    }

    pub fn nu_ford(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("ν_Ford needs α in (0, 1), got {alpha}")));
        }
        Ok(DislocationMeasure { kind: Kind::Ford(alpha) })
    }

    pub fn nu_k(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(invalid(format!("ν_k needs k ≥ 2, got {k}")));
        }
        Ok(DislocationMeasure { kind: Kind::Kary(k) })
    }

    /// Monte Carlo stable measure for `α ∈ (1, 2)`; experimental.
    pub fn nu_stable(alpha: f64, n_samples: usize) -> Result<Self> {
        if !(alpha > 1.0 && alpha < 2.0) {
            return Err(invalid(format!("ν_α needs α in (1, 2), got {alpha}")));
        }
        if n_samples < 2 {
            return Err(invalid("ν_α needs at least two Monte Carlo samples"));
        }
        Ok(DislocationMeasure {
            kind: Kind::Stable {
                alpha,
                reading: StableReading::Gaps,
                n_atoms: 4000,
                n_samples,
                seed: 0,
            },
        })
    }

    /// `weight · δ_s`.
    pub fn point_mass(s: Vec<f64>, weight: f64) -> Result<Self> {
        let sum: f64 = s.iter().sum();
        if s.is_empty() || s.iter().any(|&x| x < 0.0) || (sum - 1.0).abs() > 1e-12 {
            return Err(invalid("point mass needs a conservative mass partition"));
        }
        if s[0] >= 1.0 {
            return Err(invalid("dislocation measures put no mass on (1, 0, ...)"));
        }
        let mut s = s;
        s.sort_by(|a, b| b.total_cmp(a));
        Ok(DislocationMeasure {
            kind: Kind::Atom { s, weight },
        })
    }

    pub fn with_reading(mut self, r: StableReading) -> Self {
        if let Kind::Stable { reading, .. } = &mut self.kind {
            *reading = r;
        }
        self
    }

    pub fn with_atoms(mut self, n: usize) -> Self {
        if let Kind::Stable { n_atoms, .. } = &mut self.kind {
            *n_atoms = n.max(2);
        }
        self
    }

    pub fn with_seed(mut self, s: u64) -> Self {
        if let Kind::Stable { seed, .. } = &mut self.kind {
            *seed = s;
        }
        self
    }

    pub fn name(&self) -> String {
        match &self.kind {
            Kind::Brownian => "nu-br".into(),
            Kind::Ford(a) => format!("nu-ford:alpha={a}"),
            Kind::Kary(k) => format!("nu-k:k={k}"),
            Kind::Stable { alpha, .. } => format!("nu-stable:alpha={alpha}"),
            Kind::Atom { s, weight } => format!("point-mass:{s:?}x{weight}"),
        }
    }

    /// Density in `x = s_1` for binary measures.
    pub fn binary_density(&self, x: f64) -> Option<f64> {
        let y = x * (1.0 - x);
        match self.kind {
            Kind::Brownian => Some(2f64.sqrt() / (std::f64::consts::PI.sqrt() * y.powf(1.5))),
            Kind::Ford(a) => {
                Some((a * y.powf(-a - 1.0) + (2.0 - 4.0 * a) * y.powf(-a)) / gamma(1.0 - a))
            }
            Kind::Kary(2) => self.simplex_density(&[x, 1.0 - x]),
            _ => None,
        }
    }

    /// Density of `ν_k` with respect to `ds_1 ... ds_{k−1}` on the ordered
    /// simplex.
    pub fn simplex_density(&self, s: &[f64]) -> Option<f64> {
        let Kind::Kary(k) = self.kind else { return None };
        if s.len() != k {
            return None;
        }
        let kf = k as f64;
        let ln_c = ln_gamma(kf) - kf.ln() - (kf - 1.0) * ln_gamma(1.0 / kf);
        let mut ln = ln_c;
        let mut harm = 0.0;
        for &x in s {
            ln -= (1.0 - 1.0 / kf) * x.ln();
            harm += 1.0 / (1.0 - x);
        }
        Some(ln.exp() * harm)
    }

    pub fn is_monte_carlo(&self) -> bool {
        matches!(self.kind, Kind::Stable { .. })
    }

    /// `∫ g(s) ν(ds)`; `g` must vanish fast enough near `(1, 0, ...)`.
    pub fn integral(&self, g: &dyn Fn(&[f64]) -> f64) -> Result<Estimate> {
        self.integral_with(Rule::Kronrod, g)
    }

    /// The same integral by an independent quadrature rule (or an independent
    /// Monte Carlo seed for the stable measure).
    pub fn integral_second_rule(&self, g: &dyn Fn(&[f64]) -> f64) -> Result<Estimate> {
        match &self.kind {
            Kind::Stable { .. } => {
                let alt = self.clone();
                let seed = match alt.kind {
                    Kind::Stable { seed, .. } => seed,
                    _ => unreachable!(),
                };
                alt.with_seed(seed ^ 0x9e37_79b9_7f4a_7c15).integral(g)
            }
            _ => self.integral_with(Rule::TanhSinh, g),
        }
    }

    /// `∫ (1 − s_1) f(s) ν(ds)`.
    pub fn h_integral(&self, f: &dyn Fn(&[f64]) -> f64) -> Result<Estimate> {
        self.integral(&|s| (1.0 - s[0]) * f(s))
    }

    /// `φ(λ) = ∫ Σ_i (1 − s_i^λ) s_i ν(ds)`.
    pub fn phi(&self, lambda: f64) -> Result<Estimate> {
        self.integral(&move |s| phi_integrand(s, lambda))
    }

    /// `φ(λ)` by the second rule.
    pub fn phi_second_rule(&self, lambda: f64) -> Result<Estimate> {
        self.integral_second_rule(&move |s| phi_integrand(s, lambda))
    }

    /// `∫ g dμ` for `μ(dx) = Σ_i s_i (1 − s_i) δ_{s_i}(dx)` integrated against `ν`.
    pub fn mu_integral(&self, g: &dyn Fn(f64) -> f64) -> Result<Estimate> {
        self.integral(&|s| s.iter().map(|&x| x * (1.0 - x) * g(x)).sum())
    }

    /// Monte Carlo `∫ g dν` for binary densities, sampling `x = 1 − v²/2`
    /// with `v` uniform so that the weights stay bounded.
    pub fn monte_carlo_integral(
        &self,
        g: &dyn Fn(&[f64]) -> f64,
        samples: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Estimate> {
        if self.binary_density(0.75).is_none() {
            return Err(invalid("Monte Carlo on the density needs a binary measure"));
        }
        if samples < 2 {
            return Err(invalid("Monte Carlo needs at least two samples"));
        }
        let xs: Vec<f64> = (0..samples)
            .map(|_| {
                let v: f64 = rng.random();
                let x = 1.0 - 0.5 * v * v;
                if x >= 1.0 {
                    return 0.0;
                }
                g(&[x, 1.0 - x]) * self.binary_density(x).unwrap() * v
            })
            .collect();
        let (mean, var) = crate::stats::mean_var(&xs);
        Ok(Estimate {
            value: mean,
            std_error: (var / samples as f64).sqrt(),
            exact: false,
        })
    }

    fn integral_with(&self, rule: Rule, g: &dyn Fn(&[f64]) -> f64) -> Result<Estimate> {
        match &self.kind {
            Kind::Atom { s, weight } => Ok(exact(weight * g(s))),
            Kind::Brownian | Kind::Ford(_) | Kind::Kary(2) => {
                let h = |x: f64| {
                    if x <= 0.5 || x >= 1.0 {
                        return 0.0;
                    }
                    g(&[x, 1.0 - x]) * self.binary_density(x).unwrap()
                };
                let r = match rule {
                    // x = 1 − v²/2 removes the square-root endpoint behaviour.
                    Rule::Kronrod => adaptive_gk(
                        |v| v * h(1.0 - 0.5 * v * v),
                        0.0,
                        1.0,
                        ABS_TOL,
                        REL_TOL,
                    )?,
                    Rule::TanhSinh => double_exponential(h, 0.5, 1.0, ABS_TOL)?,
                };
                check_finite(r.value, r.error)
            }
            Kind::Kary(k) => {
                let k = *k;
                let failure: RefCell<Option<Error>> = RefCell::new(None);
                let mut prefix = Vec::with_capacity(k);
                let v = nested(self, k, rule, g, &mut prefix, 1.0, f64::INFINITY, &failure);
                if let Some(e) = failure.into_inner() {
                    return Err(e);
                }
                check_finite(v, (v.abs() * NESTED_REL_TOL * 10.0).max(ABS_TOL))
            }
            Kind::Stable {
                alpha,
                reading,
                n_atoms,
                n_samples,
                seed,
            } => Ok(stable_integral(*alpha, *reading, *n_atoms, *n_samples, *seed, g)),
        }
    }

    /// Expected mass below the smallest simulated atom for the stable
    /// measure, `c ε^{1−1/α} / (1 − 1/α)` at the typical cutoff `ε`.
    pub fn neglected_mass(&self) -> Option<f64> {
        let Kind::Stable { alpha, n_atoms, .. } = self.kind else {
            return None;
        };
        let c = stable_c(alpha);
        let eps = (n_atoms as f64 / (c * alpha)).powf(-alpha);
        let a = 1.0 - 1.0 / alpha;
        Some(c * eps.powf(a) / a)
    }
}

fn phi_integrand(s: &[f64], lambda: f64) -> f64 {
    s.iter().map(|&x| if x > 0.0 { (1.0 - x.powf(lambda)) * x } else { 0.0 }).sum()
}

fn exact(value: f64) -> Estimate {
    Estimate {
        value,
        std_error: 0.0,
        exact: true,
    }
}

fn check_finite(value: f64, error: f64) -> Result<Estimate> {
    if !value.is_finite() {
        return Err(Error::Quadrature(format!("integral diverged ({value})")));
    }
    Ok(Estimate {
        value,
        std_error: error,
        exact: true,
    })
}

/// Integrates over `s_j ∈ [rem/(k−j), min(prev, rem)]` for the next free
/// coordinate, the last coordinate being the remainder.
#[allow(clippy::too_many_arguments)]
fn nested(
    nu: &DislocationMeasure,
    k: usize,
    rule: Rule,
    g: &dyn Fn(&[f64]) -> f64,
    prefix: &mut Vec<f64>,
    rem: f64,
    prev: f64,
    failure: &RefCell<Option<Error>>,
) -> f64 {
    let slots = k - prefix.len();
    if slots == 1 {
        if rem > prev || rem <= 0.0 {
            return 0.0;
        }
        prefix.push(rem);
        let v = g(prefix) * nu.simplex_density(prefix).unwrap();
        prefix.pop();
        return if v.is_finite() { v } else { 0.0 };
    }
    let lo = rem / slots as f64;
    let hi = prev.min(rem).min(1.0);
    if hi <= lo {
        return 0.0;
    }
    let cell = RefCell::new(std::mem::take(prefix));
    let inner = |x: f64| {
        if failure.borrow().is_some() {
            return 0.0;
        }
        let mut p = cell.borrow_mut();
        p.push(x);
        let v = nested(nu, k, rule, g, &mut p, rem - x, x, failure);
        p.pop();
        v
    };
    // The next level's upper limit min(x, rem − x) kinks at x = rem/2.
    let mid = 0.5 * rem;
    let pieces: &[(f64, f64)] = if lo < mid && mid < hi {
        &[(lo, mid), (mid, hi)]
    } else {
        &[(lo, hi)]
    };
    let mut total = 0.0;
    for &(a, b) in pieces {
        let r = match rule {
            Rule::Kronrod => adaptive_gk(&inner, a, b, ABS_TOL, NESTED_REL_TOL),
            Rule::TanhSinh => double_exponential(&inner, a, b, ABS_TOL),
        };
        match r {
            Ok(i) => total += i.value,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
            }
        }
    }
    *prefix = cell.into_inner();
    total
}

/// `(α Γ(1 − 1/α))^{−1}`.
fn stable_c(alpha: f64) -> f64 {
    1.0 / (alpha * gamma(1.0 - 1.0 / alpha))
}

fn stable_integral(
    alpha: f64,
    reading: StableReading,
    n_atoms: usize,
    n_samples: usize,
    seed: u64,
    g: &dyn Fn(&[f64]) -> f64,
) -> Estimate {
    let c = stable_c(alpha);
    let c_alpha = alpha * (alpha - 1.0) * gamma(1.0 - 1.0 / alpha) / gamma(2.0 - alpha);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n_samples);
    let mut atoms = vec![0.0; n_atoms];
    let mut pieces = Vec::with_capacity(n_atoms);
    for _ in 0..n_samples {
        // Atoms in decreasing order: N(r, ∞) = cα r^{−1/α} evaluated at
        // the arrival times of a unit Poisson process.
        let mut t = 0.0;
        for a in atoms.iter_mut() {
            let e: f64 = Exp1.sample(&mut rng);
            t += e;
            *a = (t / (c * alpha)).powf(-alpha);
        }
        pieces.clear();
        match reading {
            StableReading::Gaps => pieces.extend(atoms.windows(2).map(|w| w[0] - w[1])),
            StableReading::Jumps => pieces.extend_from_slice(&atoms),
        }
        pieces.sort_by(|a, b| b.total_cmp(a));
        let t1: f64 = pieces.iter().sum();
        let s: Vec<f64> = pieces.iter().map(|x| x / t1).collect();
        xs.push(c_alpha * t1 * g(&s));
    }
    let (mean, var) = crate::stats::mean_var(&xs);
    Estimate {
        value: mean,
        std_error: (var / n_samples as f64).sqrt(),
        exact: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn brownian_dual_quadrature() {
        let nu = DislocationMeasure::nu_br();
        let a = nu.h_integral(&|_| 1.0).unwrap().value;
        let b = nu
            .integral_second_rule(&|s| 1.0 - s[0])
            .unwrap()
            .value;
        assert!(rel(a, b) < 1e-6, "{a} vs {b}");
        // ∫_{1/2}^1 √2/√π (x(1−x))^{−3/2}(1−x) dx = 2√2/√π.
        let closed = 2.0 * 2f64.sqrt() / std::f64::consts::PI.sqrt();
        assert!(rel(a, closed) < 1e-8, "{a} vs {closed}");
        let p1 = nu.phi(1.0).unwrap().value;
        let p2 = nu.phi_second_rule(1.0).unwrap().value;
        assert!(rel(p1, p2) < 1e-6);
    }

    #[test]
    fn kary_two_is_ford_half() {
        let k2 = DislocationMeasure::nu_k(2).unwrap();
        let f = DislocationMeasure::nu_ford(0.5).unwrap();
        let br = DislocationMeasure::nu_br();
        for i in 1..100 {
            let x = 0.5 + 0.005 * i as f64;
            let a = k2.binary_density(x).unwrap();
            let b = f.binary_density(x).unwrap();
            assert!(rel(a, b) < 1e-9);
            assert!(rel(br.binary_density(x).unwrap(), 2.0 * 2f64.sqrt() * b) < 1e-12);
        }
    }

    #[test]
    fn ford_phi_two_ways() {
        let nu = DislocationMeasure::nu_ford(0.5).unwrap();
        let q = nu.phi(1.0).unwrap().value;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mc = nu
            .monte_carlo_integral(&|s| phi_integrand(s, 1.0), 1_000_000, &mut rng)
            .unwrap();
        assert!((mc.value - q).abs() < 1e-3 * q.max(1.0), "{} vs {q}", mc.value);
    }

    #[test]
    fn point_mass_phi() {
        let nu = DislocationMeasure::point_mass(vec![0.5, 0.5], 1.0).unwrap();
        for l in [0.5, 1.0, 2.0, 3.0] {
            let v = nu.phi(l).unwrap().value;
            assert!((v - (1.0 - 2f64.powf(-l))).abs() < 1e-15);
        }
        assert_eq!(nu.phi(0.0).unwrap().value, 0.0);
        assert!(DislocationMeasure::point_mass(vec![1.0], 1.0).is_err());
    }

    #[test]
    fn phi_concave_increasing() {
        for nu in [
            DislocationMeasure::nu_br(),
            DislocationMeasure::nu_ford(0.3).unwrap(),
        ] {
            let vals: Vec<f64> = (0..=12).map(|i| nu.phi(0.25 * i as f64).unwrap().value).collect();
            assert!(vals[0].abs() < 1e-12);
            for w in vals.windows(3) {
                assert!(w[1] > w[0] && w[2] > w[1]);
                assert!(w[1] - w[0] >= w[2] - w[1] - 1e-9);
            }
        }
    }

    #[test]
    fn kary_three_dual_rules() {
        let nu = DislocationMeasure::nu_k(3).unwrap();
        let a = nu.h_integral(&|_| 1.0).unwrap().value;
        let b = nu.integral_second_rule(&|s| 1.0 - s[0]).unwrap().value;
        assert!(a.is_finite() && a > 0.0);
        assert!(rel(a, b) < 1e-5, "{a} vs {b}");
    }

    #[test]
    fn stable_is_finite() {
        let nu = DislocationMeasure::nu_stable(1.5, 200).unwrap().with_atoms(500);
        let e = nu.h_integral(&|_| 1.0).unwrap();
        assert!(e.value.is_finite() && e.value > 0.0 && !e.exact);
        assert!(nu.neglected_mass().unwrap() > 0.0);
        let j = nu.clone().with_reading(StableReading::Jumps);
        assert!(j.h_integral(&|_| 1.0).unwrap().value > 0.0);
    }
}
