//! The non-increasing chain of leaf counts along the path to a marked leaf,
//! its absorption time, and the Laplace exponent of the limiting
//! subordinator.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Geometric};
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::quad::adaptive_gk;
use crate::splitting::{self, DislocationMeasure, Estimate, Family, Indexing, SplittingFamily};

/// Sizes up to which transition laws are computed exactly.
pub const EXACT_TRANSITION_MAX: usize = 1000;

/// Step cap for a single chain run.
pub const STEP_CAP: u64 = 1_000_000_000;

/// The marked-leaf chain of a leaves-indexed family, with scaling exponent
/// `γ`.
#[derive(Clone)]
pub struct LeafChain {
    family: Family,
    gamma: f64,
}

impl fmt::Debug for LeafChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LeafChain")
            .field("family", &self.family.name())
            .field("gamma", &self.gamma)
            .finish()
    }
}

impl LeafChain {
    pub fn new(family: Family, gamma: f64) -> Result<Self> {
        if family.indexing() != Indexing::Leaves {
            return Err(invalid(format!("{} is indexed by vertices", family.name())));
        }
        if !(gamma > 0.0) {
            return Err(invalid(format!("scaling exponent must be positive, got {gamma}")));
        }
        Ok(LeafChain { family, gamma })
    }

    pub fn family(&self) -> &dyn SplittingFamily {
        self.family.as_ref()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `p(i, j)` for `j = 0..=i`: `Σ_λ q_i(λ) m_j(λ) j / i`, and
    /// `p(1, 0) = q_1(∅)`.
    pub fn transition_pmf(&self, i: usize) -> Result<Vec<f64>> {
        if i == 0 {
            return Ok(vec![1.0]);
        }
        if i == 1 {
            let d = self.family.cemetery_prob();
            return Ok(vec![d, 1.0 - d]);
        }
        if i > EXACT_TRANSITION_MAX {
            return Err(Error::SizeCap {
                what: "exact transition law",
                size: i,
                limit: EXACT_TRANSITION_MAX,
            });
        }
        let entries = match self.family.cheap_support(i) {
            Some(s) => s,
            None => splitting::support(self.family.as_ref(), i)?,
        };
        let mut p = vec![0.0; i + 1];
        for (lambda, q) in entries {
            for (j, m) in lambda.multiplicities() {
                p[j] += q * (m * j) as f64 / i as f64;
            }
        }
        Ok(p)
    }

    /// One step from `i`: draw `λ ~ q_i`, then a part with probability
    /// proportional to its size.
    pub fn size_biased_step(&self, i: usize, rng: &mut dyn RngCore) -> Result<usize> {
        match i {
            0 => Ok(0),
            1 => Ok((rng.random::<f64>() >= self.family.cemetery_prob()) as usize),
            _ => Ok(pick_part(&splitting::sample(self.family.as_ref(), i, rng)?, rng)),
        }
    }

    /// Jump times and values: `(k, X(k))` at `k = 0` and after each change,
    /// ending at the first visit to 0.
    pub fn jumps(&self, n: usize, rng: &mut dyn RngCore) -> Result<Vec<(u64, usize)>> {
        if n == 0 {
            return Err(invalid("the chain starts from n ≥ 1"));
        }
        let mut out = vec![(0u64, n)];
        let (mut k, mut x) = (0u64, n);
        while x > 0 {
            let (stay, next) = if x == 1 {
                (1.0 - self.family.cemetery_prob(), 0)
            } else {
                let s = self.family.stay_prob(x);
                if s >= 1.0 {
                    return Err(invalid(format!("{} never leaves {x}", self.family.name())));
                }
                let lambda = if s > 0.0 {
                    splitting::sample_nontrivial(self.family.as_ref(), x, rng)?
                } else {
                    splitting::sample(self.family.as_ref(), x, rng)?
                };
                (s, pick_part(&lambda, rng))
            };
            k += dwell(stay, rng)? + 1;
            if k > STEP_CAP {
                return Err(Error::ResourceCap(format!("chain exceeded {STEP_CAP} steps")));
            }
            x = next;
            out.push((k, x));
        }
        Ok(out)
    }

    /// `A_n`, the first time the chain started at `n` hits 0.
    pub fn absorption_time(&self, n: usize, rng: &mut dyn RngCore) -> Result<u64> {
        Ok(self.jumps(n, rng)?.last().unwrap().0)
    }

    /// `X_n(⌊n^γ t⌋) / n` on the grid `t`.
    pub fn rescaled_path(&self, n: usize, t_grid: &[f64], rng: &mut dyn RngCore) -> Result<Vec<f64>> {
        let jumps = self.jumps(n, rng)?;
        let scale = (n as f64).powf(self.gamma);
        Ok(t_grid
            .iter()
            .map(|&t| {
                let k = (scale * t).floor() as u64;
                let idx = jumps.partition_point(|&(s, _)| s <= k) - 1;
                jumps[idx].1 as f64 / n as f64
            })
            .collect())
    }

    /// `n^γ Σ_k p(n, k)(1 − k/n) g(k/n)`, exactly when the transition law
    /// is available, otherwise from `mc_samples` steps.
    pub fn hprime_functional(
        &self,
        n: usize,
        g: &dyn Fn(f64) -> f64,
        mc_samples: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Estimate> {
        let scale = (n as f64).powf(self.gamma);
        let nf = n as f64;
        let term = |k: usize| (1.0 - k as f64 / nf) * g(k as f64 / nf);
        let exact = if n <= EXACT_TRANSITION_MAX && (n <= 60 || self.family.cheap_support(n).is_some()) {
            Some(self.transition_pmf(n)?)
        } else {
            None
        };
        if let Some(p) = exact {
            let v: f64 = p.iter().enumerate().map(|(k, pk)| pk * term(k)).sum();
            return Ok(Estimate {
                value: v * scale,
                std_error: 0.0,
                exact: true,
            });
        }
        if mc_samples < 2 {
            return Err(invalid("Monte Carlo evaluation needs at least two samples"));
        }
        let mut xs = Vec::with_capacity(mc_samples);
        for _ in 0..mc_samples {
            xs.push(term(self.size_biased_step(n, rng)?) * scale);
        }
        let (mean, var) = crate::stats::mean_var(&xs);
        Ok(Estimate {
            value: mean,
            std_error: (var / mc_samples as f64).sqrt(),
            exact: false,
        })
    }
}

fn pick_part(lambda: &splitting::IntPartition, rng: &mut dyn RngCore) -> usize {
    let mut u = rng.random_range(0..lambda.n());
    for &part in lambda.parts() {
        if u < part {
            return part;
        }
        u -= part;
    }
    unreachable!("parts sum to n")
}

/// Extra steps spent at the current value before leaving it.
fn dwell(stay: f64, rng: &mut dyn RngCore) -> Result<u64> {
    if stay <= 0.0 {
        return Ok(0);
    }
    let g = Geometric::new(1.0 - stay).map_err(|e| invalid(format!("dwell: {e}")))?;
    Ok(g.sample(rng))
}

/// A finite measure on `[0, 1]`: atoms plus an optional density on `(0, 1)`.
#[derive(Clone, Default)]
pub struct FiniteMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub density: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl fmt::Debug for FiniteMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteMeasure")
            .field("atoms", &self.atoms)
            .field("density", &self.density.is_some())
            .finish()
    }
}

type PhiFn = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// Law of `∫_0^∞ exp(−γ ξ_r) dr` for a subordinator `ξ` with Laplace
/// exponent `φ`.
#[derive(Clone)]
pub struct LimitLaw {
    phi: PhiFn,
    gamma: f64,
}

impl fmt::Debug for LimitLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LimitLaw").field("gamma", &self.gamma).finish()
    }
}

impl LimitLaw {
    pub fn new(phi: impl Fn(f64) -> Result<f64> + Send + Sync + 'static, gamma: f64) -> Self {
        LimitLaw {
            phi: Arc::new(phi),
            gamma,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn phi(&self, lambda: f64) -> Result<f64> {
        (self.phi)(lambda)
    }

    /// `E[I^k] = k! / Π_{j=1}^k φ(jγ)`.
    pub fn moment(&self, k: usize) -> Result<f64> {
        let mut m = 1.0;
        for j in 1..=k {
            let p = self.phi(j as f64 * self.gamma)?;
            if !(p > 0.0) {
                return Err(invalid(format!("φ({}) = {p} is not positive", j as f64 * self.gamma)));
            }
            m *= j as f64 / p;
        }
        Ok(m)
    }

    pub fn moments(&self, k_max: usize) -> Result<Vec<f64>> {
        (1..=k_max).map(|k| self.moment(k)).collect()
    }
}

/// `φ(λ) = ∫ Σ_i (1 − s_i^λ) s_i ν(ds)`.
pub fn phi_from_nu(nu: DislocationMeasure, gamma: f64) -> LimitLaw {
    LimitLaw::new(move |l| Ok(nu.phi(l)?.value), gamma)
}

/// `φ(λ) = μ({0}) + μ({1}) λ + ∫_{(0,1)} (1 − x^λ) μ(dx) / (1 − x)`.
pub fn phi_from_mu(mu: FiniteMeasure, gamma: f64) -> LimitLaw {
    LimitLaw::new(
        move |l| {
            let mut v = 0.0;
            for &(x, w) in &mu.atoms {
                v += if x <= 0.0 {
                    w
                } else if x >= 1.0 {
                    w * l
                } else {
                    w * (1.0 - x.powf(l)) / (1.0 - x)
                };
            }
            if let Some(d) = &mu.density {
                let r = adaptive_gk(
                    |x| {
                        if x <= 0.0 || x >= 1.0 {
                            0.0
                        } else {
                            (1.0 - x.powf(l)) / (1.0 - x) * d(x)
                        }
                    },
                    0.0,
                    1.0,
                    1e-12,
                    1e-10,
                )?;
                v += r.value;
            }
            Ok(v)
        },
        gamma,
    )
}

/// Empirical against theoretical moment of order `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub k: usize,
    pub empirical: f64,
    pub theoretical: f64,
    pub rel_error: f64,
}

/// Compares raw moments of `sample` with those of `law` for `k ≤ k_max`.
pub fn moment_compare(sample: &[f64], law: &LimitLaw, k_max: usize) -> Result<Vec<MomentRow>> {
    if sample.is_empty() {
        return Err(invalid("moment comparison needs a non-empty sample"));
    }
    let emp = crate::stats::raw_moments(sample, k_max);
    let theo = law.moments(k_max)?;
    Ok((1..=k_max)
        .map(|k| MomentRow {
            k,
            empirical: emp[k - 1],
            theoretical: theo[k - 1],
            rel_error: (emp[k - 1] - theo[k - 1]).abs() / theo[k - 1],
        })
        .collect())
}
