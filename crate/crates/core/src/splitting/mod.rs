//! Splitting distributions of Markov-branching trees, their limiting
//! dislocation measures, and the functionals comparing the two.

mod dislocation;
mod families;
mod partition;

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::{Rng, RngCore};

use crate::error::{Error, Result};

pub use dislocation::{DislocationMeasure, StableReading};
pub use families::{
    BasicFamily, CutCayleyFamily, CutRecursiveFamily, FordFamily, GwLeavesFamily,
    GwVerticesFamily, HalvingFamily, KaryFamily, MarchalFamily, RemyFamily,
};
pub use partition::{partitions_of, IntPartition, Partitions, PARTITIONS_MAX};
pub(crate) use partition::partitions_k_parts_congruent;

/// Sizes at or below which sampling goes through a cached support table.
pub const TABLE_MAX: usize = 40;

/// Whether `q_n` distributes leaves or `p_n` distributes vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Indexing {
    Leaves,
    Vertices,
}

/// A family `(q_n)` (leaves) or `(p_n)` (vertices) of laws on partitions.
pub trait SplittingFamily: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    fn indexing(&self) -> Indexing;

    /// Whether the law at size `n` is defined.
    fn admits(&self, n: usize) -> bool {
        n >= 1
    }

    /// Probability of `λ` under the law at size `λ.n()`. For
    /// leaves-indexed families at `n = 1` the cemetery is a valid argument.
    fn pmf(&self, lambda: &IntPartition) -> f64;

    /// All partitions of positive mass with their probabilities, when the
    /// support is small enough to list at any size.
    fn cheap_support(&self, _n: usize) -> Option<Vec<(IntPartition, f64)>> {
        None
    }

    /// Direct sampler for sizes where listing the support is too costly.
    fn sample_native(&self, _n: usize, _rng: &mut dyn RngCore) -> Option<Result<IntPartition>> {
        None
    }

    /// Memo of support tables for small sizes.
    fn cache(&self) -> &SupportCache;

    /// `q_1(∅)` for leaves-indexed families.
    fn cemetery_prob(&self) -> f64 {
        match self.indexing() {
            Indexing::Leaves => self.pmf(&IntPartition::cemetery()),
            Indexing::Vertices => 0.0,
        }
    }

    /// Probability of the trivial partition `(n)`.
    fn stay_prob(&self, n: usize) -> f64 {
        if n == 1 && self.indexing() == Indexing::Leaves {
            return 1.0 - self.cemetery_prob();
        }
        self.pmf(&IntPartition::whole(n))
    }
}

/// Shared family handle.
pub type Family = Arc<dyn SplittingFamily>;

type Table = Arc<Vec<(IntPartition, f64)>>;

#[derive(Default)]
pub struct SupportCache {
    tables: Mutex<HashMap<usize, Table>>,
}

impl fmt::Debug for SupportCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SupportCache")
    }
}

impl Clone for SupportCache {
    fn clone(&self) -> Self {
        SupportCache::default()
    }
}

fn check_admits(family: &dyn SplittingFamily, n: usize) -> Result<()> {
    if !family.admits(n) {
        return Err(Error::InvalidArgument(format!(
            "{} has no splitting law at size {n}",
            family.name()
        )));
    }
    Ok(())
}

/// Partitions of positive mass at size `n` with their probabilities, from
/// the cheap support or by exhaustive enumeration (`n ≤ 60`).
pub fn support(family: &dyn SplittingFamily, n: usize) -> Result<Vec<(IntPartition, f64)>> {
    check_admits(family, n)?;
    if let Some(s) = family.cheap_support(n) {
        return Ok(s);
    }
    let mut out: Vec<(IntPartition, f64)> = Vec::new();
    if n == 1 && family.indexing() == Indexing::Leaves {
        let c = family.cemetery_prob();
        if c > 0.0 {
            out.push((IntPartition::cemetery(), c));
        }
    }
    for lambda in partitions_of(n)? {
        let p = family.pmf(&lambda);
        if p > 0.0 {
            out.push((lambda, p));
        }
    }
    Ok(out)
}

fn table(family: &dyn SplittingFamily, n: usize) -> Result<Table> {
    if let Some(t) = family.cache().tables.lock().unwrap().get(&n) {
        return Ok(t.clone());
    }
    let t = Arc::new(support(family, n)?);
    family.cache().tables.lock().unwrap().insert(n, t.clone());
    Ok(t)
}

fn draw_from(entries: &[(IntPartition, f64)], rng: &mut dyn RngCore) -> IntPartition {
    let total: f64 = entries.iter().map(|e| e.1).sum();
    let mut u = rng.random::<f64>() * total;
    for (lambda, p) in entries {
        if u < *p {
            return lambda.clone();
        }
        u -= p;
    }
    entries.last().expect("non-empty support").0.clone()
}

/// Draws from the law at size `n`.
pub fn sample(family: &dyn SplittingFamily, n: usize, rng: &mut dyn RngCore) -> Result<IntPartition> {
    check_admits(family, n)?;
    if n == 1 {
        return Ok(match family.indexing() {
            Indexing::Vertices => IntPartition::whole(1),
            Indexing::Leaves if rng.random::<f64>() < family.cemetery_prob() => {
                IntPartition::cemetery()
            }
            Indexing::Leaves => IntPartition::whole(1),
        });
    }
    if n <= TABLE_MAX {
        return Ok(draw_from(&table(family, n)?, rng));
    }
    if let Some(draw) = family.sample_native(n, rng) {
        return draw;
    }
    if let Some(s) = family.cheap_support(n) {
        return Ok(draw_from(&s, rng));
    }
    if n <= PARTITIONS_MAX {
        return Ok(draw_from(&table(family, n)?, rng));
    }
    Err(Error::ResourceCap(format!(
        "{} has no sampler for size {n}",
        family.name()
    )))
}

/// Draws from the law at size `n ≥ 2` conditioned on `λ ≠ (n)`.
pub fn sample_nontrivial(
    family: &dyn SplittingFamily,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<IntPartition> {
    let stay = family.stay_prob(n);
    if stay >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "{} never splits at size {n}",
            family.name()
        )));
    }
    if stay > 0.5 {
        let entries = if n <= TABLE_MAX {
            (*table(family, n)?).clone()
        } else if let Some(s) = family.cheap_support(n) {
            s
        } else if n <= PARTITIONS_MAX {
            (*table(family, n)?).clone()
        } else {
            Vec::new()
        };
        let entries: Vec<_> = entries.into_iter().filter(|e| !e.0.is_trivial()).collect();
        if !entries.is_empty() {
            return Ok(draw_from(&entries, rng));
        }
    }
    loop {
        let lambda = sample(family, n, rng)?;
        if !lambda.is_trivial() {
            return Ok(lambda);
        }
    }
}

/// Monte Carlo or exact value with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub exact: bool,
}

/// Size up to which functionals are evaluated by exhaustive enumeration.
pub const FUNCTIONAL_EXACT_MAX: usize = 40;

/// `n^γ Σ_λ q_n(λ)(1 − λ_1/n) f(λ/n)`, exactly when the support can be
/// listed, otherwise by averaging over `mc_samples` draws.
pub fn hypothesis_h_functional(
    family: &dyn SplittingFamily,
    n: usize,
    f: &dyn Fn(&[f64]) -> f64,
    gamma: f64,
    mc_samples: usize,
    rng: &mut dyn RngCore,
) -> Result<Estimate> {
    check_admits(family, n)?;
    let scale = (n as f64).powf(gamma);
    let term = |lambda: &IntPartition| {
        if lambda.is_cemetery() {
            return 0.0;
        }
        let s = lambda.masses();
        (1.0 - s[0]) * f(&s)
    };
    let listed = match family.cheap_support(n) {
        Some(s) => Some(s),
        None if n <= FUNCTIONAL_EXACT_MAX => Some(support(family, n)?),
        None => None,
    };
    if let Some(entries) = listed {
        let value = entries.iter().map(|(l, p)| p * term(l)).sum::<f64>() * scale;
        return Ok(Estimate {
            value,
            std_error: 0.0,
            exact: true,
        });
    }
    if mc_samples < 2 {
        return Err(Error::InvalidArgument(
            "Monte Carlo evaluation needs at least two samples".into(),
        ));
    }
    let mut xs = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples {
        xs.push(term(&sample(family, n, rng)?) * scale);
    }
    let (mean, var) = crate::stats::mean_var(&xs);
    Ok(Estimate {
        value: mean,
        std_error: (var / mc_samples as f64).sqrt(),
        exact: false,
    })
}

fn parse_params(spec: &str) -> Result<(String, HashMap<String, String>)> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params = HashMap::new();
    for kv in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::FamilySpec(format!("expected key=value, got {kv:?}")))?;
        params.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok((name.trim().to_string(), params))
}

fn take_f64(params: &mut HashMap<String, String>, key: &str, default: Option<f64>) -> Result<f64> {
    match params.remove(key) {
        Some(v) => v
            .parse()
            .map_err(|_| Error::FamilySpec(format!("{key}: not a number: {v:?}"))),
        None => default.ok_or_else(|| Error::FamilySpec(format!("missing parameter {key}"))),
    }
}

/// Parses a family spec such as `ford:alpha=0.4`, `basic:alpha=1`,
/// `halving`, `remy`, `kary:k=3`, `marchal:beta=1.5`,
/// `gw-leaves:offspring=binary`, `gw-vertices:offspring=poisson1`,
/// `cut-cayley` or `cut-recursive`.
pub fn parse_family(spec: &str) -> Result<Family> {
    let (name, mut params) = parse_params(spec)?;
    let family: Family = match name.as_str() {
        "basic" => Arc::new(BasicFamily::new(take_f64(&mut params, "alpha", None)?)?),
        "halving" => Arc::new(HalvingFamily::new()),
        "ford" => Arc::new(FordFamily::new(take_f64(&mut params, "alpha", None)?)?),
        "remy" => Arc::new(RemyFamily::new()),
        "kary" => {
            let k = take_f64(&mut params, "k", None)?;
            if k.fract() != 0.0 || k < 2.0 {
                return Err(Error::FamilySpec(format!("k must be an integer ≥ 2, got {k}")));
            }
            Arc::new(KaryFamily::new(k as usize)?)
        }
        "marchal" => Arc::new(MarchalFamily::new(take_f64(&mut params, "beta", None)?)?),
        "gw-leaves" | "gw-vertices" => {
            let off = params
                .remove("offspring")
                .ok_or_else(|| Error::FamilySpec("missing parameter offspring".into()))?;
            // Offspring parameters (stable tail) ride along after the name.
            let rest: Vec<String> = params.drain().map(|(k, v)| format!("{k}={v}")).collect();
            let off = if rest.is_empty() {
                off
            } else {
                let mut rest = rest;
                rest.sort();
                format!("{off}:{}", rest.join(","))
            };
            let law = crate::gw::OffspringLaw::builtin(&off)?;
            if name == "gw-leaves" {
                Arc::new(GwLeavesFamily::new(law))
            } else {
                Arc::new(GwVerticesFamily::new(law))
            }
        }
        "cut-cayley" => Arc::new(CutCayleyFamily::new()),
        "cut-recursive" => Arc::new(CutRecursiveFamily::new()),
        other => return Err(Error::FamilySpec(format!("unknown family {other:?}"))),
    };
    if let Some(k) = params.keys().next() {
        return Err(Error::FamilySpec(format!("unknown parameter {k:?} for {name}")));
    }
    Ok(family)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn parse_specs() {
        assert_eq!(parse_family("ford:alpha=0.4").unwrap().name(), "ford:alpha=0.4");
        assert_eq!(
            parse_family("gw-vertices:offspring=poisson1").unwrap().indexing(),
            Indexing::Vertices
        );
        assert!(matches!(parse_family("ford"), Err(Error::FamilySpec(_))));
        assert!(matches!(parse_family("tree:x=1"), Err(Error::FamilySpec(_))));
        assert!(matches!(parse_family("ford:alpha=0.4,beta=1"), Err(Error::FamilySpec(_))));
        assert!(parse_family("ford:alpha=1.5").is_err());
        parse_family("gw-leaves:offspring=stable,alpha=1.5,kappa=0.1").unwrap();
    }

    #[test]
    fn basic_functional_is_one_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let basic = BasicFamily::new(1.0).unwrap();
        for n in [2usize, 10, 1000, 1 << 20] {
            let e = hypothesis_h_functional(&basic, n, &|_| 1.0, 1.0, 0, &mut rng).unwrap();
            assert!(e.exact);
            assert!((e.value - 0.5).abs() < 1e-12, "n = {n}: {}", e.value);
        }
    }

    #[test]
    fn nontrivial_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basic = BasicFamily::new(1.0).unwrap();
        for _ in 0..100 {
            let l = sample_nontrivial(&basic, 1000, &mut rng).unwrap();
            assert_eq!(l.parts(), &[500, 500]);
        }
    }
}
