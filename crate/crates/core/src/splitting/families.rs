use std::sync::RwLock;

use rand::{Rng, RngCore};
use statrs::function::gamma::ln_gamma;

use super::{partitions_k_parts_congruent, Indexing, IntPartition, SplittingFamily, SupportCache};
use crate::error::{invalid, Error, Result};
use crate::gw::{self, OffspringLaw};

fn ln_factorial(n: usize) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// `(k, n − k)` when `λ` is a binary partition of `n ≥ 2`.
fn binary_parts(lambda: &IntPartition) -> Option<(usize, usize)> {
    match lambda.parts() {
        [k, j] => Some((*k, *j)),
        _ => None,
    }
}

/// Binary support `(k, n − k)`, `k` from `n − 1` down to `⌈n/2⌉`.
fn binary_support(n: usize, pmf: impl Fn(usize) -> f64) -> Vec<(IntPartition, f64)> {
    (n.div_ceil(2)..n)
        .rev()
        .map(|k| (IntPartition::binary(n, k), pmf(k)))
        .filter(|e| e.1 > 0.0)
        .collect()
}

/// Inverse-CDF draw of `k` scanning from `n − 1` downwards; the scan is
/// short when mass sits on unbalanced splits.
fn binary_scan(n: usize, pmf: impl Fn(usize) -> f64, rng: &mut dyn RngCore) -> IntPartition {
    let mut u: f64 = rng.random();
    let lo = n.div_ceil(2);
    let mut last = n - 1;
    for k in (lo..n).rev() {
        let p = pmf(k);
        if p > 0.0 {
            last = k;
        }
        if u < p {
            return IntPartition::binary(n, k);
        }
        u -= p;
    }
    IntPartition::binary(n, last)
}

fn halves(n: usize) -> IntPartition {
    IntPartition::binary(n, n.div_ceil(2))
}

/// `q_n((n)) = 1 − n^{−α}`, `q_n((⌈n/2⌉, ⌊n/2⌋)) = n^{−α}`.
#[derive(Clone, Debug)]
pub struct BasicFamily {
    alpha: f64,
    cache: SupportCache,
}

impl BasicFamily {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(invalid(format!("basic family needs α > 0, got {alpha}")));
        }
        Ok(BasicFamily {
            alpha,
            cache: SupportCache::default(),
        })
    }
}

impl SplittingFamily for BasicFamily {
    fn name(&self) -> String {
        format!("basic:alpha={}", self.alpha)
    }
    fn indexing(&self) -> Indexing {
        Indexing::Leaves
    }
    fn pmf(&self, lambda: &IntPartition) -> f64 {
        let n = lambda.n();
        if n == 1 {
            return lambda.is_cemetery() as u8 as f64;
        }
        let split = (n as f64).powf(-self.alpha);
        if lambda.is_trivial() {
            1.0 - split
        } else if *lambda == halves(n) {
            split
        } else {
            0.0
        }
    }
    fn cheap_support(&self, n: usize) -> Option<Vec<(IntPartition, f64)>> {
        if n == 1 {
            return Some(vec![(IntPartition::cemetery(), 1.0)]);
        }
        let split = (n as f64).powf(-self.alpha);
        Some(vec![(IntPartition::whole(n), 1.0 - split), (halves(n), split)])
    }
    fn cache(&self) -> &SupportCache {
        &self.cache
    }
}

/// `q_n((⌈n/2⌉, ⌊n/2⌋)) = 1`.
#[derive(Clone, Debug, Default)]
pub struct HalvingFamily {
    cache: SupportCache,
}

impl HalvingFamily {
    pub fn new() -> Self {
        Self::default()
    }
}

impl SplittingFamily for HalvingFamily {
    fn name(&self) -> String {
        "halving".into()
    }
    fn indexing(&self) -> Indexing {
        Indexing::Leaves
    }
    fn pmf(&self, lambda: &IntPartition) -> f64 {
        let n = lambda.n();
        let hit = if n == 1 {
            lambda.is_cemetery()
        } else {
            *lambda == halves(n)
        };
        hit as u8 as f64
    }
    fn cheap_support(&self, n: usize) -> Option<Vec<(IntPartition, f64)>> {
        Some(vec![(
            if n == 1 { IntPartition::cemetery() } else { halves(n) },
            1.0,
        )])
    }
    fn cache(&self) -> &SupportCache {
        &self.cache
    }
}

/// Root splits of Ford's α-model.
#[derive(Clone, Debug)]
pub struct FordFamily {
    alpha: f64,
    cache: SupportCache,
}

impl FordFamily {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("Ford family needs α in (0, 1), got {alpha}")));
        }
        Ok(FordFamily {
            alpha,
            cache: SupportCache::default(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `q_n((k, n − k))` for `k ≥ n/2`.
    pub fn split_prob(&self, n: usize, k: usize) -> f64 {
        let a = self.alpha;
        let j = n - k;
        let lg = ln_gamma(k as f64 - a) + ln_gamma(j as f64 - a)
            - ln_gamma(n as f64 - a)
            - ln_gamma(1.0 - a);
        let w = 0.5 * a * (lg + ln_binomial(n, k)).exp()
            + (1.0 - 2.0 * a) * (lg + ln_binomial(n - 2, k - 1)).exp();
        if k == j {
            w
        } else {
            2.0 * w
        }
    }
}

impl SplittingFamily for FordFamily {
    fn name(&self) -> String {
        format!("ford:alpha={}", self.alpha)
    }
    fn indexing(&self) -> Indexing {
        Indexing::Leaves
    }
    fn pmf(&self, lambda: &IntPartition) -> f64 {
        if lambda.n() == 1 {
            return lambda.is_cemetery() as u8 as f64;
        }
        binary_parts(lambda).map_or(0.0, |(k, _)| self.split_prob(lambda.n(), k))
    }
    fn cheap_support(&self, n: usize) -> Option<Vec<(IntPartition, f64)>> {
        if n == 1 {
            return Some(vec![(IntPartition::cemetery(), 1.0)]);
        }
        Some(binary_support(n, |k| self.split_prob(n, k)))
    }
    fn sample_native(&self, n: usize, rng: &mut dyn RngCore) -> Option<Result<IntPartition>> {
        Some(Ok(binary_scan(n, |k| self.split_prob(n, k), rng)))
    }
    fn cache(&self) -> &SupportCache {
        &self.cache
    }
}

/// Root splits of Rémy's uniform binary trees.
#[derive(Clone, Debug, Default)]
pub struct RemyFamily {
    cache: SupportCache,
}

impl RemyFamily {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn split_prob(&self, n: usize, k: usize) -> f64 {
        let j = n - k;
        let lg = ln_gamma(k as f64 - 0.5) + ln_gamma(j as f64 - 0.5)
            - ln_gamma(n as f64 - 0.5)
            - ln_gamma(0.5)
            + ln_binomial(n, k);
        let mult = if k == j { 0.25 } else { 0.5 };
        mult * lg.exp()
    }
}

impl SplittingFamily for RemyFamily {
    fn name(&self) -> String {
        "remy".into()
    }
    fn indexing(&self) -> Indexing {
        Indexing::Leaves
    }
    fn pmf(&self, lambda: &IntPartition) -> f64 {
        if lambda.n() == 1 {
            return lambda.is_cemetery() as u8 as f64;
        }
        binary_parts(lambda).map_or(0.0, |(k, _)| self.split_prob(lambda.n(), k))
    }
    fn cheap_support(&self, n: usize) -> Option<Vec<(IntPartition, f64)>> {
        if n == 1 {
            return Some(vec![(IntPartition::cemetery(), 1.0)]);
        }
        Some(binary_support(n, |k| self.split_prob(n, k)))
    }
    fn sample_native(&self, n: usize, rng: &mut dyn RngCore) -> Option<Result<IntPartition>> {
        Some(Ok(binary_scan(n, |k| self.split_prob(n, k), rng)))
    }
    fn cache(&self) -> &SupportCache {
        &self.cache
    }
}

/// Root splits of `k`-ary growing trees, indexed by the leaf count
/// `m = 1 + (k − 1)(n − 1)`.
#[derive(Clone, Debug)]
pub struct KaryFamily {
    k: usize,
    cache: SupportCache,
}

impl KaryFamily {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(invalid(format!("k-ary family needs k ≥ 2, got {k}")));
        }
        Ok(KaryFamily {
            k,
            cache: SupportCache::default(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Growth step count `n` for leaf count `m`.
    fn steps(&self, m: usize) -> Option<usize> {
        ((m - 1) % (self.k - 1) == 0).then(|| 1 + (m - 1) / (self.k - 1))
    }

    /// `q̄_m(n)` for an ordered vector of growth counts `ell` summing to
    /// `n − 2`.
    fn ordered_weight(&self, n: usize, ell: &[usize]) -> f64 {
        let kf = self.k as f64;
        let inv = 1.0 / kf;
        let mut ln = -kf.ln() - (kf - 1.0) * ln_gamma(inv);
        for &l in ell {
            ln += ln_gamma(inv + l as f64) - ln_factorial(l);
        }
        ln += ln_factorial(n - 2) - ln_gamma(inv + n as f64 - 1.0);
        // Σ_{j=1}^{n_1+1} n_1!/(n_1−j+1)! · (n−j−1)!/(n−2)!
        let n1 = ell[0];
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..=n1 {
            term *= (n1 - j + 1) as f64 / (n - j - 1) as f64;
            sum += term;
        }
        ln.exp() * sum
    }

    fn prob(&self, m: usize, lambda: &IntPartition) -> f64 {
        let Some(n) = self.steps(m) else { return 0.0 };
        if lambda.len() != self.k || lambda.parts().iter().any(|x| (x - 1) % (self.k - 1) != 0) {
            return 0.0;
        }
        let mut ell: Vec<usize> = lambda.parts().iter().map(|x| (x - 1) / (self.k - 1)).collect();
        // Sum over the distinct orderings, starting from the sorted one.
        ell.sort_unstable();
        let mut total = 0.0;
        loop {
            total += self.ordered_weight(n, &ell);
            if !next_permutation(&mut ell) {
                break;
            }
        }
        total
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (1..v.len()).rev().find(|&i| v[i - 1] < v[i]) else {
        return false;
    };
    let j = (i..v.len()).rev().find(|&j| v[j] > v[i - 1]).unwrap();
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

impl SplittingFamily for KaryFamily {
    fn name(&self) -> String {
        format!("kary:k={}", self.k)
    }
    fn indexing(&self) -> Indexing {
        Indexing::Leaves
    }
    fn admits(&self, m: usize) -> bool {
        m >= 1 && self.steps(m).is_some()
    }
    fn pmf(&self, lambda: &IntPartition) -> f64 {
        if lambda.n() == 1 {
            return lambda.is_cemetery() as u8 as f64;
        }
        self.prob(lambda.n(), lambda)
    }
    fn cheap_support(&self, m: usize) -> Option<Vec<(IntPartition, f64)>> {
        if m == 1 {
            return Some(vec![(IntPartition::cemetery(), 1.0)]);
        }
        // Partitions into k parts grow like m^{k−1}; list them only when few.
        if self.k > 3 && m > 60 || m > 400 {
            return None;
        }
        Some(
            partitions_k_parts_congruent(m, self.k, self.k - 1)
                .into_iter()
                .map(|l| {
                    let p = self.prob(m, &l);
                    (l, p)
                })
                .filter(|e| e.1 > 0.0)
                .collect(),
        )
    }
    fn sample_native(&self, m: usize, rng: &mut dyn RngCore) -> Option<Result<IntPartition>> {
        let n = self.steps(m)?;
        let k = self.k;
        // Urn on growth counts ℓ_i of the subtrees above the first branch
        // point: subtree i holds kℓ_i + 1 edges, the root edge one more.
        let mut ell = vec![0usize; k];
        let mut steps_of: Vec<usize> = Vec::new();
        for cur in 2..n {
            let edges = 1 + k * (cur - 1);
            let x = rng.random_range(0..edges);
            if x < k * steps_of.len() {
                let b = steps_of[x / k];
                ell[b] += 1;
                steps_of.push(b);
            } else if x < k * steps_of.len() + k {
                let b = x - k * steps_of.len();
                ell[b] += 1;
                steps_of.push(b);
            } else {
                ell.iter_mut().for_each(|l| *l = 0);
                ell[0] = cur - 1;
                steps_of.clear();
                steps_of.resize(cur - 1, 0);
            }
        }
        let parts = ell.iter().map(|l| 1 + (k - 1) * l).collect();
        Some(IntPartition::new(parts))
    }
    fn cache(&self) -> &SupportCache {
        &self.cache
    }
}

/// Root splits of Marchal's marginals of the β-stable tree.
#[derive(Clone, Debug)]
pub struct MarchalFamily {
    beta: f64,
    cache: SupportCache,
}

impl MarchalFamily {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 1.0 && beta <= 2.0) {
            return Err(invalid(format!("Marchal family needs β in (1, 2], got {beta}")));
        }
        Ok(MarchalFamily {
            beta,
            cache: SupportCache::default(),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn prob(&self, lambda: &IntPartition) -> f64 {
        let p = lambda.len();
        if p < 2 {
            return 0.0;
        }
        let b = self.beta;
        let a = 1.0 / b;
        // Γ(p − β)/Γ(2 − β) = Π_{i=2}^{p−1} (i − β), zero for p ≥ 3 at β = 2.
        let mut poch = 1.0;
        for i in 2..p {
            poch *= i as f64 - b;
        }
        if poch <= 0.0 {
            return 0.0;
        }
        let n = lambda.n();
        let mut ln = ln_factorial(n);
        for &x in lambda.parts() {
            ln -= ln_factorial(x);
            ln += ln_gamma(x as f64 - a);
        }
        for (_, m) in lambda.multiplicities() {
            ln -= ln_factorial(m);
        }
        ln += (2.0 - p as f64) * b.ln() + ln_gamma(2.0 - a) + poch.ln()
            - ln_gamma(n as f64 - a)
            - p as f64 * ln_gamma(1.0 - a);
        ln.exp()
    }
}

impl SplittingFamily for MarchalFamily {
    fn name(&self) -> String {
        format!("marchal:beta={}", self.beta)
    }
    fn indexing(&self) -> Indexing {
        Indexing::Leaves
    }
    fn pmf(&self, lambda: &IntPartition) -> f64 {
        if lambda.n() == 1 {
            return lambda.is_cemetery() as u8 as f64;
        }
        self.prob(lambda)
    }
    fn sample_native(&self, n: usize, rng: &mut dyn RngCore) -> Option<Result<IntPartition>> {
        let b = self.beta;
        // Urn on the subtrees above the first branch point. With p blocks
        // and cur leaves, block i weighs λ_i β − 1 = (λ_i − 1)β + (β − 1),
        // the branch point p − β and the root edge β − 1.
        let mut blocks = vec![1usize, 1];
        let mut extra: Vec<usize> = Vec::new();
        for cur in 2..n {
            let p = blocks.len();
            let total = cur as f64 * b - 1.0;
            let u = rng.random::<f64>() * total;
            let w_extra = extra.len() as f64 * b;
            let w_base = p as f64 * (b - 1.0);
            let w_new = p as f64 - b;
            if u < w_extra {
                let i = extra[rng.random_range(0..extra.len())];
                blocks[i] += 1;
                extra.push(i);
            } else if u < w_extra + w_base {
                let i = rng.random_range(0..p);
                blocks[i] += 1;
                extra.push(i);
            } else if u < w_extra + w_base + w_new {
                blocks.push(1);
            } else {
                blocks = vec![cur, 1];
                extra = vec![0; cur - 1];
            }
        }
        Some(IntPartition::new(blocks))
    }
    fn cache(&self) -> &SupportCache {
        &self.cache
    }
}

/// Lazily grown table of size probabilities.
#[derive(Debug)]
struct SizeTable {
    law: OffspringLaw,
    leaves: bool,
    probs: RwLock<Vec<f64>>,
}

impl SizeTable {
    fn new(law: OffspringLaw, leaves: bool) -> Self {
        SizeTable {
            law,
            leaves,
            probs: RwLock::new(Vec::new()),
        }
    }

    fn get(&self, n: usize) -> f64 {
        if let Some(&p) = self.probs.read().unwrap().get(n) {
            return p;
        }
        let want = (2 * n).max(64);
        let table = if self.leaves {
            gw::size_pmf_leaves(&self.law, want)
        } else {
            gw::size_pmf_vertices(&self.law, want)
        };
        let p = table[n];
        let mut w = self.probs.write().unwrap();
        if w.len() < table.len() {
            *w = table;
        }
        p
    }
}

impl Clone for SizeTable {
    fn clone(&self) -> Self {
        SizeTable::new(self.law.clone(), self.leaves)
    }
}

/// Sizes above which GW families sample by conditioning a GW tree instead of
/// listing partitions.
const GW_TABLE_MAX: usize = 30;

/// `η(p) p!/Π m_i! · Π P(#T = λ_i) / P(#T = target)`.
fn gw_split_prob(law: &OffspringLaw, sizes: &SizeTable, lambda: &IntPartition, target: usize) -> f64 {
    let p = lambda.len();
    let eta = law.prob(p);
    if eta == 0.0 {
        return 0.0;
    }
    let denom = sizes.get(target);
    if denom == 0.0 {
        return 0.0;
    }
    let mut ln = ln_factorial(p);
    for (_, m) in lambda.multiplicities() {
        ln -= ln_factorial(m);
    }
    let mut prod = eta * ln.exp();
    for &x in lambda.parts() {
        prod *= sizes.get(x);
    }
    prod / denom
}

/// Root splits of GW trees conditioned on their number of leaves.
#[derive(Clone, Debug)]
pub struct GwLeavesFamily {
    law: OffspringLaw,
    sizes: SizeTable,
    cache: SupportCache,
}

impl GwLeavesFamily {
    pub fn new(law: OffspringLaw) -> Self {
        GwLeavesFamily {
            sizes: SizeTable::new(law.clone(), true),
            law,
            cache: SupportCache::default(),
        }
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }
}

impl SplittingFamily for GwLeavesFamily {
    fn name(&self) -> String {
        format!("gw-leaves:offspring={}", self.law.name())
    }
    fn indexing(&self) -> Indexing {
        Indexing::Leaves
    }
    fn admits(&self, n: usize) -> bool {
        n >= 1 && self.sizes.get(n) > 0.0
    }
    fn pmf(&self, lambda: &IntPartition) -> f64 {
        if lambda.is_cemetery() {
            return 1.0 - self.law.prob(1);
        }
        gw_split_prob(&self.law, &self.sizes, lambda, lambda.n())
    }
    fn sample_native(&self, n: usize, rng: &mut dyn RngCore) -> Option<Result<IntPartition>> {
        if n <= GW_TABLE_MAX {
            return None;
        }
        let draw = gw::sample_gw_n_leaves(&self.law, n, rng).and_then(|t| {
            let counts = t.subtree_leaf_counts();
            IntPartition::new(t.children(0).iter().map(|&c| counts[c].max(1)).collect())
        });
        Some(draw)
    }
    fn cache(&self) -> &SupportCache {
        &self.cache
    }
}

/// Root splits `p_{n−1}` of GW trees conditioned on `n` vertices: the law
/// at size `m` splits the `m` non-root vertices of an `(m + 1)`-vertex tree.
#[derive(Clone, Debug)]
pub struct GwVerticesFamily {
    law: OffspringLaw,
    sizes: SizeTable,
    cache: SupportCache,
}

impl GwVerticesFamily {
    pub fn new(law: OffspringLaw) -> Self {
        GwVerticesFamily {
            sizes: SizeTable::new(law.clone(), false),
            law,
            cache: SupportCache::default(),
        }
    }

    pub fn law(&self) -> &OffspringLaw {
        &self.law
    }
}

impl SplittingFamily for GwVerticesFamily {
    fn name(&self) -> String {
        format!("gw-vertices:offspring={}", self.law.name())
    }
    fn indexing(&self) -> Indexing {
        Indexing::Vertices
    }
    fn admits(&self, m: usize) -> bool {
        m == 1 || (m >= 1 && self.sizes.get(m + 1) > 0.0)
    }
    fn pmf(&self, lambda: &IntPartition) -> f64 {
        let m = lambda.n();
        if m == 1 {
            return (!lambda.is_cemetery()) as u8 as f64;
        }
        gw_split_prob(&self.law, &self.sizes, lambda, m + 1)
    }
    fn sample_native(&self, m: usize, rng: &mut dyn RngCore) -> Option<Result<IntPartition>> {
        if m <= GW_TABLE_MAX {
            return None;
        }
        let draw = gw::sample_gw_n_vertices(&self.law, m + 1, rng).and_then(|t| {
            let sizes = t.subtree_sizes();
            IntPartition::new(t.children(0).iter().map(|&c| sizes[c]).collect())
        });
        Some(draw)
    }
    fn cache(&self) -> &SupportCache {
        &self.cache
    }
}

/// First-cut splits of the cut-tree of a uniform Cayley tree.
#[derive(Clone, Debug, Default)]
pub struct CutCayleyFamily {
    cache: SupportCache,
}

impl CutCayleyFamily {
    pub fn new() -> Self {
        Self::default()
    }

    /// The displayed weight for `n/2 ≤ k ≤ n − 1`; the symmetric split
    /// `k = n/2` receives half of it.
    pub fn split_prob(&self, n: usize, k: usize) -> f64 {
        let j = n - k;
        let ln = (j as f64 - 1.0) * (j as f64).ln() - ln_factorial(j)
            + (k as f64 - 1.0) * (k as f64).ln()
            - ln_factorial(k)
            + ln_factorial(n - 2)
            - (n as f64 - 3.0) * (n as f64).ln();
        if k == j {
            0.5 * ln.exp()
        } else {
            ln.exp()
        }
    }
}

impl SplittingFamily for CutCayleyFamily {
    fn name(&self) -> String {
        "cut-cayley".into()
    }
    fn indexing(&self) -> Indexing {
        Indexing::Leaves
    }
    fn pmf(&self, lambda: &IntPartition) -> f64 {
        if lambda.n() == 1 {
            return lambda.is_cemetery() as u8 as f64;
        }
        binary_parts(lambda).map_or(0.0, |(k, _)| self.split_prob(lambda.n(), k))
    }
    fn cheap_support(&self, n: usize) -> Option<Vec<(IntPartition, f64)>> {
        if n == 1 {
            return Some(vec![(IntPartition::cemetery(), 1.0)]);
        }
        Some(binary_support(n, |k| self.split_prob(n, k)))
    }
    fn sample_native(&self, n: usize, rng: &mut dyn RngCore) -> Option<Result<IntPartition>> {
        Some(Ok(binary_scan(n, |k| self.split_prob(n, k), rng)))
    }
    fn cache(&self) -> &SupportCache {
        &self.cache
    }
}

/// First-cut splits of the cut-tree of a uniform recursive tree.
#[derive(Clone, Debug, Default)]
pub struct CutRecursiveFamily {
    cache: SupportCache,
}

impl CutRecursiveFamily {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn split_prob(&self, n: usize, k: usize) -> f64 {
        let j = n - k;
        let (kf, jf, nf) = (k as f64, j as f64, n as f64);
        let w = nf / (nf - 1.0) * (1.0 / (kf * (kf + 1.0)) + 1.0 / (jf * (jf + 1.0)));
        if k == j {
            0.5 * w
        } else {
            w
        }
    }
}

impl SplittingFamily for CutRecursiveFamily {
    fn name(&self) -> String {
        "cut-recursive".into()
    }
    fn indexing(&self) -> Indexing {
        Indexing::Leaves
    }
    fn pmf(&self, lambda: &IntPartition) -> f64 {
        if lambda.n() == 1 {
            return lambda.is_cemetery() as u8 as f64;
        }
        binary_parts(lambda).map_or(0.0, |(k, _)| self.split_prob(lambda.n(), k))
    }
    fn cheap_support(&self, n: usize) -> Option<Vec<(IntPartition, f64)>> {
        if n == 1 {
            return Some(vec![(IntPartition::cemetery(), 1.0)]);
        }
        Some(binary_support(n, |k| self.split_prob(n, k)))
    }
    fn sample_native(&self, n: usize, rng: &mut dyn RngCore) -> Option<Result<IntPartition>> {
        Some(Ok(binary_scan(n, |k| self.split_prob(n, k), rng)))
    }
    fn cache(&self) -> &SupportCache {
        &self.cache
    }
}

#[allow(dead_code)]
fn unsupported(name: &str, n: usize) -> Error {
    Error::ResourceCap(format!("{name} cannot be sampled at size {n}"))
}

#[cfg(test)]
mod tests {
    use super::super::{partitions_of, sample, support};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn total(f: &dyn SplittingFamily, n: usize) -> f64 {
        support(f, n).unwrap().iter().map(|e| e.1).sum()
    }

    fn p(parts: &[usize]) -> IntPartition {
        IntPartition::new(parts.to_vec()).unwrap()
    }

    #[test]
    fn basic_and_halving_atoms() {
        let b = BasicFamily::new(1.0).unwrap();
        assert_eq!(b.pmf(&p(&[8])), 7.0 / 8.0);
        assert_eq!(b.pmf(&p(&[4, 4])), 1.0 / 8.0);
        assert!((b.pmf(&p(&[5, 4])) - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(total(&b, 1000), 1.0);
        let h = HalvingFamily::new();
        assert_eq!(h.pmf(&p(&[1, 1])), 1.0);
        assert_eq!(h.pmf(&p(&[4, 3])), 1.0);
        assert_eq!(h.cemetery_prob(), 1.0);
    }

    #[test]
    fn ford_two_and_normalization() {
        for a in [0.1, 0.3, 0.5, 0.9] {
            let f = FordFamily::new(a).unwrap();
            assert!((f.pmf(&p(&[1, 1])) - 1.0).abs() < 1e-12);
            for n in 2..=40 {
                assert!((total(&f, n) - 1.0).abs() < 1e-10, "α={a} n={n}");
            }
        }
        assert!(FordFamily::new(0.0).is_err());
        assert!(FordFamily::new(1.0).is_err());
    }

    #[test]
    fn remy_and_kary_two() {
        let r = RemyFamily::new();
        let k2 = KaryFamily::new(2).unwrap();
        let f = FordFamily::new(0.5).unwrap();
        let m2 = MarchalFamily::new(2.0).unwrap();
        assert!((r.pmf(&p(&[2, 1])) - 1.0).abs() < 1e-12);
        for n in 2..=12 {
            for l in partitions_of(n).unwrap() {
                let x = r.pmf(&l);
                for y in [k2.pmf(&l), f.pmf(&l), m2.pmf(&l)] {
                    assert!((x - y).abs() < 1e-10, "{l}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn kary_three() {
        let k3 = KaryFamily::new(3).unwrap();
        assert!(!k3.admits(4));
        assert!((k3.pmf(&p(&[1, 1, 1])) - 1.0).abs() < 1e-12);
        for m in [5usize, 7, 9, 21, 41] {
            assert!((total(&k3, m) - 1.0).abs() < 1e-10, "m = {m}");
        }
        assert_eq!(k3.pmf(&p(&[2, 2, 1])), 0.0);
    }

    #[test]
    fn marchal_normalization() {
        for b in [1.2, 1.5, 1.9, 2.0] {
            let f = MarchalFamily::new(b).unwrap();
            assert!((f.pmf(&p(&[1, 1])) - 1.0).abs() < 1e-12);
            assert_eq!(f.pmf(&p(&[3])), 0.0);
            for n in 2..=20 {
                assert!((total(&f, n) - 1.0).abs() < 1e-9, "β={b} n={n}");
            }
        }
    }

    #[test]
    fn gw_normalization() {
        for law in [OffspringLaw::binary(), OffspringLaw::geometric_half(), OffspringLaw::poisson_one()]
        {
            let leaves = GwLeavesFamily::new(law.clone());
            let verts = GwVerticesFamily::new(law.clone());
            assert!((leaves.pmf(&IntPartition::whole(1)) - law.prob(1)).abs() < 1e-15);
            for n in 2..=20 {
                assert!((total(&leaves, n) - 1.0).abs() < 1e-9, "{} leaves n={n}", law.name());
            }
            for m in 1..=20 {
                if verts.admits(m) {
                    assert!((total(&verts, m) - 1.0).abs() < 1e-9, "{} m={m}", law.name());
                }
            }
        }
        let b = GwVerticesFamily::new(OffspringLaw::binary());
        assert!((b.pmf(&p(&[1, 1])) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cut_families() {
        let c = CutCayleyFamily::new();
        let r = CutRecursiveFamily::new();
        assert!((c.pmf(&p(&[1, 1])) - 1.0).abs() < 1e-12);
        for n in 2..=40 {
            assert!((total(&c, n) - 1.0).abs() < 1e-9, "cayley n={n}");
            assert!((total(&r, n) - 1.0).abs() < 1e-12, "recursive n={n}");
        }
        assert!((r.pmf(&p(&[3, 1])) - 7.0 / 9.0).abs() < 1e-14);
        assert!((r.pmf(&p(&[2, 2])) - 2.0 / 9.0).abs() < 1e-14);
    }

    #[test]
    fn native_samplers_give_valid_partitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let fams: Vec<Box<dyn SplittingFamily>> = vec![
            Box::new(FordFamily::new(0.3).unwrap()),
            Box::new(MarchalFamily::new(1.5).unwrap()),
            Box::new(KaryFamily::new(3).unwrap()),
            Box::new(CutCayleyFamily::new()),
            Box::new(GwVerticesFamily::new(OffspringLaw::geometric_half())),
            Box::new(GwLeavesFamily::new(OffspringLaw::binary())),
        ];
        for f in &fams {
            let n = if f.name().starts_with("kary") { 201 } else { 200 };
            for _ in 0..20 {
                let l = sample(f.as_ref(), n, &mut rng).unwrap();
                assert_eq!(l.n(), n, "{}", f.name());
            }
        }
    }

    #[test]
    fn marchal_urn_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let f = MarchalFamily::new(1.5).unwrap();
        let n = 6;
        let reps = 200_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..reps {
            let l = f.sample_native(n, &mut rng).unwrap().unwrap();
            *counts.entry(l).or_insert(0usize) += 1;
        }
        let mut tv = 0.0;
        for l in partitions_of(n).unwrap() {
            let emp = counts.get(&l).copied().unwrap_or(0) as f64 / reps as f64;
            tv += (emp - f.pmf(&l)).abs();
        }
        assert!(tv / 2.0 < 0.01, "tv = {}", tv / 2.0);
    }

    #[test]
    fn kary_urn_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = KaryFamily::new(3).unwrap();
        let m = 9;
        let reps = 200_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..reps {
            let l = f.sample_native(m, &mut rng).unwrap().unwrap();
            *counts.entry(l).or_insert(0usize) += 1;
        }
        let mut tv = 0.0;
        for (l, q) in support(&f, m).unwrap() {
            let emp = counts.get(&l).copied().unwrap_or(0) as f64 / reps as f64;
            tv += (emp - q).abs();
        }
        assert!(tv / 2.0 < 0.01, "tv = {}", tv / 2.0);
    }
}
