//! Counting formulas and exact uniform samplers for classical tree families.

use std::collections::BTreeSet;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::tree::{CanonicalCode, RootedTree};

/// Growth constant of the rooted unlabeled tree counts.
pub const OTTER_KAPPA: f64 = 2.955_765_285_651_994_974_7;

/// Largest size for which Pólya sampling uses exact integer weights.
pub const POLYA_EXACT_MAX: usize = 200;

const ENUMERATION_MAX: usize = 10;

fn require_positive(n: usize) -> Result<()> {
    if n == 0 {
        return Err(invalid("tree size must be at least 1"));
    }
    Ok(())
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Number of rooted ordered trees with `n` vertices (the Catalan number
/// `C_{n-1}`).
pub fn count_ordered(n: usize) -> Result<BigUint> {
    require_positive(n)?;
    let m = (n - 1) as u64;
    Ok(binomial(2 * m, m) / (m + 1))
}

/// Cayley's count `n^{n-2}` of trees on `n` labeled vertices.
pub fn count_labeled(n: usize) -> Result<BigUint> {
    require_positive(n)?;
    if n == 1 {
        return Ok(BigUint::one());
    }
    Ok(BigUint::from(n).pow((n - 2) as u32))
}

/// `n^{n-1}` rooted trees on `n` labeled vertices.
pub fn count_labeled_rooted(n: usize) -> Result<BigUint> {
    require_positive(n)?;
    Ok(BigUint::from(n).pow((n - 1) as u32))
}

/// Counts `t_1, ..., t_{n_max}` of rooted unordered unlabeled trees, at
/// index `k - 1`.
pub fn otter_counts(n_max: usize) -> Result<Vec<BigUint>> {
    require_positive(n_max)?;
    let mut t = vec![BigUint::zero(); n_max + 1];
    // c[k] = Σ_{d | k} d t_d
    let mut c = vec![BigUint::zero(); n_max + 1];
    t[1] = BigUint::one();
    for m in 1..n_max {
        for d in (1..=m).filter(|d| m % d == 0) {
            c[m] += &t[d] * d;
        }
        let mut s = BigUint::zero();
        for k in 1..=m {
            s += &c[k] * &t[m - k + 1];
        }
        t[m + 1] = s / m;
    }
    t.remove(0);
    Ok(t)
}

/// `t_k / κ^k` for `k = 0..=n_max` (entry 0 unused), computed by the same
/// recurrence in scaled floating point.
pub fn otter_scaled(n_max: usize) -> Vec<f64> {
    let mut r = vec![0.0; n_max + 1];
    if n_max == 0 {
        return r;
    }
    let mut c = vec![0.0; n_max + 1];
    r[1] = 1.0 / OTTER_KAPPA;
    for m in 1..n_max {
        let mut cm = 0.0;
        for d in (1..=m).filter(|d| m % d == 0) {
            cm += d as f64 * r[d] * OTTER_KAPPA.powi(d as i32 - m as i32);
        }
        c[m] = cm;
        let s: f64 = (1..=m).map(|k| c[k] * r[m - k + 1]).sum();
        r[m + 1] = s / m as f64;
    }
    r
}

/// Uniform integer in `[0, bound)`.
pub fn random_below<R: Rng + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    assert!(!bound.is_zero(), "empty range");
    let bits = bound.bits();
    let n_bytes = bits.div_ceil(8) as usize;
    let top_mask = if bits % 8 == 0 { 0xff } else { (1u16 << (bits % 8)) as u8 - 1 };
    let mut buf = vec![0u8; n_bytes];
    loop {
        rng.fill(&mut buf[..]);
        // Big-endian: the first byte is the most significant.
        buf[0] &= top_mask;
        let x = BigUint::from_bytes_be(&buf);
        if &x < bound {
            return x;
        }
    }
}

/// Rotates a degree sequence with `Σ d_i = len − 1` to the unique rotation
/// that is a preorder out-degree sequence.
pub(crate) fn cycle_lemma_rotate(degrees: &[usize]) -> Vec<usize> {
    let mut s: i64 = 0;
    let mut min = i64::MAX;
    let mut at = 0;
    for (i, &d) in degrees.iter().enumerate() {
        s += d as i64 - 1;
        if s < min {
            min = s;
            at = i + 1;
        }
    }
    let at = at % degrees.len();
    degrees[at..].iter().chain(&degrees[..at]).copied().collect()
}

/// Uniform rooted ordered tree with `n` vertices.
pub fn sample_uniform_ordered<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<RootedTree> {
    require_positive(n)?;
    // Stars and bars: n − 1 balls among n boxes, then the cycle lemma.
    let mut symbols = vec![true; n - 1];
    symbols.extend(std::iter::repeat(false).take(n - 1));
    symbols.shuffle(rng);
    let mut degrees = Vec::with_capacity(n);
    let mut d = 0;
    for s in symbols {
        if s {
            d += 1;
        } else {
            degrees.push(d);
            d = 0;
        }
    }
    degrees.push(d);
    RootedTree::from_lukasiewicz(&cycle_lemma_rotate(&degrees))
}

/// A tree together with the original label of each (normalized) vertex.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledTree {
    pub tree: RootedTree,
    pub labels: Vec<usize>,
}

impl LabeledTree {
    /// Parent labels indexed by label, `None` at the root.
    pub fn parents_by_label(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.labels.len()];
        for v in 1..self.tree.len() {
            out[self.labels[v]] = Some(self.labels[self.tree.parent(v).unwrap()]);
        }
        out
    }
}

/// Decodes a Prüfer sequence over labels `0..seq.len() + 2` into an edge list.
pub fn prufer_decode(seq: &[usize]) -> Result<Vec<(usize, usize)>> {
    let n = seq.len() + 2;
    if let Some(&bad) = seq.iter().find(|&&x| x >= n) {
        return Err(invalid(format!("Prüfer entry {bad} out of range for {n} labels")));
    }
    let mut degree = vec![1usize; n];
    for &x in seq {
        degree[x] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    let mut ptr = degree.iter().position(|&d| d == 1).unwrap();
    let mut leaf = ptr;
    for &x in seq {
        edges.push((leaf, x));
        degree[x] -= 1;
        if degree[x] == 1 && x < ptr {
            leaf = x;
        } else {
            ptr += 1;
            while degree[ptr] != 1 {
                ptr += 1;
            }
            leaf = ptr;
        }
    }
    edges.push((leaf, n - 1));
    Ok(edges)
}

fn root_edges(n: usize, edges: &[(usize, usize)], root: usize) -> Result<LabeledTree> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut parent = vec![None; n];
    let mut seen = vec![false; n];
    seen[root] = true;
    let mut stack = vec![root];
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                parent[w] = Some(v);
                stack.push(w);
            }
        }
    }
    let mut children = vec![Vec::new(); n];
    for v in 0..n {
        if let Some(p) = parent[v] {
            children[p].push(v);
        }
    }
    let (tree, labels) = RootedTree::from_children_with_map(root, children)?;
    Ok(LabeledTree { tree, labels })
}

/// Uniform rooted tree on labels `0..n`.
pub fn sample_cayley<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<LabeledTree> {
    require_positive(n)?;
    let root = rng.random_range(0..n);
    if n == 1 {
        return Ok(LabeledTree {
            tree: RootedTree::single(),
            labels: vec![0],
        });
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let edges = prufer_decode(&seq)?;
    root_edges(n, &edges, root)
}

/// Uniform recursive tree: vertex `i` attaches to a uniform earlier vertex.
/// Labels record insertion order, the root being 0.
pub fn sample_recursive<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<LabeledTree> {
    require_positive(n)?;
    let parents: Vec<Option<usize>> = (0..n)
        .map(|i| (i > 0).then(|| rng.random_range(0..i)))
        .collect();
    let (tree, labels) = RootedTree::from_parents_with_map(&parents)?;
    Ok(LabeledTree { tree, labels })
}

/// Weight tables for uniform rooted unordered trees.
#[derive(Clone, Debug)]
pub struct PolyaSampler {
    exact: Vec<BigUint>,
    scaled: Vec<f64>,
}

impl PolyaSampler {
    pub fn new(n_max: usize) -> Result<Self> {
        require_positive(n_max)?;
        let mut exact = otter_counts(n_max.min(POLYA_EXACT_MAX))?;
        exact.insert(0, BigUint::zero());
        Ok(PolyaSampler {
            exact,
            scaled: otter_scaled(n_max),
        })
    }

    pub fn n_max(&self) -> usize {
        self.scaled.len() - 1
    }

    /// Draws `(j, d)`: the root of a size-`m` tree receives `j` copies of a
    /// tree of size `d`, the rest being a tree of size `m − jd`.
    fn pick<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> (usize, usize) {
        if m <= POLYA_EXACT_MAX {
            self.pick_exact(m, rng)
        } else {
            self.pick_scaled(m, rng)
        }
    }

    fn pick_exact<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> (usize, usize) {
        {
            let t = &self.exact;
            let total = &t[m] * (m - 1);
            let mut u = random_below(&total, rng);
            for d in 1..m {
                for j in 1..=(m - 1) / d {
                    let w = &t[d] * &t[m - j * d] * d;
                    if u < w {
                        return (j, d);
                    }
                    u -= w;
                }
            }
        }
        unreachable!("weights sum to (m − 1) t_m")
    }

    fn pick_scaled<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> (usize, usize) {
        {
            let r = &self.scaled;
            let weight = |j: usize, d: usize| {
                d as f64 * r[d] * r[m - j * d] * OTTER_KAPPA.powi(-(((j - 1) * d) as i32))
            };
            // The weights sum to (m − 1) t_m / κ^m by the recurrence; almost
            // all of it sits at j = 1 with d close to m.
            let mut u = rng.random::<f64>() * (m - 1) as f64 * r[m];
            let mut last = (1, m - 1);
            let pairs = (1..m)
                .rev()
                .map(|d| (1, d))
                .chain((2..m).flat_map(|j| (1..=(m - 1) / j).map(move |d| (j, d))));
            for (j, d) in pairs {
                let w = weight(j, d);
                if w > 0.0 {
                    last = (j, d);
                }
                if u < w {
                    return (j, d);
                }
                u -= w;
            }
            last
        }
    }

    /// Uniform rooted unordered tree with `n` vertices.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<RootedTree> {
        require_positive(n)?;
        if n > self.n_max() {
            return Err(invalid(format!("table built for n ≤ {}", self.n_max())));
        }
        // Phase 1: a DAG of templates, each a root with (child template,
        // multiplicity) pairs. Phase 2 expands it.
        let mut templates: Vec<Vec<(usize, usize)>> = vec![Vec::new()];
        let mut tasks = vec![(n, 0usize)];
        while let Some((mut m, id)) = tasks.pop() {
            while m > 1 {
                let (j, d) = self.pick(m, rng);
                let child = templates.len();
                templates.push(Vec::new());
                templates[id].push((child, j));
                tasks.push((d, child));
                m -= j * d;
            }
        }
        let mut parents: Vec<Option<usize>> = vec![None];
        let mut stack = vec![(0usize, 0usize)];
        while let Some((tpl, v)) = stack.pop() {
            for &(child, j) in &templates[tpl] {
                for _ in 0..j {
                    parents.push(Some(v));
                    stack.push((child, parents.len() - 1));
                }
            }
        }
        debug_assert_eq!(parents.len(), n);
        RootedTree::from_parents(&parents)
    }
}

/// Uniform rooted unordered tree with `n` vertices.
pub fn sample_polya<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<RootedTree> {
    PolyaSampler::new(n)?.sample(n, rng)
}

fn guard_enumeration(n: usize) -> Result<()> {
    require_positive(n)?;
    if n > ENUMERATION_MAX {
        return Err(Error::SizeCap {
            what: "tree enumeration",
            size: n,
            limit: ENUMERATION_MAX,
        });
    }
    Ok(())
}

/// All rooted ordered trees with `n` vertices.
pub fn enumerate_ordered(n: usize) -> Result<Vec<RootedTree>> {
    guard_enumeration(n)?;
    // forests[m]: ordered forests with m vertices in total.
    let mut trees: Vec<Vec<RootedTree>> = vec![Vec::new(); n + 1];
    let mut forests: Vec<Vec<Vec<RootedTree>>> = vec![vec![Vec::new()]; 1];
    trees[1].push(RootedTree::single());
    for m in 1..=n {
        if m > 1 {
            trees[m] = forests[m - 1]
                .iter()
                .map(|f| RootedTree::glue(f).expect("non-empty forest"))
                .collect();
        }
        let mut fm = Vec::new();
        for first in 1..=m {
            for t in &trees[first] {
                for rest in &forests[m - first] {
                    let mut f = Vec::with_capacity(rest.len() + 1);
                    f.push(t.clone());
                    f.extend(rest.iter().cloned());
                    fm.push(f);
                }
            }
        }
        forests.push(fm);
    }
    Ok(std::mem::take(&mut trees[n]))
}

/// Canonical codes of all rooted unordered trees with `n` vertices, sorted.
pub fn enumerate_unordered(n: usize) -> Result<Vec<CanonicalCode>> {
    let codes: BTreeSet<CanonicalCode> = enumerate_ordered(n)?
        .iter()
        .map(RootedTree::canonical_code)
        .collect();
    Ok(codes.into_iter().collect())
}

/// Converts a ratio of big integers to `f64`.
pub fn ratio_f64(num: &BigUint, den: &BigUint) -> f64 {
    let shift = num.bits().max(den.bits()).saturating_sub(1000);
    let a = (num >> shift).to_f64().unwrap_or(f64::INFINITY);
    let b = (den >> shift).to_f64().unwrap_or(f64::INFINITY);
    a / b
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn small_counts() {
        let c: Vec<u64> = (1..=6).map(|n| count_ordered(n).unwrap().try_into().unwrap()).collect();
        assert_eq!(c, vec![1, 1, 2, 5, 14, 42]);
        assert_eq!(count_labeled(3).unwrap(), BigUint::from(3u8));
        assert_eq!(count_labeled(4).unwrap(), BigUint::from(16u8));
        assert_eq!(count_labeled_rooted(2).unwrap(), BigUint::from(2u8));
        assert_eq!(count_labeled_rooted(1).unwrap(), BigUint::one());
        assert!(count_ordered(0).is_err());
    }

    #[test]
    fn otter_sequence() {
        let t: Vec<u64> = otter_counts(10)
            .unwrap()
            .into_iter()
            .map(|x| x.try_into().unwrap())
            .collect();
        assert_eq!(t, vec![1, 1, 2, 4, 9, 20, 48, 115, 286, 719]);
    }

    #[test]
    fn scaled_counts_track_exact() {
        let exact = otter_counts(150).unwrap();
        let scaled = otter_scaled(150);
        for k in [1usize, 10, 80, 150] {
            let e = ratio_f64(&exact[k - 1], &BigUint::one()).ln() - k as f64 * OTTER_KAPPA.ln();
            assert!((scaled[k].ln() - e).abs() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn prufer_round_trip_small() {
        assert_eq!(prufer_decode(&[]).unwrap(), vec![(0, 1)]);
        let sorted = |seq: &[usize]| {
            let mut e: Vec<_> = prufer_decode(seq)
                .unwrap()
                .into_iter()
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            e.sort();
            e
        };
        assert_eq!(sorted(&[3, 3, 3]), vec![(0, 3), (1, 3), (2, 3), (3, 4)]);
        assert_eq!(sorted(&[0, 1]), vec![(0, 1), (0, 2), (1, 3)]);
    }

    #[test]
    fn enumeration_sizes() {
        for n in 1..=7 {
            let ord = enumerate_ordered(n).unwrap();
            assert_eq!(BigUint::from(ord.len()), count_ordered(n).unwrap());
            let un = enumerate_unordered(n).unwrap();
            assert_eq!(BigUint::from(un.len()), otter_counts(n).unwrap()[n - 1]);
        }
        assert!(enumerate_ordered(11).is_err());
    }

    #[test]
    fn samplers_respect_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [1usize, 2, 5, 40] {
            assert_eq!(sample_uniform_ordered(n, &mut rng).unwrap().len(), n);
            assert_eq!(sample_cayley(n, &mut rng).unwrap().tree.len(), n);
            assert_eq!(sample_polya(n, &mut rng).unwrap().len(), n);
            let rec = sample_recursive(n, &mut rng).unwrap();
            for v in 1..n {
                let p = rec.tree.parent(v).unwrap();
                assert!(rec.labels[p] < rec.labels[v]);
            }
        }
        let big = PolyaSampler::new(400).unwrap();
        assert_eq!(big.sample(400, &mut rng).unwrap().len(), 400);
    }

    #[test]
    fn scaled_pick_matches_exact_weights() {
        let s = PolyaSampler::new(60).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = 30;
        let draws = 200_000;
        let mut counts: HashMap<(usize, usize), usize> = HashMap::new();
        for _ in 0..draws {
            *counts.entry(s.pick_scaled(m, &mut rng)).or_default() += 1;
        }
        let total = &s.exact[m] * (m - 1);
        let mut tv = 0.0;
        for d in 1..m {
            for j in 1..=(m - 1) / d {
                let w = &s.exact[d] * &s.exact[m - j * d] * d;
                let p = ratio_f64(&w, &total);
                let q = counts.get(&(j, d)).copied().unwrap_or(0) as f64 / draws as f64;
                tv += 0.5 * (p - q).abs();
            }
        }
        assert!(tv < 0.01, "TV {tv}");
    }

    #[test]
    fn random_below_is_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b = BigUint::from(300u32);
        let mut seen = [false; 300];
        for _ in 0..20_000 {
            let x: usize = random_below(&b, &mut rng).try_into().unwrap();
            seen[x] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
