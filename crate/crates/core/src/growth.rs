//! Growth algorithms that graft new leaves onto a tree one step at a time:
//! Rémy, Ford's α-model, k-ary growth and Marchal's stable marginals.

use std::fmt;

use rand::{Rng, RngCore};

use crate::error::{invalid, Error, Result};
use crate::tree::RootedTree;

/// Prefix sums over non-negative weights with logarithmic update and search.
#[derive(Clone, Debug)]
struct Fenwick {
    tree: Vec<f64>,
    weights: Vec<f64>,
}

impl Fenwick {
    fn with_capacity(n: usize) -> Self {
        Fenwick {
            tree: vec![0.0; n + 1],
            weights: Vec::with_capacity(n),
        }
    }

    fn len(&self) -> usize {
        self.weights.len()
    }

    fn push(&mut self, w: f64) {
        let i = self.weights.len();
        self.weights.push(0.0);
        // A new slot's node covers the range (i + 1 − lowbit, i + 1].
        let node = i + 1;
        let low = node & node.wrapping_neg();
        let mut s = 0.0;
        let mut j = node - 1;
        while j > node - low {
            s += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        if self.tree.len() <= node {
            self.tree.resize(node + 1, 0.0);
        }
        self.tree[node] = s;
        self.add(i, w);
    }

    fn add(&mut self, i: usize, delta: f64) {
        self.weights[i] += delta;
        let mut j = i + 1;
        while j < self.tree.len() && j <= self.weights.len() {
            self.tree[j] += delta;
            j += j & j.wrapping_neg();
        }
    }

    #[cfg(test)]
    fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    fn total(&self) -> f64 {
        let mut s = 0.0;
        let mut j = self.len();
        while j > 0 {
            s += self.tree[j];
            j -= j & j.wrapping_neg();
        }
        s
    }

    /// Smallest index whose prefix sum exceeds `u`, skipping zero weights.
    fn find(&self, mut u: f64) -> usize {
        let n = self.len();
        let mut pos = 0;
        let mut step = if n == 0 { 0 } else { 1 << (usize::BITS - 1 - n.leading_zeros()) };
        while step > 0 {
            let next = pos + step;
            if next <= n && self.tree[next] <= u {
                u -= self.tree[next];
                pos = next;
            }
            step >>= 1;
        }
        // Rounding can land past the end or on a zero weight.
        let mut i = pos.min(n - 1);
        while self.weights[i] <= 0.0 && i > 0 {
            i -= 1;
        }
        i
    }
}

/// A growth algorithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GrowthModel {
    Remy,
    Ford(f64),
    Kary(usize),
    Marchal(f64),
}

impl GrowthModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GrowthModel::Remy => Ok(()),
            GrowthModel::Ford(a) if (0.0..=1.0).contains(&a) => Ok(()),
            GrowthModel::Ford(a) => Err(invalid(format!("Ford growth needs α in [0, 1], got {a}"))),
            GrowthModel::Kary(k) if k >= 2 => Ok(()),
            GrowthModel::Kary(k) => Err(invalid(format!("k-ary growth needs k ≥ 2, got {k}"))),
            GrowthModel::Marchal(b) if b > 1.0 && b <= 2.0 => Ok(()),
            GrowthModel::Marchal(b) => {
                Err(invalid(format!("Marchal growth needs β in (1, 2], got {b}")))
            }
        }
    }

    /// Parses `remy`, `ford:alpha=A`, `kary:k=K` or `marchal:beta=B`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
        let mut value: Option<(&str, &str)> = None;
        for kv in rest.split(',').filter(|s| !s.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::FamilySpec(format!("expected key=value, got {kv:?}")))?;
            if value.replace((k.trim(), v.trim())).is_some() {
                return Err(Error::FamilySpec(format!("too many parameters in {spec:?}")));
            }
        }
        let num = |key: &str| -> Result<f64> {
            match value {
                Some((k, v)) if k == key => v
                    .parse()
                    .map_err(|_| Error::FamilySpec(format!("{key}: not a number: {v:?}"))),
                Some((k, _)) => Err(Error::FamilySpec(format!("unknown parameter {k:?}"))),
                None => Err(Error::FamilySpec(format!("missing parameter {key}"))),
            }
        };
        let model = match name.trim() {
            "remy" if value.is_none() => GrowthModel::Remy,
            "ford" => GrowthModel::Ford(num("alpha")?),
            "kary" => {
                let k = num("k")?;
                if k.fract() != 0.0 || k < 2.0 {
                    return Err(Error::FamilySpec(format!("k must be an integer ≥ 2, got {k}")));
                }
                GrowthModel::Kary(k as usize)
            }
            "marchal" => GrowthModel::Marchal(num("beta")?),
            other => return Err(Error::FamilySpec(format!("unknown growth model {other:?}"))),
        };
        model.validate()?;
        Ok(model)
    }

    /// Leaves of the tree after `step` steps.
    pub fn leaves_at(&self, step: usize) -> usize {
        match *self {
            GrowthModel::Kary(k) => 1 + (k - 1) * (step - 1),
            _ => step,
        }
    }
}

impl fmt::Display for GrowthModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GrowthModel::Remy => f.write_str("remy"),
            GrowthModel::Ford(a) => write!(f, "ford:alpha={a}"),
            GrowthModel::Kary(k) => write!(f, "kary:k={k}"),
            GrowthModel::Marchal(b) => write!(f, "marchal:beta={b}"),
        }
    }
}

/// A nested run `T_1 ⊂ T_2 ⊂ ... ⊂ T_n`, stored as the final tree with the
/// step at which each vertex appeared.
#[derive(Clone, Debug)]
pub struct GrowthSequence {
    model: GrowthModel,
    parents: Vec<Option<usize>>,
    born: Vec<usize>,
    steps: usize,
}

impl GrowthSequence {
    pub fn model(&self) -> GrowthModel {
        self.model
    }

    pub fn n_steps(&self) -> usize {
        self.steps
    }

    /// Step at which each vertex of the final tree was added, in creation
    /// order (the root and first leaf at step 1).
    pub fn birth_steps(&self) -> &[usize] {
        &self.born
    }

    /// `T_k`: the vertices born by step `k`, each attached to its nearest
    /// such ancestor.
    pub fn tree_at(&self, k: usize) -> Result<RootedTree> {
        if k == 0 || k > self.steps {
            return Err(invalid(format!("step {k} outside 1..={}", self.steps)));
        }
        let mut id = vec![usize::MAX; self.parents.len()];
        let mut kept = 0;
        for v in 0..self.parents.len() {
            if self.born[v] <= k {
                id[v] = kept;
                kept += 1;
            }
        }
        let mut parents = Vec::with_capacity(kept);
        for v in 0..self.parents.len() {
            if self.born[v] > k {
                continue;
            }
            let mut p = self.parents[v];
            while let Some(q) = p {
                if self.born[q] <= k {
                    break;
                }
                p = self.parents[q];
            }
            parents.push(p.map(|q| id[q]));
        }
        RootedTree::from_parents(&parents)
    }

    pub fn final_tree(&self) -> RootedTree {
        RootedTree::from_parents(&self.parents).expect("growth builds a tree")
    }

    /// Every `T_k`, `k = 1..=n`.
    pub fn trees(&self) -> Result<Vec<RootedTree>> {
        (1..=self.steps).map(|k| self.tree_at(k)).collect()
    }
}

struct State {
    parents: Vec<Option<usize>>,
    born: Vec<usize>,
    children: Vec<usize>,
}

impl State {
    fn new() -> Self {
        State {
            parents: vec![None, Some(0)],
            born: vec![1, 1],
            children: vec![1, 0],
        }
    }

    fn push(&mut self, parent: usize, step: usize) -> usize {
        self.parents.push(Some(parent));
        self.born.push(step);
        self.children.push(0);
        self.children[parent] += 1;
        self.parents.len() - 1
    }

    /// Splits the edge above `c` with a new vertex and returns it.
    fn subdivide(&mut self, c: usize, step: usize) -> usize {
        let p = self.parents[c].expect("edges are named by their lower end");
        let w = self.push(p, step);
        self.children[p] -= 1;
        self.parents[c] = Some(w);
        self.children[w] += 1;
        w
    }
}

/// Runs `model` for `n_steps` steps.
pub fn grow(model: GrowthModel, n_steps: usize, rng: &mut dyn RngCore) -> Result<GrowthSequence> {
    model.validate()?;
    if n_steps == 0 {
        return Err(invalid("growth needs at least one step"));
    }
    let mut st = State::new();
    match model {
        GrowthModel::Remy => grow_edges(&mut st, n_steps, 1.0, 1.0, rng),
        GrowthModel::Ford(a) => grow_edges(&mut st, n_steps, 1.0 - a, a, rng),
        GrowthModel::Kary(k) => {
            for step in 2..=n_steps {
                let c = rng.random_range(1..st.parents.len());
                let w = st.subdivide(c, step);
                for _ in 0..k - 1 {
                    st.push(w, step);
                }
            }
        }
        GrowthModel::Marchal(b) => marchal_steps(&mut st, n_steps, b, rng),
    }
    Ok(GrowthSequence {
        model,
        parents: st.parents,
        born: st.born,
        steps: n_steps,
    })
}

/// Edges are indexed by their lower vertex `v ≥ 1` at Fenwick slot `v − 1`;
/// an edge's weight never changes because leaves stay leaves.
fn grow_edges(st: &mut State, n_steps: usize, leaf_w: f64, inner_w: f64, rng: &mut dyn RngCore) {
    let mut fw = Fenwick::with_capacity(2 * n_steps);
    fw.push(leaf_w);
    for step in 2..=n_steps {
        let total = fw.total();
        let u: f64 = rng.random();
        let c = if total > 0.0 {
            fw.find(u * total) + 1
        } else {
            // Only the comb at α = 1 starts with zero total weight.
            1 + (u * fw.len() as f64) as usize
        };
        let w = st.subdivide(c, step);
        fw.push(inner_w);
        st.push(w, step);
        fw.push(leaf_w);
    }
}

/// Slots `2(v − 1)` hold the weight of the edge above `v`, slots
/// `2(v − 1) + 1` the weight of vertex `v`.
fn marchal_steps(st: &mut State, n_steps: usize, beta: f64, rng: &mut dyn RngCore) {
    let vertex_weight = |deg: usize| if deg >= 3 { deg as f64 - 1.0 - beta } else { 0.0 };
    let mut fw = Fenwick::with_capacity(4 * n_steps);
    fw.push(beta - 1.0);
    fw.push(0.0);
    for step in 2..=n_steps {
        let total = fw.total();
        let slot = fw.find(rng.random::<f64>() * total);
        let v = slot / 2 + 1;
        if slot % 2 == 0 {
            let w = st.subdivide(v, step);
            fw.push(beta - 1.0);
            fw.push(vertex_weight(3));
            st.push(w, step);
        } else {
            let d = st.children[v] + 1;
            fw.add(slot, vertex_weight(d + 1) - vertex_weight(d));
            st.push(v, step);
        }
        fw.push(beta - 1.0);
        fw.push(0.0);
    }
}

pub fn grow_remy(n_steps: usize, rng: &mut dyn RngCore) -> Result<GrowthSequence> {
    grow(GrowthModel::Remy, n_steps, rng)
}

pub fn grow_ford(alpha: f64, n_steps: usize, rng: &mut dyn RngCore) -> Result<GrowthSequence> {
    grow(GrowthModel::Ford(alpha), n_steps, rng)
}

pub fn grow_kary(k: usize, n_steps: usize, rng: &mut dyn RngCore) -> Result<GrowthSequence> {
    grow(GrowthModel::Kary(k), n_steps, rng)
}

pub fn grow_marchal(beta: f64, n_steps: usize, rng: &mut dyn RngCore) -> Result<GrowthSequence> {
    grow(GrowthModel::Marchal(beta), n_steps, rng)
}

/// Removes the edge at the root, re-rooting at its only child.
pub fn root_edge_strip(t: &RootedTree) -> Result<RootedTree> {
    let kids = t.children(t.root());
    if kids.len() != 1 {
        return Err(invalid(format!(
            "root edge strip needs a root of degree 1, found {}",
            kids.len()
        )));
    }
    Ok(t.subtree(kids[0]))
}

/// Total selection weight of a tree under `model`: `m − α` for Ford and
/// `mβ − 1` for Marchal when the tree has `m` leaves.
pub fn total_weight(model: GrowthModel, t: &RootedTree) -> f64 {
    let edges = (1..t.len()).map(|v| t.is_leaf(v));
    match model {
        GrowthModel::Remy | GrowthModel::Kary(_) => t.n_edges() as f64,
        GrowthModel::Ford(a) => edges.map(|leaf| if leaf { 1.0 - a } else { a }).sum(),
        GrowthModel::Marchal(b) => {
            let e = t.n_edges() as f64 * (b - 1.0);
            let v: f64 = (1..t.len())
                .map(|v| t.out_degree(v) + 1)
                .filter(|&d| d >= 3)
                .map(|d| d as f64 - 1.0 - b)
                .sum();
            e + v
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fenwick_search() {
        let mut f = Fenwick::with_capacity(4);
        for w in [1.0, 0.0, 2.0, 0.5, 3.0] {
            f.push(w);
        }
        assert_eq!(f.total(), 6.5);
        assert_eq!(f.find(0.5), 0);
        assert_eq!(f.find(1.0), 2);
        assert_eq!(f.find(2.99), 2);
        assert_eq!(f.find(3.2), 3);
        assert_eq!(f.find(6.4), 4);
        f.add(1, 1.0);
        assert_eq!(f.find(1.5), 1);
        assert_eq!(f.weight(1), 1.0);
    }

    #[test]
    fn first_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let s = grow_remy(1, &mut rng).unwrap();
        let t1 = s.tree_at(1).unwrap();
        assert_eq!((t1.len(), t1.leaf_count()), (2, 1));
        assert_eq!(root_edge_strip(&t1).unwrap().len(), 1);
        let s = grow_remy(50, &mut rng).unwrap();
        for k in 1..=50 {
            let t = s.tree_at(k).unwrap();
            assert_eq!(t.leaf_count(), k);
            assert_eq!(t.len(), 2 * k);
            assert_eq!(t.out_degree(0), 1);
        }
        let t2 = s.tree_at(2).unwrap();
        assert_eq!(t2.height(), 2);
    }

    #[test]
    fn nested_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for model in [GrowthModel::Ford(0.3), GrowthModel::Marchal(1.4), GrowthModel::Kary(3)] {
            let s = grow(model, 40, &mut rng).unwrap();
            for k in 2..=40 {
                // Deleting the step-k vertices of T_k gives T_{k−1}.
                let a = s.tree_at(k - 1).unwrap().canonical_code();
                let b = s.tree_at(k).unwrap();
                let born: Vec<usize> = {
                    let mut keep = Vec::new();
                    for v in 0..s.parents.len() {
                        if s.born[v] <= k {
                            keep.push(s.born[v]);
                        }
                    }
                    keep
                };
                assert_eq!(born.len(), b.len());
                assert_eq!(b.leaf_count(), model.leaves_at(k), "{model}");
                assert!(a.n_vertices() < b.len());
            }
        }
    }

    #[test]
    fn ford_half_equals_remy_pathwise() {
        for seed in 0..20 {
            let a = grow_remy(300, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = grow_ford(0.5, 300, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a.parents, b.parents);
        }
    }

    #[test]
    fn marchal_two_is_binary() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let t = grow_marchal(2.0, 500, &mut rng).unwrap().final_tree();
        assert!((1..t.len()).all(|v| t.out_degree(v) == 0 || t.out_degree(v) == 2));
        assert_eq!(t.leaf_count(), 500);
    }

    #[test]
    fn kary_leaf_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in 2..6 {
            let s = grow_kary(k, 100, &mut rng).unwrap();
            assert_eq!(s.final_tree().leaf_count(), 1 + (k - 1) * 99);
        }
    }

    #[test]
    fn weight_audits_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let alpha = Ratio::new(3i64, 10);
        let beta = Ratio::new(7i64, 5);
        let s = grow_ford(0.3, 60, &mut rng).unwrap();
        let m = grow_marchal(1.4, 60, &mut rng).unwrap();
        for k in 1..=60 {
            let t = s.tree_at(k).unwrap();
            let mut w = Ratio::from_integer(0);
            for v in 1..t.len() {
                w += if t.is_leaf(v) { Ratio::from_integer(1) - alpha } else { alpha };
            }
            assert_eq!(w, Ratio::from_integer(k as i64) - alpha);
            let t = m.tree_at(k).unwrap();
            let mut w = Ratio::from_integer(t.n_edges() as i64) * (beta - 1);
            for v in 1..t.len() {
                let d = t.out_degree(v) as i64 + 1;
                if d >= 3 {
                    w += Ratio::from_integer(d - 1) - beta;
                }
            }
            assert_eq!(w, Ratio::from_integer(k as i64) * beta - 1);
            assert!((total_weight(GrowthModel::Marchal(1.4), &t) - (k as f64 * 1.4 - 1.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn parse_models() {
        assert_eq!(GrowthModel::parse("ford:alpha=0.3").unwrap(), GrowthModel::Ford(0.3));
        assert_eq!(GrowthModel::parse("kary:k=3").unwrap(), GrowthModel::Kary(3));
        assert_eq!(GrowthModel::parse("remy").unwrap(), GrowthModel::Remy);
        assert!(GrowthModel::parse("marchal:beta=2.5").is_err());
        assert!(GrowthModel::parse("ford:beta=0.3").is_err());
        assert_eq!(GrowthModel::Ford(0.3).to_string(), "ford:alpha=0.3");
    }

    #[test]
    fn comb_at_alpha_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = grow_ford(1.0, 30, &mut rng).unwrap().final_tree();
        assert_eq!(t.height(), 30);
    }
}
