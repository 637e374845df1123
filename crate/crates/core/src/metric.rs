//! Finite measured metric trees and Gromov–Hausdorff(–Prokhorov) distances
//! between small instances.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tree::RootedTree;

/// Point-count cap per space for [`gh_rooted`].
pub const GH_EXACT_MAX: usize = 7;

/// Point-count cap for [`prokhorov`].
pub const PROKHOROV_MAX: usize = 12;

/// How the probability measure of [`MeasuredMetricTree::from_discrete`] is
/// spread.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Weights {
    LeafUniform,
    VertexUniform,
}

/// A finite rooted tree metric `(T, d, ρ, μ)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredMetricTree {
    n: usize,
    dist: Vec<f64>,
    root: usize,
    weight: Vec<f64>,
}

impl MeasuredMetricTree {
    /// Validates the metric axioms, the four-point condition and the
    /// weights. `dist` is row-major `n × n`.
    pub fn new(dist: Vec<f64>, root: usize, weight: Vec<f64>) -> Result<Self> {
        let n = weight.len();
        if n == 0 || dist.len() != n * n || root >= n {
            return Err(invalid("distance matrix, root and weights disagree in size"));
        }
        let d = |i: usize, j: usize| dist[i * n + j];
        for i in 0..n {
            if d(i, i) != 0.0 {
                return Err(invalid(format!("d({i}, {i}) ≠ 0")));
            }
            for j in 0..n {
                if !(d(i, j) >= 0.0) || (d(i, j) - d(j, i)).abs() > 1e-12 {
                    return Err(invalid(format!("d({i}, {j}) is negative or asymmetric")));
                }
                for k in 0..n {
                    if d(i, k) > d(i, j) + d(j, k) + 1e-12 {
                        return Err(invalid(format!("triangle inequality fails at {i}, {j}, {k}")));
                    }
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    for w in 0..n {
                        let a = d(x, y) + d(z, w);
                        let b = d(x, z) + d(y, w);
                        let c = d(x, w) + d(y, z);
                        if a > b.max(c) + 1e-9 {
                            return Err(invalid("four-point condition fails: not a tree metric"));
                        }
                    }
                }
            }
        }
        let total: f64 = weight.iter().sum();
        if weight.iter().any(|&w| !(w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}")));
        }
        Ok(MeasuredMetricTree { n, dist, root, weight })
    }

    /// Graph distances times `edge_scale` on the vertices of `t`.
    pub fn from_discrete(t: &RootedTree, edge_scale: f64, weights: Weights) -> Result<Self> {
        if !(edge_scale > 0.0) {
            return Err(invalid(format!("edge scale must be positive, got {edge_scale}")));
        }
        let n = t.len();
        let mut dist = vec![0.0; n * n];
        let mut queue = Vec::with_capacity(n);
        for s in 0..n {
            let mut seen = vec![usize::MAX; n];
            seen[s] = 0;
            queue.clear();
            queue.push(s);
            let mut head = 0;
            while head < queue.len() {
                let v = queue[head];
                head += 1;
                let nbrs = t.children(v).iter().copied().chain(t.parent(v));
                for u in nbrs {
                    if seen[u] == usize::MAX {
                        seen[u] = seen[v] + 1;
                        queue.push(u);
                    }
                }
            }
            for u in 0..n {
                dist[s * n + u] = seen[u] as f64 * edge_scale;
            }
        }
        let weight = match weights {
            Weights::VertexUniform => vec![1.0 / n as f64; n],
            Weights::LeafUniform => {
                let leaves = t.leaves();
                let mut w = vec![0.0; n];
                if leaves.is_empty() {
                    w[t.root()] = 1.0;
                } else {
                    for &l in &leaves {
                        w[l] = 1.0 / leaves.len() as f64;
                    }
                }
                w
            }
        };
        Ok(MeasuredMetricTree {
            n,
            dist,
            root: t.root(),
            weight,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    /// `max_x d(ρ, x)`.
    pub fn height(&self) -> f64 {
        (0..self.n).map(|x| self.dist(self.root, x)).fold(0.0, f64::max)
    }

    pub fn diameter(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// `(T, a d, ρ, μ)`.
    pub fn scaled(&self, a: f64) -> Self {
        MeasuredMetricTree {
            dist: self.dist.iter().map(|d| d * a).collect(),
            ..self.clone()
        }
    }
}

/// Distortion of a correspondence given as pairs.
fn distortion(a: &MeasuredMetricTree, b: &MeasuredMetricTree, pairs: &[(usize, usize)]) -> f64 {
    let mut m: f64 = 0.0;
    for &(x, y) in pairs {
        for &(x2, y2) in pairs {
            m = m.max((a.dist(x, x2) - b.dist(y, y2)).abs());
        }
    }
    m
}

/// Search for a correspondence with distortion at most `delta` that pairs
/// the roots. Returns its pairs.
fn feasible(a: &MeasuredMetricTree, b: &MeasuredMetricTree, delta: f64) -> Option<Vec<(usize, usize)>> {
    // Slots: every point of `a` needs a partner, then every point of `b`.
    let mut slots: Vec<(bool, usize)> = Vec::with_capacity(a.n + b.n);
    slots.extend((0..a.n).filter(|&x| x != a.root).map(|x| (true, x)));
    slots.extend((0..b.n).filter(|&y| y != b.root).map(|y| (false, y)));
    let ok = |pairs: &[(usize, usize)], x: usize, y: usize| {
        pairs
            .iter()
            .all(|&(x2, y2)| (a.dist(x, x2) - b.dist(y, y2)).abs() <= delta)
    };
    fn rec(
        i: usize,
        slots: &[(bool, usize)],
        pairs: &mut Vec<(usize, usize)>,
        a_n: usize,
        b_n: usize,
        ok: &dyn Fn(&[(usize, usize)], usize, usize) -> bool,
    ) -> bool {
        let Some(&(in_a, p)) = slots.get(i) else {
            return true;
        };
        // Already covered by an earlier pair.
        if pairs.iter().any(|&(x, y)| if in_a { x == p } else { y == p }) {
            return rec(i + 1, slots, pairs, a_n, b_n, ok);
        }
        let range = if in_a { b_n } else { a_n };
        for q in 0..range {
            let (x, y) = if in_a { (p, q) } else { (q, p) };
            if ok(pairs, x, y) {
                pairs.push((x, y));
                if rec(i + 1, slots, pairs, a_n, b_n, ok) {
                    return true;
                }
                pairs.pop();
            }
        }
        false
    }
    let mut pairs = vec![(a.root, b.root)];
    rec(0, &slots, &mut pairs, a.n, b.n, &ok).then_some(pairs)
}

fn check_exact_size(a: &MeasuredMetricTree, b: &MeasuredMetricTree) -> Result<()> {
    let big = a.n.max(b.n);
    if big > GH_EXACT_MAX {
        return Err(Error::SizeCap {
            what: "exact Gromov–Hausdorff points",
            size: big,
            limit: GH_EXACT_MAX,
        });
    }
    Ok(())
}

/// Optimal root-pairing correspondence and its distortion.
fn optimal_correspondence(
    a: &MeasuredMetricTree,
    b: &MeasuredMetricTree,
) -> Result<(f64, Vec<(usize, usize)>)> {
    check_exact_size(a, b)?;
    // The optimum is one of the values |d(x, x') − d'(y, y')|.
    let mut cand: Vec<f64> = vec![0.0];
    for &u in &a.dist {
        for &v in &b.dist {
            cand.push((u - v).abs());
        }
    }
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    let (mut lo, mut hi) = (0usize, cand.len() - 1);
    let mut best = feasible(a, b, cand[hi]).expect("the full correspondence is feasible");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match feasible(a, b, cand[mid]) {
            Some(p) => {
                hi = mid;
                best = p;
            }
            None => lo = mid + 1,
        }
    }
    Ok((cand[hi], best))
}

/// Rooted Gromov–Hausdorff distance: half the least distortion of a
/// correspondence pairing the roots. Exact, for at most
/// [`GH_EXACT_MAX`] points per space.
pub fn gh_rooted(a: &MeasuredMetricTree, b: &MeasuredMetricTree) -> Result<f64> {
    Ok(0.5 * optimal_correspondence(a, b)?.0)
}

/// Greedy correspondence: points in order of height are paired with the
/// partner that adds the least distortion.
fn greedy_correspondence(a: &MeasuredMetricTree, b: &MeasuredMetricTree) -> Vec<(usize, usize)> {
    let mut pairs = vec![(a.root, b.root)];
    let mut order_a: Vec<usize> = (0..a.n).filter(|&x| x != a.root).collect();
    order_a.sort_by(|&x, &y| a.dist(a.root, x).total_cmp(&a.dist(a.root, y)));
    let mut order_b: Vec<usize> = (0..b.n).filter(|&y| y != b.root).collect();
    order_b.sort_by(|&x, &y| b.dist(b.root, x).total_cmp(&b.dist(b.root, y)));
    let cost = |pairs: &[(usize, usize)], x: usize, y: usize| {
        pairs
            .iter()
            .map(|&(x2, y2)| (a.dist(x, x2) - b.dist(y, y2)).abs())
            .fold(0.0, f64::max)
    };
    for x in order_a {
        let y = (0..b.n)
            .min_by(|&y1, &y2| cost(&pairs, x, y1).total_cmp(&cost(&pairs, x, y2)))
            .unwrap();
        pairs.push((x, y));
    }
    for y in order_b {
        if pairs.iter().any(|&(_, y2)| y2 == y) {
            continue;
        }
        let x = (0..a.n)
            .min_by(|&x1, &x2| cost(&pairs, x1, y).total_cmp(&cost(&pairs, x2, y)))
            .unwrap();
        pairs.push((x, y));
    }
    pairs
}

/// Upper bound on the rooted Gromov–Hausdorff distance from a greedy
/// correspondence, for spaces of any size.
pub fn gh_upper(a: &MeasuredMetricTree, b: &MeasuredMetricTree) -> f64 {
    let greedy = distortion(a, b, &greedy_correspondence(a, b));
    // Pairing everything with everything costs at most the larger diameter.
    0.5 * greedy.min(a.diameter().max(b.diameter()))
}

/// Prokhorov distance between two probability vectors on the metric `d`
/// (row-major `n × n`), exact for at most [`PROKHOROV_MAX`] points.
pub fn prokhorov(mu: &[f64], nu: &[f64], dist: &[f64]) -> Result<f64> {
    let n = mu.len();
    if nu.len() != n || dist.len() != n * n {
        return Err(invalid("measures and distance matrix disagree in size"));
    }
    if n > PROKHOROV_MAX {
        return Err(Error::SizeCap {
            what: "Prokhorov points",
            size: n,
            limit: PROKHOROV_MAX,
        });
    }
    let mut radii: Vec<f64> = dist.iter().copied().filter(|&d| d > 0.0).collect();
    radii.push(0.0);
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    // For ε in (r_i, r_{i+1}] the open ε-neighbourhood of F is the closed
    // r_i-neighbourhood, so the worst mass gap h_i is constant there.
    let mut best = 1.0f64;
    for (i, &r) in radii.iter().enumerate() {
        let next = radii.get(i + 1).copied().unwrap_or(f64::INFINITY);
        let mut h: f64 = 0.0;
        for set in 1u32..(1 << n) {
            let (mut in_mu, mut in_nu, mut fat_mu, mut fat_nu) = (0.0, 0.0, 0.0, 0.0);
            for x in 0..n {
                if set >> x & 1 == 1 {
                    in_mu += mu[x];
                    in_nu += nu[x];
                }
                let near = (0..n).any(|y| set >> y & 1 == 1 && dist[x * n + y] <= r);
                if near {
                    fat_mu += mu[x];
                    fat_nu += nu[x];
                }
            }
            h = h.max(in_mu - fat_nu).max(in_nu - fat_mu);
        }
        if h <= next {
            best = best.min(r.max(h));
        }
    }
    Ok(best.max(0.0))
}

/// Upper bound on the rooted Gromov–Hausdorff–Prokhorov distance: for
/// the greedy and (when small) optimal correspondences, glue the spaces at
/// half the distortion and take the larger of that and the Prokhorov
/// distance between the two measures in the glued space.
pub fn ghp_upper(a: &MeasuredMetricTree, b: &MeasuredMetricTree) -> Result<f64> {
    let mut candidates = vec![greedy_correspondence(a, b)];
    if a.n.max(b.n) <= GH_EXACT_MAX {
        candidates.push(optimal_correspondence(a, b)?.1);
    }
    let mut best = f64::INFINITY;
    for pairs in candidates {
        let dis = distortion(a, b, &pairs);
        let glued = glue(a, b, &pairs, 0.5 * dis);
        let n = a.n + b.n;
        let mut mu = a.weight.clone();
        mu.resize(n, 0.0);
        let mut nu = vec![0.0; a.n];
        nu.extend_from_slice(&b.weight);
        let p = if n <= PROKHOROV_MAX {
            prokhorov(&mu, &nu, &glued)?
        } else {
            coupling_bound(&mu, &nu, &glued, n)
        };
        best = best.min((0.5 * dis).max(p));
    }
    Ok(best)
}

/// Metric on the disjoint union making both inclusions isometric:
/// `d(x, y) = min_{(x', y') ∈ R} d(x, x') + r + d'(y', y)`.
fn glue(a: &MeasuredMetricTree, b: &MeasuredMetricTree, pairs: &[(usize, usize)], r: f64) -> Vec<f64> {
    let n = a.n + b.n;
    let mut d = vec![0.0; n * n];
    for x in 0..a.n {
        for x2 in 0..a.n {
            d[x * n + x2] = a.dist(x, x2);
        }
    }
    for y in 0..b.n {
        for y2 in 0..b.n {
            d[(a.n + y) * n + a.n + y2] = b.dist(y, y2);
        }
    }
    for x in 0..a.n {
        for y in 0..b.n {
            let v = pairs
                .iter()
                .map(|&(x2, y2)| a.dist(x, x2) + r + b.dist(y2, y))
                .fold(f64::INFINITY, f64::min);
            d[x * n + a.n + y] = v;
            d[(a.n + y) * n + x] = v;
        }
    }
    d
}

/// `min_ε max(ε, π(d > ε))` for a greedy coupling `π`, which bounds the
/// Prokhorov distance from above.
fn coupling_bound(mu: &[f64], nu: &[f64], d: &[f64], n: usize) -> f64 {
    let mut left_mu = mu.to_vec();
    let mut left_nu = nu.to_vec();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|x| (0..n).map(move |y| (x, y)))
        .collect();
    pairs.sort_by(|p, q| d[p.0 * n + p.1].total_cmp(&d[q.0 * n + q.1]));
    let mut plan: Vec<(f64, f64)> = Vec::new();
    for (x, y) in pairs {
        let m = left_mu[x].min(left_nu[y]);
        if m > 0.0 {
            left_mu[x] -= m;
            left_nu[y] -= m;
            plan.push((d[x * n + y], m));
        }
    }
    let mut best: f64 = 1.0;
    let mut tail: f64 = plan.iter().map(|e| e.1).sum();
    for (dist, m) in &plan {
        best = best.min(dist.max(tail));
        tail -= m;
    }
    best.min(plan.last().map_or(0.0, |e| e.0).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(parents: &[Option<usize>]) -> RootedTree {
        RootedTree::from_parents(parents).unwrap()
    }

    fn cherry() -> MeasuredMetricTree {
        MeasuredMetricTree::from_discrete(&tree(&[None, Some(0), Some(0)]), 1.0, Weights::LeafUniform)
            .unwrap()
    }

    fn path3() -> MeasuredMetricTree {
        MeasuredMetricTree::from_discrete(&RootedTree::path(3).unwrap(), 1.0, Weights::LeafUniform)
            .unwrap()
    }

    fn segment(len: f64) -> MeasuredMetricTree {
        MeasuredMetricTree::new(vec![0.0, len, len, 0.0], 0, vec![0.0, 1.0]).unwrap()
    }

    #[test]
    fn discrete_metrics() {
        let c = cherry();
        assert_eq!(c.dist(1, 2), 2.0);
        let p = MeasuredMetricTree::from_discrete(&RootedTree::path(3).unwrap(), 0.5, Weights::VertexUniform)
            .unwrap();
        assert_eq!(p.height(), 1.0);
        let s = MeasuredMetricTree::from_discrete(&RootedTree::star(5), 1.0, Weights::LeafUniform).unwrap();
        assert_eq!(s.weights()[0], 0.0);
        assert!(s.weights()[1..].iter().all(|&w| (w - 0.2).abs() < 1e-15));
        let again = MeasuredMetricTree::new(s.dist.clone(), 0, s.weight.clone());
        assert!(again.is_ok());
    }

    #[test]
    fn rejects_non_tree_metrics() {
        // A 4-cycle with unit edges is not a tree metric.
        let d = vec![
            0.0, 1.0, 2.0, 1.0, //
            1.0, 0.0, 1.0, 2.0, //
            2.0, 1.0, 0.0, 1.0, //
            1.0, 2.0, 1.0, 0.0,
        ];
        assert!(MeasuredMetricTree::new(d, 0, vec![0.25; 4]).is_err());
    }

    #[test]
    fn gh_small_cases() {
        assert_eq!(gh_rooted(&cherry(), &cherry()).unwrap(), 0.0);
        assert_eq!(gh_rooted(&segment(1.0), &segment(3.0)).unwrap(), 1.0);
        assert_eq!(gh_rooted(&cherry(), &path3()).unwrap(), 0.5);
        assert!(gh_upper(&cherry(), &path3()) >= 0.5);
        let star = MeasuredMetricTree::from_discrete(&RootedTree::star(8), 1.0, Weights::LeafUniform)
            .unwrap();
        assert!(gh_rooted(&star, &cherry()).is_err());
    }

    #[test]
    fn prokhorov_point_masses() {
        for d in [0.3, 0.9, 1.0, 2.5] {
            let dist = vec![0.0, d, d, 0.0];
            let p = prokhorov(&[1.0, 0.0], &[0.0, 1.0], &dist).unwrap();
            assert!((p - d.min(1.0)).abs() < 1e-15, "{d}: {p}");
        }
        let dist = vec![0.0, 1.0, 1.0, 0.0];
        assert_eq!(prokhorov(&[0.5, 0.5], &[0.5, 0.5], &dist).unwrap(), 0.0);
        // Moving mass 0.2 a long way costs 0.2.
        let dist = vec![0.0, 5.0, 5.0, 0.0];
        let p = prokhorov(&[1.0, 0.0], &[0.8, 0.2], &dist).unwrap();
        assert!((p - 0.2).abs() < 1e-15);
    }

    #[test]
    fn ghp_bounds_gh() {
        let (c, p) = (cherry(), path3());
        let ghp = ghp_upper(&c, &p).unwrap();
        assert!(ghp >= gh_rooted(&c, &p).unwrap());
        assert_eq!(ghp_upper(&c, &c).unwrap(), 0.0);
    }

    #[test]
    fn scaling() {
        let (c, p) = (cherry(), path3());
        let g = gh_rooted(&c, &p).unwrap();
        for a in [0.5, 2.0] {
            assert_eq!(gh_rooted(&c.scaled(a), &p.scaled(a)).unwrap(), a * g);
            assert_eq!(c.scaled(a).height(), a * c.height());
        }
    }
}
