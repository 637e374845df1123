//! Edge-deletion procedure on a tree and the genealogy of its components.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore};

use crate::ensembles::{sample_cayley, sample_recursive};
use crate::error::{invalid, Result};
use crate::splitting::IntPartition;
use crate::tree::RootedTree;

/// Genealogy of the components created by deleting every edge of a tree.
///
/// Each vertex of `tree` is a component; leaves are singletons and
/// `leaf_vertex` gives the original vertex for each of them.
#[derive(Clone, Debug)]
pub struct CutTree {
    pub tree: RootedTree,
    pub leaf_vertex: Vec<Option<usize>>,
    pub cuts_to_isolate_root: usize,
}

impl CutTree {
    /// Original vertices of the component at cut-tree vertex `v`, sorted.
    pub fn component(&self, v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![v];
        while let Some(u) = stack.pop() {
            if let Some(x) = self.leaf_vertex[u] {
                out.push(x);
            }
            stack.extend_from_slice(self.tree.children(u));
        }
        out.sort_unstable();
        out
    }
}

/// Minimal union-find keeping, for each class, the cut-tree node built so far.
struct Dsu {
    parent: Vec<usize>,
    node: Vec<usize>,
}

impl Dsu {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

/// Cut-tree for a given deletion order. Edges are named by their lower
/// vertex; `order` lists each non-root vertex once.
pub fn cut_tree_with_order(t: &RootedTree, order: &[usize]) -> Result<CutTree> {
    let n = t.len();
    if order.len() != n - 1 {
        return Err(invalid(format!(
            "deletion order has {} edges, the tree has {}",
            order.len(),
            n - 1
        )));
    }
    let mut seen = vec![false; n];
    for &e in order {
        if e == t.root() || e >= n || std::mem::replace(&mut seen[e], true) {
            return Err(invalid(format!("bad edge {e} in deletion order")));
        }
    }
    // Nodes 0..n are singletons; node n + i merges the two sides of the
    // (n − 1 − i)-th deletion.
    let mut parents: Vec<Option<usize>> = vec![None; 2 * n - 1];
    let mut dsu = Dsu {
        parent: (0..n).collect(),
        node: (0..n).collect(),
    };
    let mut next = n;
    for &e in order.iter().rev() {
        let p = t.parent(e).unwrap();
        let (a, b) = (dsu.find(p), dsu.find(e));
        parents[dsu.node[a]] = Some(next);
        parents[dsu.node[b]] = Some(next);
        dsu.parent[b] = a;
        dsu.node[a] = next;
        next += 1;
    }
    let (tree, map) = RootedTree::from_parents_with_map(&parents)?;
    let leaf_vertex: Vec<Option<usize>> = map.iter().map(|&old| (old < n).then_some(old)).collect();
    let root_leaf = leaf_vertex
        .iter()
        .position(|&x| x == Some(t.root()))
        .expect("root appears as a leaf");
    let cuts_to_isolate_root = tree.depth(root_leaf);
    Ok(CutTree {
        tree,
        leaf_vertex,
        cuts_to_isolate_root,
    })
}

/// Cut-tree for a uniform deletion order.
pub fn cut_tree(t: &RootedTree, rng: &mut dyn RngCore) -> Result<CutTree> {
    let mut order: Vec<usize> = (1..t.len()).collect();
    order.shuffle(rng);
    cut_tree_with_order(t, &order)
}

/// Number of deletions hitting the root's component before the root is
/// isolated, without building the cut-tree.
pub fn cuts_to_isolate_root(t: &RootedTree, rng: &mut dyn RngCore) -> usize {
    let mut order: Vec<usize> = (1..t.len()).collect();
    order.shuffle(rng);
    // An edge hits the root's component when no earlier deletion lies on
    // the path from it to the root.
    let mut cut = vec![false; t.len()];
    let mut count = 0;
    for e in order {
        let mut v = e;
        let mut blocked = false;
        while let Some(p) = t.parent(v) {
            if cut[v] && v != e {
                blocked = true;
                break;
            }
            v = p;
        }
        cut[e] = true;
        if !blocked {
            count += 1;
        }
    }
    count
}

/// Base trees for the deletion procedure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CutBase {
    Cayley,
    Recursive,
}

impl CutBase {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "cayley" => Ok(CutBase::Cayley),
            "recursive" => Ok(CutBase::Recursive),
            _ => Err(crate::Error::FamilySpec(format!("unknown cut base {s:?}"))),
        }
    }

    pub fn sample(&self, n: usize, rng: &mut dyn RngCore) -> Result<RootedTree> {
        Ok(match self {
            CutBase::Cayley => sample_cayley(n, rng)?.tree,
            CutBase::Recursive => sample_recursive(n, rng)?.tree,
        })
    }
}

/// Empirical law of the component sizes after the first deletion.
pub fn first_split_law(
    base: CutBase,
    n: usize,
    reps: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<(IntPartition, f64)>> {
    if n < 2 {
        return Err(invalid("the first cut needs n ≥ 2"));
    }
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for _ in 0..reps {
        let t = base.sample(n, rng)?;
        let e = rng.random_range(1..n);
        let below = t.subtree_sizes()[e];
        *counts.entry(below.max(n - below)).or_insert(0) += 1;
    }
    let mut out: Vec<(IntPartition, f64)> = counts
        .into_iter()
        .map(|(k, c)| (IntPartition::binary(n, k), c as f64 / reps as f64))
        .collect();
    out.sort_by(|a, b| b.0.cmp(&a.0));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    #[test]
    fn single_edge_and_path() {
        let edge = RootedTree::path(2).unwrap();
        let c = cut_tree_with_order(&edge, &[1]).unwrap();
        assert_eq!(c.tree.len(), 3);
        assert_eq!(c.tree.leaf_count(), 2);
        assert_eq!(c.cuts_to_isolate_root, 1);
        let path = RootedTree::path(3).unwrap();
        assert_eq!(cut_tree_with_order(&path, &[1, 2]).unwrap().cuts_to_isolate_root, 1);
        assert_eq!(cut_tree_with_order(&path, &[2, 1]).unwrap().cuts_to_isolate_root, 2);
        let single = cut_tree_with_order(&RootedTree::single(), &[]).unwrap();
        assert_eq!(single.cuts_to_isolate_root, 0);
    }

    /// A seven-vertex instance with its deletion order and component
    /// genealogy worked out by hand.
    #[test]
    fn seven_vertex_instance() {
        // 0 → 1, 4; 1 → 2, 3; 4 → 5; 5 → 6 (already in preorder).
        let t = RootedTree::from_parents(&[None, Some(0), Some(1), Some(1), Some(0), Some(4), Some(5)])
            .unwrap();
        let c = cut_tree_with_order(&t, &[2, 4, 5, 1, 6, 3]).unwrap();
        let splits: BTreeSet<(Vec<usize>, BTreeSet<Vec<usize>>)> = (0..c.tree.len())
            .filter(|&v| !c.tree.children(v).is_empty())
            .map(|v| {
                let kids = c.tree.children(v).iter().map(|&k| c.component(k)).collect();
                (c.component(v), kids)
            })
            .collect();
        let expect: BTreeSet<(Vec<usize>, BTreeSet<Vec<usize>>)> = [
            (vec![0, 1, 2, 3, 4, 5, 6], vec![vec![0, 1, 3, 4, 5, 6], vec![2]]),
            (vec![0, 1, 3, 4, 5, 6], vec![vec![0, 1, 3], vec![4, 5, 6]]),
            (vec![4, 5, 6], vec![vec![4], vec![5, 6]]),
            (vec![0, 1, 3], vec![vec![0], vec![1, 3]]),
            (vec![5, 6], vec![vec![5], vec![6]]),
            (vec![1, 3], vec![vec![1], vec![3]]),
        ]
        .into_iter()
        .map(|(a, b)| (a, b.into_iter().collect()))
        .collect();
        assert_eq!(splits, expect);
        assert_eq!(c.cuts_to_isolate_root, 3);
    }

    #[test]
    fn cut_trees_are_binary() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for n in [2, 5, 40, 300] {
            let t = CutBase::Cayley.sample(n, &mut rng).unwrap();
            let c = cut_tree(&t, &mut rng).unwrap();
            assert_eq!(c.tree.len(), 2 * n - 1);
            assert_eq!(c.tree.leaf_count(), n);
            assert!((0..c.tree.len()).all(|v| matches!(c.tree.out_degree(v), 0 | 2)));
        }
    }

    #[test]
    fn direct_count_matches_cut_tree_depth() {
        let t = CutBase::Recursive.sample(60, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        for seed in 0..50 {
            let a = cut_tree(&t, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = cuts_to_isolate_root(&t, &mut ChaCha8Rng::seed_from_u64(seed));
            assert_eq!(a.cuts_to_isolate_root, b);
        }
    }

    #[test]
    fn path_isolation_is_fair() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let path = RootedTree::path(3).unwrap();
        let ones = (0..20_000)
            .filter(|_| cut_tree(&path, &mut rng).unwrap().cuts_to_isolate_root == 1)
            .count();
        assert!((ones as f64 / 20_000.0 - 0.5).abs() < 0.015);
    }

    #[test]
    fn first_split_of_two() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let law = first_split_law(CutBase::Cayley, 2, 100, &mut rng).unwrap();
        assert_eq!(law, vec![(IntPartition::binary(2, 1), 1.0)]);
    }
}
