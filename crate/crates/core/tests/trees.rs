use std::collections::{HashMap, HashSet};

use mbtree_core::ensembles::{enumerate_ordered, enumerate_unordered, otter_counts};
use mbtree_core::RootedTree;
use proptest::prelude::*;

/// All bijections fixing the root, checking parent preservation.
fn isomorphic_brute(a: &RootedTree, b: &RootedTree) -> bool {
    let n = a.len();
    if n != b.len() {
        return false;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    fn rec(i: usize, perm: &mut Vec<usize>, a: &RootedTree, b: &RootedTree) -> bool {
        if i == perm.len() {
            return true;
        }
        for j in i..perm.len() {
            perm.swap(i, j);
            // Parents precede children in preorder, so `a.parent(i)` is fixed.
            let ok = match a.parent(i) {
                None => perm[i] == b.root(),
                Some(p) => b.parent(perm[i]) == Some(perm[p]),
            };
            if ok && rec(i + 1, perm, a, b) {
                return true;
            }
            perm.swap(i, j);
        }
        false
    }
    rec(0, &mut perm, a, b)
}

#[test]
fn canonical_code_agrees_with_brute_force_isomorphism() {
    for n in 1..=7 {
        let trees = enumerate_ordered(n).unwrap();
        let codes: Vec<_> = trees.iter().map(|t| t.canonical_code()).collect();
        for i in 0..trees.len() {
            for j in i..trees.len() {
                assert_eq!(
                    codes[i] == codes[j],
                    isomorphic_brute(&trees[i], &trees[j]),
                    "n = {n}: {:?} vs {:?}",
                    trees[i].parent_array(),
                    trees[j].parent_array()
                );
            }
        }
        let classes: HashSet<_> = codes.into_iter().collect();
        let counts = otter_counts(n).unwrap();
        assert_eq!(classes.len(), usize::try_from(&counts[n - 1]).unwrap());
        assert_eq!(enumerate_unordered(n).unwrap().len(), classes.len());
    }
}

fn parent_vectors() -> impl Strategy<Value = Vec<Option<usize>>> {
    (1usize..40).prop_flat_map(|n| {
        let picks: Vec<_> = (1..n).map(|i| 0..i).collect();
        picks.prop_map(|ps| {
            let mut v = vec![None];
            v.extend(ps.into_iter().map(Some));
            v
        })
    })
}

proptest! {
    #[test]
    fn structural_invariants(parents in parent_vectors()) {
        let t = RootedTree::from_parents(&parents).unwrap();
        let n = t.len();
        prop_assert_eq!(n, parents.len());
        prop_assert_eq!(t.n_edges(), n - 1);
        prop_assert_eq!(t.subtree_sizes()[t.root()], n);
        let degree_sum: usize = (0..n).map(|v| t.out_degree(v)).sum();
        prop_assert_eq!(degree_sum, n - 1);
        prop_assert_eq!(t.height(), *t.depths().iter().max().unwrap());
        prop_assert!(t.diameter() >= t.height() && t.diameter() <= 2 * t.height());
        for leaf in t.leaves() {
            let spine = t.sizes_along_spine(leaf).unwrap();
            prop_assert_eq!(spine.len(), t.depth(leaf) + 1);
            prop_assert!(spine.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn canonical_code_ignores_labels(parents in parent_vectors(), seed in any::<u64>()) {
        let t = RootedTree::from_parents(&parents).unwrap();
        // Relabel non-root vertices by a permutation that keeps parents first.
        let n = t.len();
        let mut order: Vec<usize> = (1..n).collect();
        let mut s = seed;
        for i in (1..order.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        // Topological order by depth keeps parents ahead of children.
        let depths = t.depths();
        order.sort_by_key(|&v| depths[v]);
        let mut new_id = vec![0usize; n];
        for (i, &v) in order.iter().enumerate() {
            new_id[v] = i + 1;
        }
        let mut relabeled = vec![None; n];
        for v in 1..n {
            relabeled[new_id[v]] = Some(new_id[t.parent(v).unwrap()]);
        }
        let u = RootedTree::from_parents(&relabeled).unwrap();
        prop_assert_eq!(t.canonical_code(), u.canonical_code());
        prop_assert_eq!(t.canonical_code().to_tree().canonical_code(), t.canonical_code());
        prop_assert_eq!(t.canonical_form(), u.canonical_form());
    }

    #[test]
    fn json_round_trip(parents in parent_vectors()) {
        let t = RootedTree::from_parents(&parents).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let prefixed = s.starts_with(r#"{"parents":[-1"#);
        prop_assert!(prefixed);
        let back: RootedTree = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(back, t);
    }
}

#[test]
fn rejects_malformed_parent_arrays() {
    for bad in [vec![0i64, 0], vec![-1, -1], vec![-1, 2, 1], vec![-1, 5], vec![]] {
        let s = serde_json::to_string(&HashMap::from([("parents", bad.clone())])).unwrap();
        assert!(serde_json::from_str::<RootedTree>(&s).is_err(), "{bad:?}");
    }
}
