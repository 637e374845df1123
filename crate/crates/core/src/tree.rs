//! Finite rooted trees.
//!
//! A [`RootedTree`] is stored as a parent array plus ordered children lists.
//! Every constructor normalizes the vertex numbering to depth-first preorder,
//! so the root is vertex 0 and `parent(v) < v` for every other vertex. The
//! order of children is preserved, which lets the same type carry ordered
//! (plane) trees; [`CanonicalCode`] forgets that order.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ParentArray", into = "ParentArray")]
pub struct RootedTree {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

/// Interchange form: `{"parents":[-1,0,0,...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ParentArray {
    pub parents: Vec<i64>,
}

impl TryFrom<ParentArray> for RootedTree {
    type Error = Error;

    fn try_from(value: ParentArray) -> Result<Self> {
        RootedTree::from_parent_array(&value.parents)
    }
}

impl From<RootedTree> for ParentArray {
    fn from(t: RootedTree) -> Self {
        ParentArray {
            parents: t.parent_array(),
        }
    }
}

impl RootedTree {
    /// The tree reduced to its root.
    pub fn single() -> Self {
        RootedTree {
            parent: vec![None],
            children: vec![Vec::new()],
        }
    }

    /// Path with `n` vertices rooted at one end.
    pub fn path(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidTree("a tree needs at least one vertex".into()));
        }
        let parents: Vec<Option<usize>> = (0..n).map(|v| v.checked_sub(1)).collect();
        Self::from_parents(&parents)
    }

    /// Root with `k` leaf children.
    pub fn star(k: usize) -> Self {
        let mut parents = vec![None];
        parents.extend(std::iter::repeat(Some(0)).take(k));
        Self::from_parents(&parents).expect("star is a valid tree")
    }

    /// Builds a tree from a parent array in arbitrary vertex order.
    ///
    /// Children are ordered by their index in the input.
    pub fn from_parents(parents: &[Option<usize>]) -> Result<Self> {
        Ok(Self::from_parents_with_map(parents)?.0)
    }

    /// Like [`from_parents`](Self::from_parents) but also returns, for each
    /// normalized vertex, its index in the input.
    pub fn from_parents_with_map(parents: &[Option<usize>]) -> Result<(Self, Vec<usize>)> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::InvalidTree("empty parent array".into()));
        }
        let mut root = None;
        let mut children = vec![Vec::new(); n];
        for (v, p) in parents.iter().enumerate() {
            match p {
                None => {
                    if root.replace(v).is_some() {
                        return Err(Error::InvalidTree("more than one root".into()));
                    }
                }
                Some(p) if *p >= n => {
                    return Err(Error::InvalidTree(format!("parent {p} of {v} out of range")))
                }
                Some(p) if *p == v => {
                    return Err(Error::InvalidTree(format!("vertex {v} is its own parent")))
                }
                Some(p) => children[*p].push(v),
            }
        }
        let root = root.ok_or_else(|| Error::InvalidTree("no root".into()))?;
        Self::from_children_with_map(root, children)
    }

    /// Parses the interchange parent array, where the root is marked `-1`.
    pub fn from_parent_array(parents: &[i64]) -> Result<Self> {
        let parsed = parents
            .iter()
            .map(|&p| match p {
                -1 => Ok(None),
                p if p >= 0 => Ok(Some(p as usize)),
                p => Err(Error::InvalidTree(format!("invalid parent entry {p}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parents(&parsed)
    }

    /// Builds a tree from ordered children lists and a root, renumbering the
    /// vertices in preorder. Returns the map from new to old indices.
    pub fn from_children_with_map(
        root: usize,
        children: Vec<Vec<usize>>,
    ) -> Result<(Self, Vec<usize>)> {
        let n = children.len();
        let mut new_id = vec![usize::MAX; n];
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![root];
        while let Some(v) = stack.pop() {
            if new_id[v] != usize::MAX {
                return Err(Error::InvalidTree(format!("vertex {v} reached twice")));
            }
            new_id[v] = order.len();
            order.push(v);
            stack.extend(children[v].iter().rev().copied());
        }
        if order.len() != n {
            return Err(Error::InvalidTree(format!(
                "{} of {n} vertices are not connected to the root",
                n - order.len()
            )));
        }
        let mut parent = vec![None; n];
        let mut new_children = vec![Vec::new(); n];
        for (new_v, &old_v) in order.iter().enumerate() {
            let kids: Vec<usize> = children[old_v].iter().map(|&c| new_id[c]).collect();
            for &c in &kids {
                parent[c] = Some(new_v);
            }
            new_children[new_v] = kids;
        }
        Ok((
            RootedTree {
                parent,
                children: new_children,
            },
            order,
        ))
    }

    /// Builds the ordered tree whose preorder out-degree sequence is `degrees`
    /// (its Łukasiewicz word).
    pub fn from_lukasiewicz(degrees: &[usize]) -> Result<Self> {
        let n = degrees.len();
        if n == 0 {
            return Err(Error::InvalidTree("empty degree sequence".into()));
        }
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        // Stack of (vertex, children still to attach).
        let mut open: Vec<(usize, usize)> = Vec::new();
        for (v, &d) in degrees.iter().enumerate() {
            if v > 0 {
                let top = open
                    .last_mut()
                    .ok_or_else(|| Error::InvalidTree("degree sequence ends early".into()))?;
                parent[v] = Some(top.0);
                children[top.0].push(v);
                top.1 -= 1;
                if top.1 == 0 {
                    open.pop();
                }
            }
            if d > 0 {
                open.push((v, d));
            }
        }
        if !open.is_empty() {
            return Err(Error::InvalidTree("degree sequence is not a tree".into()));
        }
        Ok(RootedTree { parent, children })
    }

    /// `⟨t_1, ..., t_p⟩`: a new root whose children are the roots of the inputs,
    /// in input order.
    pub fn glue(subtrees: &[RootedTree]) -> Result<Self> {
        if subtrees.is_empty() {
            return Err(Error::EmptyGlue);
        }
        let total = 1 + subtrees.iter().map(|t| t.len()).sum::<usize>();
        let mut parent = Vec::with_capacity(total);
        let mut children = Vec::with_capacity(total);
        parent.push(None);
        children.push(Vec::with_capacity(subtrees.len()));
        for t in subtrees {
            // Preorder offsets keep the parent < child invariant.
            let offset = parent.len();
            children[0].push(offset);
            for v in 0..t.len() {
                parent.push(Some(t.parent[v].map_or(0, |p| p + offset)));
                children.push(t.children[v].iter().map(|c| c + offset).collect());
            }
        }
        Ok(RootedTree { parent, children })
    }

    /// The subtree made of `v` and its descendants, rooted at `v`.
    pub fn subtree(&self, v: usize) -> RootedTree {
        let mut parents = Vec::new();
        let mut stack = vec![(v, None)];
        let mut kids_rev = Vec::new();
        while let Some((u, p)) = stack.pop() {
            let id = parents.len();
            parents.push(p);
            kids_rev.clear();
            kids_rev.extend(self.children[u].iter().rev().map(|&c| (c, Some(id))));
            stack.extend(kids_rev.drain(..));
        }
        RootedTree::from_parents(&parents).expect("subtree of a valid tree")
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn n_vertices(&self) -> usize {
        self.len()
    }

    pub fn n_edges(&self) -> usize {
        self.len() - 1
    }

    pub fn root(&self) -> usize {
        0
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn out_degree(&self, v: usize) -> usize {
        self.children[v].len()
    }

    /// A leaf is a non-root vertex of degree one.
    pub fn is_leaf(&self, v: usize) -> bool {
        v != 0 && self.children[v].is_empty()
    }

    pub fn leaves(&self) -> Vec<usize> {
        (1..self.len()).filter(|&v| self.is_leaf(v)).collect()
    }

    pub fn leaf_count(&self) -> usize {
        (1..self.len()).filter(|&v| self.is_leaf(v)).count()
    }

    /// Interchange parent array with `-1` at the root.
    pub fn parent_array(&self) -> Vec<i64> {
        self.parent
            .iter()
            .map(|p| p.map_or(-1, |p| p as i64))
            .collect()
    }

    /// Depth of every vertex.
    pub fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.len()];
        for v in 1..self.len() {
            depth[v] = depth[self.parent[v].unwrap()] + 1;
        }
        depth
    }

    pub fn depth(&self, mut v: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent[v] {
            v = p;
            d += 1;
        }
        d
    }

    pub fn height(&self) -> usize {
        self.depths().into_iter().max().unwrap_or(0)
    }

    pub fn diameter(&self) -> usize {
        // down[v]: longest downward path from v. Preorder lets us sweep backwards.
        let mut down = vec![0usize; self.len()];
        let mut best = 0;
        for v in (0..self.len()).rev() {
            let (mut a, mut b) = (0usize, 0usize);
            for &c in &self.children[v] {
                let h = down[c] + 1;
                if h > a {
                    b = a;
                    a = h;
                } else if h > b {
                    b = h;
                }
            }
            down[v] = a;
            best = best.max(a + b);
        }
        best
    }

    /// Out-degrees of all vertices, in non-increasing order.
    pub fn degree_profile(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.children.iter().map(Vec::len).collect();
        d.sort_unstable_by(|a, b| b.cmp(a));
        d
    }

    /// Number of vertices in the subtree of every vertex.
    pub fn subtree_sizes(&self) -> Vec<usize> {
        let mut size = vec![1usize; self.len()];
        for v in (1..self.len()).rev() {
            size[self.parent[v].unwrap()] += size[v];
        }
        size
    }

    /// Number of leaves in the subtree of every vertex.
    pub fn subtree_leaf_counts(&self) -> Vec<usize> {
        let mut count: Vec<usize> = (0..self.len()).map(|v| self.is_leaf(v) as usize).collect();
        for v in (1..self.len()).rev() {
            count[self.parent[v].unwrap()] += count[v];
        }
        count
    }

    /// Vertices on the path from the root to `v`, root first.
    pub fn ancestry(&self, mut v: usize) -> Vec<usize> {
        let mut path = vec![v];
        while let Some(p) = self.parent[v] {
            path.push(p);
            v = p;
        }
        path.reverse();
        path
    }

    pub fn uniform_leaf<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        let leaves = self.leaves();
        if leaves.is_empty() {
            return Err(Error::Leafless);
        }
        Ok(leaves[rng.random_range(0..leaves.len())])
    }

    /// Leaf counts of the subtrees rooted at the ancestors of `leaf`, from
    /// the root down to `leaf` itself.
    pub fn sizes_along_spine(&self, leaf: usize) -> Result<Vec<usize>> {
        if self.len() == 1 {
            return Err(Error::Leafless);
        }
        if leaf >= self.len() || !self.is_leaf(leaf) {
            return Err(Error::InvalidArgument(format!("vertex {leaf} is not a leaf")));
        }
        let counts = self.subtree_leaf_counts();
        Ok(self.ancestry(leaf).into_iter().map(|v| counts[v]).collect())
    }

    /// Canonical form up to root-preserving isomorphism.
    pub fn canonical_code(&self) -> CanonicalCode {
        let mut codes: Vec<Vec<u8>> = vec![Vec::new(); self.len()];
        for v in (0..self.len()).rev() {
            let mut kids: Vec<Vec<u8>> = self.children[v]
                .iter()
                .map(|&c| std::mem::take(&mut codes[c]))
                .collect();
            kids.sort_unstable();
            let len = 2 + kids.iter().map(Vec::len).sum::<usize>();
            let mut code = Vec::with_capacity(len);
            code.push(OPEN);
            for k in kids {
                code.extend_from_slice(&k);
            }
            code.push(CLOSE);
            codes[v] = code;
        }
        CanonicalCode(std::mem::take(&mut codes[0]))
    }

    /// Tree with every child list sorted by canonical code: a fixed
    /// ordered representative of the isomorphism class.
    pub fn canonical_form(&self) -> RootedTree {
        self.canonical_code().to_tree()
    }
}

const OPEN: u8 = 0;
const CLOSE: u8 = 1;

/// Balanced-parenthesis encoding with sorted child codes. Two trees have the
/// same code exactly when they are root-preserving isomorphic.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalCode(Vec<u8>);

impl CanonicalCode {
    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn n_vertices(&self) -> usize {
        self.0.len() / 2
    }

    /// Rebuilds the tree whose children appear in canonical order.
    pub fn to_tree(&self) -> RootedTree {
        let mut parents: Vec<Option<usize>> = Vec::with_capacity(self.n_vertices());
        let mut stack: Vec<usize> = Vec::new();
        for &s in &self.0 {
            if s == OPEN {
                parents.push(stack.last().copied());
                stack.push(parents.len() - 1);
            } else {
                stack.pop();
            }
        }
        RootedTree::from_parents(&parents).expect("canonical code encodes a tree")
    }

    /// Code of `⟨c_1, ..., c_p⟩` computed directly from the child codes.
    pub fn glue(children: &[&CanonicalCode]) -> CanonicalCode {
        let mut kids: Vec<&[u8]> = children.iter().map(|c| c.as_slice()).collect();
        kids.sort_unstable();
        let mut code = vec![OPEN];
        for k in kids {
            code.extend_from_slice(k);
        }
        code.push(CLOSE);
        CanonicalCode(code)
    }
}

impl fmt::Display for CanonicalCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &s in &self.0 {
            f.write_str(if s == OPEN { "(" } else { ")" })?;
        }
        Ok(())
    }
}
