//! Markov-branching trees built from a splitting family.

use std::collections::HashMap;

use rand::RngCore;
use rand_distr::{Distribution, Geometric};

use crate::error::{invalid, Error, Result};
use crate::splitting::{self, Indexing, IntPartition, SplittingFamily};
use crate::tree::{CanonicalCode, RootedTree};

/// Largest tree the samplers will build.
pub const NODE_CAP: usize = 10_000_000;

/// Number of failures before the first success, `P(G = k) = p(1 − p)^k`.
fn geometric(p: f64, rng: &mut dyn RngCore) -> Result<u64> {
    if p >= 1.0 {
        return Ok(0);
    }
    let g = Geometric::new(p).map_err(|e| invalid(format!("geometric({p}): {e}")))?;
    Ok(g.sample(rng))
}

struct Builder {
    parents: Vec<Option<usize>>,
}

impl Builder {
    fn add(&mut self, parent: usize) -> Result<usize> {
        if self.parents.len() >= NODE_CAP {
            return Err(Error::SizeCap {
                what: "Markov-branching tree vertices",
                size: self.parents.len() + 1,
                limit: NODE_CAP,
            });
        }
        self.parents.push(Some(parent));
        Ok(self.parents.len() - 1)
    }

    /// Hangs a path of `len` edges below `v` and returns its far end.
    fn chain(&mut self, mut v: usize, len: u64) -> Result<usize> {
        if len as usize >= NODE_CAP {
            return Err(Error::SizeCap {
                what: "Markov-branching tree vertices",
                size: len as usize,
                limit: NODE_CAP,
            });
        }
        for _ in 0..len {
            v = self.add(v)?;
        }
        Ok(v)
    }
}

/// A tree with `n` leaves from a leaves-indexed family.
pub fn sample_mb_leaves(
    family: &dyn SplittingFamily,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<RootedTree> {
    if family.indexing() != Indexing::Leaves {
        return Err(invalid(format!("{} is indexed by vertices", family.name())));
    }
    if n == 0 {
        return Err(invalid("a tree needs at least one leaf"));
    }
    let dust = family.cemetery_prob();
    if !(dust > 0.0) {
        return Err(invalid(format!("{} never kills a single ball", family.name())));
    }
    let mut b = Builder {
        parents: vec![None],
    };
    let mut work = vec![(0usize, n)];
    while let Some((v, m)) = work.pop() {
        if m == 1 {
            let g = geometric(dust, rng)?;
            b.chain(v, g)?;
            continue;
        }
        let stay = family.stay_prob(m);
        if stay >= 1.0 {
            return Err(invalid(format!("{} never splits {m}", family.name())));
        }
        let (v, lambda) = if stay > 0.0 {
            let s = geometric(1.0 - stay, rng)?;
            (b.chain(v, s)?, splitting::sample_nontrivial(family, m, rng)?)
        } else {
            (v, splitting::sample(family, m, rng)?)
        };
        push_children(&mut b, &mut work, v, &lambda)?;
    }
    RootedTree::from_parents(&b.parents)
}

fn push_children(
    b: &mut Builder,
    work: &mut Vec<(usize, usize)>,
    v: usize,
    lambda: &IntPartition,
) -> Result<()> {
    // Reverse so that the first part is processed first.
    let mut kids = Vec::with_capacity(lambda.len());
    for &part in lambda.parts() {
        kids.push((b.add(v)?, part));
    }
    work.extend(kids.into_iter().rev());
    Ok(())
}

/// A tree with `n` vertices from a vertices-indexed family.
pub fn sample_mb_vertices(
    family: &dyn SplittingFamily,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<RootedTree> {
    if family.indexing() != Indexing::Vertices {
        return Err(invalid(format!("{} is indexed by leaves", family.name())));
    }
    if n == 0 {
        return Err(invalid("a tree needs at least one vertex"));
    }
    if n > NODE_CAP {
        return Err(Error::SizeCap {
            what: "Markov-branching tree vertices",
            size: n,
            limit: NODE_CAP,
        });
    }
    let mut b = Builder {
        parents: Vec::with_capacity(n),
    };
    b.parents.push(None);
    let mut work = vec![(0usize, n)];
    while let Some((v, m)) = work.pop() {
        if m == 1 {
            continue;
        }
        let lambda = splitting::sample(family, m - 1, rng)?;
        push_children(&mut b, &mut work, v, &lambda)?;
    }
    RootedTree::from_parents(&b.parents)
}

/// Dispatches on the family's indexing.
pub fn sample_mb(family: &dyn SplittingFamily, n: usize, rng: &mut dyn RngCore) -> Result<RootedTree> {
    match family.indexing() {
        Indexing::Leaves => sample_mb_leaves(family, n, rng),
        Indexing::Vertices => sample_mb_vertices(family, n, rng),
    }
}

/// Leaf counts along the path from the root to a uniform leaf of a fresh
/// tree with `n` leaves.
pub fn marked_spine_sizes(
    family: &dyn SplittingFamily,
    n: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<usize>> {
    let t = sample_mb_leaves(family, n, rng)?;
    if t.len() == 1 {
        return Ok(vec![1]);
    }
    let leaf = t.uniform_leaf(rng)?;
    t.sizes_along_spine(leaf)
}

/// Geometric chains are cut once their remaining mass drops below this.
pub const SHAPE_LAW_TAIL: f64 = 1e-13;

/// Largest number of shapes tracked by [`exact_shape_law`].
pub const SHAPE_LAW_MAX: usize = 2_000_000;

type Law = Vec<(CanonicalCode, f64)>;

/// Law of the unordered shape at size `n`, by recursion over the splitting
/// probabilities. Stays at a size (and line trees at `n = 1`) are truncated
/// at total mass [`SHAPE_LAW_TAIL`], so the result may miss that much.
pub fn exact_shape_law(family: &dyn SplittingFamily, n: usize) -> Result<Law> {
    if n == 0 || n > crate::splitting::PARTITIONS_MAX {
        return Err(invalid(format!("exact shape law needs 1 ≤ n ≤ 60, got {n}")));
    }
    let mut memo: HashMap<usize, Law> = HashMap::new();
    let leaf = CanonicalCode::glue(&[]);
    let vertices = family.indexing() == Indexing::Vertices;
    for m in 1..=n {
        let law = if m == 1 {
            if vertices {
                vec![(leaf.clone(), 1.0)]
            } else {
                chains(&vec![(leaf.clone(), 1.0)], 1.0 - family.cemetery_prob())
            }
        } else {
            let size = if vertices { m - 1 } else { m };
            if !family.admits(size) {
                memo.insert(m, Vec::new());
                continue;
            }
            let mut acc: HashMap<CanonicalCode, f64> = HashMap::new();
            for (lambda, p) in splitting::support(family, size)? {
                if !vertices && lambda.is_trivial() {
                    continue;
                }
                let mut partial: Vec<(Vec<&CanonicalCode>, f64)> = vec![(Vec::new(), p)];
                for &part in lambda.parts() {
                    let sub = &memo[&part];
                    let mut next = Vec::with_capacity(partial.len() * sub.len());
                    for (codes, q) in &partial {
                        for (c, r) in sub {
                            let mut cs = codes.clone();
                            cs.push(c);
                            next.push((cs, q * r));
                        }
                    }
                    if next.len() > SHAPE_LAW_MAX {
                        return Err(Error::SizeCap {
                            what: "shape law entries",
                            size: next.len(),
                            limit: SHAPE_LAW_MAX,
                        });
                    }
                    partial = next;
                }
                for (codes, q) in partial {
                    *acc.entry(CanonicalCode::glue(&codes)).or_insert(0.0) += q;
                }
            }
            let mut base: Law = acc.into_iter().collect();
            base.sort_by(|a, b| a.0.cmp(&b.0));
            if vertices {
                base
            } else {
                // The nontrivial draws above carry mass 1 − stay; stays
                // prepend edges.
                let stay = family.stay_prob(m);
                let scale = 1.0 / (1.0 - stay);
                base.iter_mut().for_each(|e| e.1 *= scale);
                chains(&base, stay)
            }
        };
        memo.insert(m, law);
    }
    Ok(memo.remove(&n).unwrap())
}

/// Mixture over `j ≥ 0` of `(1 − s) s^j` times the law with `j` edges
/// prepended above the root.
fn chains(base: &Law, s: f64) -> Law {
    if s <= 0.0 {
        return base.clone();
    }
    let mut out = Vec::new();
    let mut cur = base.clone();
    let mut w = 1.0 - s;
    let mut left = 1.0;
    while left > SHAPE_LAW_TAIL {
        out.extend(cur.iter().map(|(c, p)| (c.clone(), p * w)));
        left -= w;
        w *= s;
        cur = cur.iter().map(|(c, p)| (CanonicalCode::glue(&[c]), *p)).collect();
        if w == 0.0 {
            break;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gw::OffspringLaw;
    use crate::splitting::{
        BasicFamily, FordFamily, GwVerticesFamily, HalvingFamily, KaryFamily, MarchalFamily,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn halving_gives_complete_binary_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = HalvingFamily::new();
        for k in 0..12 {
            let t = sample_mb_leaves(&h, 1 << k, &mut rng).unwrap();
            assert_eq!(t.height(), k);
            assert_eq!(t.leaf_count().max(1), 1 << k);
            assert_eq!(t.len(), (2 << k) - 1);
        }
    }

    #[test]
    fn leaf_and_vertex_counts_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let leaves: Vec<Box<dyn SplittingFamily>> = vec![
            Box::new(FordFamily::new(0.2).unwrap()),
            Box::new(MarchalFamily::new(1.4).unwrap()),
            Box::new(BasicFamily::new(0.7).unwrap()),
        ];
        for f in &leaves {
            for n in [1, 2, 3, 17, 500] {
                let t = sample_mb_leaves(f.as_ref(), n, &mut rng).unwrap();
                // A lone root is not a leaf; it stands for the single ball.
                let leaves = if t.len() == 1 { 1 } else { t.leaf_count() };
                assert_eq!(leaves, n, "{}", f.name());
            }
        }
        let k3 = KaryFamily::new(3).unwrap();
        assert_eq!(sample_mb_leaves(&k3, 301, &mut rng).unwrap().leaf_count(), 301);
        let g = GwVerticesFamily::new(OffspringLaw::geometric_half());
        for n in [1, 2, 5, 80, 1000] {
            assert_eq!(sample_mb_vertices(&g, n, &mut rng).unwrap().len(), n);
        }
        assert!(sample_mb_vertices(&FordFamily::new(0.3).unwrap(), 5, &mut rng).is_err());
    }

    #[test]
    fn basic_family_first_branch_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = BasicFamily::new(1.0).unwrap();
        let n = 1 << 9;
        let reps = 6000;
        let mut total = 0.0;
        for _ in 0..reps {
            let t = sample_mb_leaves(&f, n, &mut rng).unwrap();
            let mut v = t.root();
            let mut d = 0;
            while t.out_degree(v) == 1 {
                v = t.children(v)[0];
                d += 1;
            }
            total += d as f64;
        }
        let mean = total / reps as f64;
        // Failures before a success of probability 1/n: mean n − 1.
        assert!((mean / (n - 1) as f64 - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn spine_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = FordFamily::new(0.5).unwrap();
        for _ in 0..50 {
            let s = marked_spine_sizes(&f, 64, &mut rng).unwrap();
            assert_eq!(s[0], 64);
            assert_eq!(*s.last().unwrap(), 1);
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn exact_law_sums_to_one() {
        let f = FordFamily::new(0.5).unwrap();
        for n in 1..=7 {
            let law = exact_shape_law(&f, n).unwrap();
            let s: f64 = law.iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-12, "n = {n}: {s}");
        }
        let b = BasicFamily::new(1.0).unwrap();
        let law = exact_shape_law(&b, 4).unwrap();
        let s: f64 = law.iter().map(|e| e.1).sum();
        assert!((s - 1.0).abs() < 1e-9, "{s}");
        // Rémy n = 3 has a single shape.
        assert_eq!(exact_shape_law(&f, 3).unwrap().len(), 1);
        let g = GwVerticesFamily::new(OffspringLaw::binary());
        let law = exact_shape_law(&g, 5).unwrap();
        assert_eq!(law.len(), 1);
    }
}
