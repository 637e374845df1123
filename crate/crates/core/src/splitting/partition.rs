use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest `n` accepted by [`partitions_of`].
pub const PARTITIONS_MAX: usize = 60;

/// A partition `λ_1 ≥ ... ≥ λ_p ≥ 1` of `n`. The partition with no parts
/// exists only for `n = 1`, where it is the cemetery.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntPartition {
    parts: Vec<usize>,
    n: usize,
}

impl IntPartition {
    /// Sorts `parts` into non-increasing order.
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() {
            return Err(invalid("a partition needs at least one part"));
        }
        if parts.contains(&0) {
            return Err(invalid("partition parts must be positive"));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        let n = parts.iter().sum();
        Ok(IntPartition { parts, n })
    }

    pub(crate) fn from_sorted(parts: Vec<usize>) -> Self {
        debug_assert!(parts.windows(2).all(|w| w[0] >= w[1]));
        let n = parts.iter().sum();
        IntPartition { parts, n }
    }

    pub fn cemetery() -> Self {
        IntPartition {
            parts: Vec::new(),
            n: 1,
        }
    }

    /// The trivial partition `(n)`.
    pub fn whole(n: usize) -> Self {
        IntPartition { parts: vec![n], n }
    }

    /// `(k, n − k)` with `k ≥ n − k`.
    pub fn binary(n: usize, k: usize) -> Self {
        let k = k.max(n - k);
        IntPartition::from_sorted(vec![k, n - k])
    }

    pub fn is_cemetery(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    /// Number of parts `p(λ)`.
    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    pub fn largest(&self) -> usize {
        self.parts.first().copied().unwrap_or(0)
    }

    /// `m_j(λ) = #{i : λ_i = j}`.
    pub fn multiplicity(&self, j: usize) -> usize {
        self.parts.iter().filter(|&&x| x == j).count()
    }

    /// Multiplicities `m_j > 0` as `(j, m_j)` pairs in decreasing `j`.
    pub fn multiplicities(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &x in &self.parts {
            match out.last_mut() {
                Some((j, m)) if *j == x => *m += 1,
                _ => out.push((x, 1)),
            }
        }
        out
    }

    pub fn is_trivial(&self) -> bool {
        self.parts.len() == 1
    }

    /// `(λ_1 / n, λ_2 / n, ...)`.
    pub fn masses(&self) -> Vec<f64> {
        let n = self.n as f64;
        self.parts.iter().map(|&x| x as f64 / n).collect()
    }
}

impl fmt::Display for IntPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_cemetery() {
            return f.write_str("∅");
        }
        f.write_str("(")?;
        for (i, x) in self.parts.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{x}")?;
        }
        f.write_str(")")
    }
}

/// Partitions of `n` in decreasing lexicographic order.
#[derive(Clone, Debug)]
pub struct Partitions {
    current: Option<Vec<usize>>,
}

impl Iterator for Partitions {
    type Item = IntPartition;

    fn next(&mut self) -> Option<IntPartition> {
        let cur = self.current.take()?;
        let out = IntPartition::from_sorted(cur.clone());
        // Successor: drop trailing ones, decrement the last part > 1 and
        // refill with copies of the new value.
        let mut parts = cur;
        let mut ones = 0;
        while parts.last() == Some(&1) {
            parts.pop();
            ones += 1;
        }
        if let Some(last) = parts.pop() {
            let v = last - 1;
            let mut rest = ones + 1;
            parts.push(v);
            while rest > 0 {
                let take = rest.min(v);
                parts.push(take);
                rest -= take;
            }
            self.current = Some(parts);
        }
        Some(out)
    }
}

pub fn partitions_of(n: usize) -> Result<Partitions> {
    if n == 0 {
        return Err(invalid("no partitions of 0"));
    }
    if n > PARTITIONS_MAX {
        return Err(Error::SizeCap {
            what: "partition enumeration",
            size: n,
            limit: PARTITIONS_MAX,
        });
    }
    Ok(Partitions {
        current: Some(vec![n]),
    })
}

/// Partitions of `n` into exactly `k` parts, each `≡ 1 (mod step)`.
pub(crate) fn partitions_k_parts_congruent(n: usize, k: usize, step: usize) -> Vec<IntPartition> {
    fn rec(
        left: usize,
        slots: usize,
        max: usize,
        step: usize,
        cur: &mut Vec<usize>,
        out: &mut Vec<IntPartition>,
    ) {
        if slots == 0 {
            if left == 0 {
                out.push(IntPartition::from_sorted(cur.clone()));
            }
            return;
        }
        // Remaining parts need at least 1 each.
        let hi = max.min(left - (slots - 1));
        let mut x = hi - (hi - 1) % step;
        loop {
            if x * slots < left {
                break;
            }
            cur.push(x);
            rec(left - x, slots - 1, x, step, cur, out);
            cur.pop();
            if x <= step {
                break;
            }
            x -= step;
        }
    }
    let mut out = Vec::new();
    if k == 0 || n < k {
        return out;
    }
    rec(n, k, n, step, &mut Vec::new(), &mut out);
    out
}
