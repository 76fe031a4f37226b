//! Set partitions, dissections and injective host assignments.
//!
//! Enumeration is exhaustive and deterministic: partitions come out in
//! restricted-growth-string order, so every sum built from them has a fixed
//! summation order.

use num_rational::Ratio;

use crate::error::{Error, Result};

/// `n!` as a float; exact for `n ≤ 22`.
pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub fn factorial_exact(n: usize) -> i64 {
    (1..=n as i64).product()
}

/// `(-1)^{k-1} (k-1)!` for a partition with `k` blocks.
pub fn partition_weight(blocks: usize) -> i64 {
    assert!(blocks >= 1);
    let sign = if blocks % 2 == 1 { 1 } else { -1 };
    sign * factorial_exact(blocks - 1)
}

/// Element of a cumulant's ground set.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ClusterElement {
    /// The indivisible element `{Y\X}`.
    Aggregate(Vec<usize>),
    Single(usize),
}

impl ClusterElement {
    pub fn particles(&self) -> Vec<usize> {
        match self {
            ClusterElement::Aggregate(p) => p.clone(),
            ClusterElement::Single(i) => vec![*i],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Partition {
    pub blocks: Vec<Vec<ClusterElement>>,
    pub weight: i64,
}

impl Partition {
    /// Particles of one block in ground order.
    pub fn block_support(block: &[ClusterElement]) -> Vec<usize> {
        block.iter().flat_map(|e| e.particles()).collect()
    }

    pub fn supports(&self) -> Vec<Vec<usize>> {
        self.blocks.iter().map(|b| Self::block_support(b)).collect()
    }

    pub fn weight_exact(&self) -> Ratio<i64> {
        Ratio::from_integer(self.weight)
    }
}

/// All set partitions of `0..n` as block lists of indices; block order is by
/// minimum element, indices inside a block are increasing.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, blocks: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(blocks.clone());
            return;
        }
        for b in 0..blocks.len() {
            blocks[b].push(i);
            rec(i + 1, n, blocks, out);
            blocks[b].pop();
        }
        blocks.push(vec![i]);
        rec(i + 1, n, blocks, out);
        blocks.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out
}

/// Every partition of `ground` with its signed weight.
pub fn enumerate_partitions(ground: &[ClusterElement]) -> Result<Vec<Partition>> {
    if ground.is_empty() {
        return Err(Error::InvalidArgument("partition ground set is empty".into()));
    }
    let mut seen = Vec::new();
    for e in ground {
        if let ClusterElement::Aggregate(p) = e {
            if p.is_empty() {
                return Err(Error::InvalidArgument("aggregate element has no particles".into()));
            }
        }
        for p in e.particles() {
            if seen.contains(&p) {
                return Err(Error::DuplicateIndex(p));
            }
            seen.push(p);
        }
    }
    Ok(set_partitions(ground.len())
        .into_iter()
        .map(|blocks| Partition {
            weight: partition_weight(blocks.len()),
            blocks: blocks.into_iter().map(|b| b.into_iter().map(|i| ground[i].clone()).collect()).collect(),
        })
        .collect())
}

/// Bell numbers `B_0..=B_n` from the Bell triangle.
pub fn bell_numbers(n: usize) -> Vec<u64> {
    let mut bells = vec![1u64];
    let mut row = vec![1u64];
    for _ in 0..n {
        let mut next = vec![*row.last().unwrap()];
        for &v in &row {
            let last = *next.last().unwrap();
            next.push(last + v);
        }
        bells.push(next[0]);
        row = next;
    }
    bells
}

/// Blocks of a linearly ordered set, ordered by minimum, each inheriting the
/// set's order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dissection {
    pub blocks: Vec<Vec<usize>>,
}

impl Dissection {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }
}

/// Partitions of `z` into at most `cap` blocks. An empty `z` yields the single
/// empty dissection, the neutral term of every product over blocks.
pub fn enumerate_dissections(z: &[usize], cap: usize) -> Result<Vec<Dissection>> {
    if cap < 1 {
        return Err(Error::InvalidArgument("dissection cap must be at least 1".into()));
    }
    for (i, a) in z.iter().enumerate() {
        if z[..i].contains(a) {
            return Err(Error::DuplicateIndex(*a));
        }
    }
    Ok(set_partitions(z.len())
        .into_iter()
        .filter(|p| p.len() <= cap)
        .map(|p| Dissection { blocks: p.into_iter().map(|b| b.into_iter().map(|i| z[i]).collect()).collect() })
        .collect())
}

/// Ordered `m`-tuples of distinct values in `1..=hosts`; empty when `m > hosts`.
pub fn injective_assignments(m: usize, hosts: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, hosts: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for v in 1..=hosts {
            if !cur.contains(&v) {
                cur.push(v);
                rec(m, hosts, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    if m <= hosts {
        rec(m, hosts, &mut Vec::with_capacity(m), &mut out);
    }
    out
}

/// `k`-element subsets of `items`, lexicographic in positions.
pub fn subsets<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    fn rec<T: Clone>(items: &[T], k: usize, start: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < k - cur.len() {
                break;
            }
            cur.push(items[i].clone());
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= items.len() {
        rec(items, k, 0, &mut Vec::with_capacity(k), &mut out);
    }
    out
}

/// Ordered tuples of positive integers `(n_1, ..., n_k)` with `Σ n_j ≤ n`,
/// including the empty tuple.
pub fn bounded_compositions(n: usize) -> Vec<Vec<usize>> {
    fn rec(left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        out.push(cur.clone());
        for part in 1..=left {
            cur.push(part);
            rec(left - part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, &mut Vec::new(), &mut out);
    out
}
