//! Index structures for the cumulant and cluster-expansion sums.
//!
//! Every enumerator returns its items in a fixed canonical order so that
//! floating-point sums built on top of them are reproducible bit for bit.

use crate::error::{Error, Result};

pub const MAX_PARTITION_ELEMENTS: usize = 8;
pub const MAX_DISSECTION_ELEMENTS: usize = 16;

/// An element of a ground set: either a whole cluster of particle labels that
/// is never split, or a single particle.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClusterElement {
    Cluster(Vec<usize>),
    Single(usize),
}

impl ClusterElement {
    pub fn labels(&self) -> Vec<usize> {
        match self {
            ClusterElement::Cluster(ls) => ls.clone(),
            ClusterElement::Single(l) => vec![*l],
        }
    }
}

/// A set partition given by block lists of ground-set positions (0-based).
/// Blocks are ordered by their smallest element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetPartition {
    pub blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Particle labels covered by each block.
    pub fn block_labels(&self, ground: &[ClusterElement]) -> Vec<Vec<usize>> {
        self.blocks
            .iter()
            .map(|b| b.iter().flat_map(|&k| ground[k].labels()).collect())
            .collect()
    }
}

/// All set partitions of an `n`-element set in lexicographic order of their
/// restricted-growth strings. `n = 0` yields the single empty partition.
pub fn set_partitions(n: usize) -> Result<Vec<SetPartition>> {
    if n > MAX_PARTITION_ELEMENTS {
        return Err(Error::SizeCap {
            size: n,
            cap: MAX_PARTITION_ELEMENTS,
        });
    }
    if n == 0 {
        return Ok(vec![SetPartition { blocks: vec![] }]);
    }
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        let nblocks = rgs.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); nblocks];
        for (pos, &b) in rgs.iter().enumerate() {
            blocks[b].push(pos);
        }
        out.push(SetPartition { blocks });

        // next restricted-growth string: a[i] <= 1 + max(a[0..i])
        let mut i = n - 1;
        loop {
            if i == 0 {
                return Ok(out);
            }
            let prefix_max = rgs[..i].iter().copied().max().unwrap_or(0);
            if rgs[i] <= prefix_max {
                rgs[i] += 1;
                for x in rgs[i + 1..].iter_mut() {
                    *x = 0;
                }
                break;
            }
            i -= 1;
        }
    }
}

/// Set partitions of a nonempty ground set of cluster elements.
pub fn partitions(ground: &[ClusterElement]) -> Result<Vec<SetPartition>> {
    if ground.is_empty() {
        return Err(Error::invalid("ground", "must be nonempty"));
    }
    set_partitions(ground.len())
}

/// A dissection of a linearly ordered set into contiguous nonempty blocks,
/// stored as the block sizes in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dissection {
    sizes: Vec<usize>,
}

impl Dissection {
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn part_count(&self) -> usize {
        self.sizes.len()
    }

    /// Blocks of the ordered set `items` under this dissection.
    pub fn blocks<T: Clone>(&self, items: &[T]) -> Vec<Vec<T>> {
        let mut start = 0;
        self.sizes
            .iter()
            .map(|&len| {
                let block = items[start..start + len].to_vec();
                start += len;
                block
            })
            .collect()
    }
}

/// All `2^{n-1}` dissections of `(1, ..., n)`, ordered by cut-point bitmask
/// ascending (bit `k` set means a cut between positions `k+1` and `k+2`).
pub fn dissections(n: usize) -> Result<Vec<Dissection>> {
    if n == 0 {
        return Err(Error::invalid("n", "dissected set must be nonempty"));
    }
    if n > MAX_DISSECTION_ELEMENTS {
        return Err(Error::SizeCap {
            size: n,
            cap: MAX_DISSECTION_ELEMENTS,
        });
    }
    let cuts = n - 1;
    Ok((0u32..1 << cuts)
        .map(|mask| {
            let mut sizes = Vec::new();
            let mut len = 1;
            for k in 0..cuts {
                if mask & (1 << k) != 0 {
                    sizes.push(len);
                    len = 1;
                } else {
                    len += 1;
                }
            }
            sizes.push(len);
            Dissection { sizes }
        })
        .collect())
}

/// Dissections of `(1, ..., n)` with at most `max_parts` blocks.
pub fn dissections_bounded(n: usize, max_parts: usize) -> Result<Vec<Dissection>> {
    Ok(dissections(n)?
        .into_iter()
        .filter(|d| d.part_count() <= max_parts)
        .collect())
}

/// Ordered `k`-tuples of distinct labels from `1..=m`, lexicographic.
/// Empty when `k > m`; a single empty tuple when `k == 0`.
pub fn injective_tuples(k: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > m {
        return out;
    }
    let mut current = Vec::with_capacity(k);
    let mut used = vec![false; m + 1];
    fn rec(k: usize, m: usize, current: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for l in 1..=m {
            if !used[l] {
                used[l] = true;
                current.push(l);
                rec(k, m, current, used, out);
                current.pop();
                used[l] = false;
            }
        }
    }
    rec(k, m, &mut current, &mut used, &mut out);
    out
}

/// Tuples `(n_1, ..., n_k)` with every `n_j >= 1` and `Σ n_j <= n`, in the
/// order of the nested loops `n_1 = 1..=n`, `n_2 = 1..=n - n_1`, ...
/// `k == 0` yields the single empty tuple.
pub fn bounded_compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn rec(remaining: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for nj in 1..=remaining {
            current.push(nj);
            rec(remaining - nj, k, current, out);
            current.pop();
        }
    }
    rec(n, k, &mut current, &mut out);
    out
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64).round()
}
