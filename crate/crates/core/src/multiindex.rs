//! Sparse multi-indexes over increment slots.
//!
//! A [`MultiIndex`] is a finite sequence of non-negative Hermite orders, one
//! per slot, stored without trailing zeros. Because the stored form does not
//! depend on how many slots a grid has, the same index can be read on any grid
//! at least as long as its support.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;

use crate::error::{invalid, Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    /// Builds an index from raw entries, trimming trailing zeros.
    pub fn new(entries: impl Into<Vec<u32>>) -> Self {
        let mut entries = entries.into();
        while entries.last() == Some(&0) {
            entries.pop();
        }
        MultiIndex(entries)
    }

    pub fn zero() -> Self {
        MultiIndex(Vec::new())
    }

    /// The index with `order` in `slot` (1-based) and zeros elsewhere.
    pub fn unit(slot: usize, order: u32) -> Self {
        assert!(slot >= 1, "slots are numbered from 1");
        let mut entries = vec![0; slot];
        entries[slot - 1] = order;
        MultiIndex::new(entries)
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    /// Number of stored slots, i.e. the position of the last nonzero entry.
    pub fn support_len(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// Entry at 1-based `slot`; zero beyond the support.
    pub fn get(&self, slot: usize) -> u32 {
        if slot == 0 {
            return 0;
        }
        self.0.get(slot - 1).copied().unwrap_or(0)
    }

    /// Total degree `|a| = Σ aᵢ`.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// `a! = ∏ aᵢ!`, exactly.
    pub fn factorial(&self) -> BigUint {
        let mut acc = BigUint::from(1u32);
        for &e in &self.0 {
            for k in 2..=e {
                acc *= k;
            }
        }
        acc
    }

    /// `ln(a!)`, for use in floating-point ratios.
    pub fn ln_factorial(&self) -> f64 {
        self.0.iter().map(|&e| ln_factorial(e)).sum()
    }

    /// Position (1-based) and value of the last nonzero entry.
    pub fn last_nonzero(&self) -> Option<(usize, u32)> {
        self.0.last().map(|&v| (self.0.len(), v))
    }

    /// Splits `(a₁, …, a_{ℓ-1}, m)` into the prefix `(a₁, …, a_{ℓ-1})`, `ℓ` and `m`.
    pub fn split_last(&self) -> Option<(MultiIndex, usize, u32)> {
        let (slot, order) = self.last_nonzero()?;
        let prefix = MultiIndex::new(&self.0[..slot - 1]);
        Some((prefix, slot, order))
    }

    /// The index `(a, m)` with `m` placed in `slot`. `a` must be supported
    /// strictly before `slot`.
    pub fn with_last(&self, slot: usize, order: u32) -> MultiIndex {
        assert!(
            slot > self.support_len(),
            "prefix overlaps the appended slot"
        );
        let mut entries = self.0.clone();
        entries.resize(slot, 0);
        entries[slot - 1] = order;
        MultiIndex::new(entries)
    }

    /// The index with `delta` removed from `slot`, or `None` if the entry is too small.
    pub fn lowered(&self, slot: usize, delta: u32) -> Option<MultiIndex> {
        let current = self.get(slot);
        if current < delta {
            return None;
        }
        let mut entries = self.0.clone();
        entries[slot - 1] = current - delta;
        Some(MultiIndex::new(entries))
    }

    /// Block sums of a fine index: entry `i` is the sum of fine slots
    /// `(i-1)·n1 + 1 ..= i·n1`.
    pub fn coarsen(&self, n0: usize, n1: usize) -> Result<MultiIndex> {
        if n0 == 0 || n1 == 0 {
            return Err(invalid("coarsen needs n0, n1 >= 1"));
        }
        if self.support_len() > n0 * n1 {
            return Err(Error::DimensionMismatch(format!(
                "index {self} has {} slots, fine grid has {}",
                self.support_len(),
                n0 * n1
            )));
        }
        let coarse: Vec<u32> = self.0.chunks(n1).map(|block| block.iter().sum()).collect();
        Ok(MultiIndex::new(coarse))
    }

    /// Whether this fine index matches `coarse`, i.e. every block of `n1`
    /// fine entries sums to the corresponding coarse entry.
    pub fn matches(&self, coarse: &MultiIndex, n0: usize, n1: usize) -> bool {
        if coarse.support_len() > n0 {
            return false;
        }
        match self.coarsen(n0, n1) {
            Ok(c) => &c == coarse,
            Err(_) => false,
        }
    }
}

pub(crate) fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Graded order: lower total degree first; within a degree, larger leading
/// entries first (so `(1)` precedes `(0,1)`).
impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.degree().cmp(&other.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        let n = self.0.len().max(other.0.len());
        for i in 1..=n {
            let (x, y) = (self.get(i), other.get(i));
            if x != y {
                return y.cmp(&x);
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{e}")?;
        }
        f.write_str(")")
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Parses `"(2,0,3)"`, `"2,0,3"`, `"()"` or the empty string.
impl FromStr for MultiIndex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let inner = s
            .strip_prefix('(')
            .and_then(|t| t.strip_suffix(')'))
            .unwrap_or(s)
            .trim();
        if inner.is_empty() {
            return Ok(MultiIndex::zero());
        }
        let entries = inner
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<u32>()
                    .map_err(|e| Error::Parse(format!("bad multi-index entry {t:?} in {s:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiIndex::new(entries))
    }
}

/// Compositions of `total` into `parts` non-negative parts, largest leading
/// part first.
#[derive(Debug, Clone)]
pub struct Compositions {
    current: Vec<u32>,
    done: bool,
}

impl Compositions {
    pub fn new(total: u32, parts: usize) -> Self {
        if parts == 0 {
            return Compositions {
                current: Vec::new(),
                done: total != 0,
            };
        }
        let mut current = vec![0; parts];
        current[0] = total;
        Compositions {
            current,
            done: false,
        }
    }

    fn advance(&mut self) {
        let n = self.current.len();
        if n < 2 {
            self.done = true;
            return;
        }
        // Rightmost nonzero entry that still has a slot after it.
        match (0..n - 1).rev().find(|&j| self.current[j] > 0) {
            None => self.done = true,
            Some(j) => {
                let tail: u32 = self.current[j + 1..].iter().sum();
                self.current[j] -= 1;
                for v in &mut self.current[j + 1..] {
                    *v = 0;
                }
                self.current[j + 1] = tail + 1;
            }
        }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u32>;

    fn next(&mut self) -> Option<Vec<u32>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        self.advance();
        Some(out)
    }
}

/// Every fine index on `n0·n1` slots that matches `coarse`, each exactly once,
/// in graded order.
pub fn enumerate_matching(
    coarse: &MultiIndex,
    n0: usize,
    n1: usize,
) -> impl Iterator<Item = MultiIndex> {
    MatchingIter::new(coarse, n0, n1)
}

struct MatchingIter {
    targets: Vec<u32>,
    blocks: Vec<Compositions>,
    current: Vec<Vec<u32>>,
    done: bool,
}

impl MatchingIter {
    fn new(coarse: &MultiIndex, n0: usize, n1: usize) -> Self {
        assert!(n1 >= 1, "n1 must be positive");
        let done = coarse.support_len() > n0;
        let targets = coarse.entries().to_vec();
        let mut blocks: Vec<Compositions> =
            targets.iter().map(|&t| Compositions::new(t, n1)).collect();
        let current = blocks
            .iter_mut()
            .map(|b| b.next().unwrap_or_default())
            .collect();
        MatchingIter {
            targets,
            blocks,
            current,
            done,
        }
    }
}

impl Iterator for MatchingIter {
    type Item = MultiIndex;

    fn next(&mut self) -> Option<MultiIndex> {
        if self.done {
            return None;
        }
        let out = MultiIndex::new(self.current.concat());
        // Odometer with the last block varying fastest.
        let mut i = self.blocks.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if let Some(next) = self.blocks[i].next() {
                self.current[i] = next;
                break;
            }
            let n1 = self.current[i].len();
            self.blocks[i] = Compositions::new(self.targets[i], n1);
            self.current[i] = self.blocks[i].next().unwrap_or_default();
        }
        Some(out)
    }
}

/// All indexes with support in the first `dimension` slots and degree at most
/// `max_degree`, in graded order.
pub fn enumerate_upto(dimension: usize, max_degree: u32) -> impl Iterator<Item = MultiIndex> {
    (0..=max_degree).flat_map(move |d| Compositions::new(d, dimension).map(MultiIndex::new))
}

/// Number of fine indexes matching `coarse`: `∏ C(aᵢ + n1 - 1, n1 - 1)`.
pub fn matching_count(coarse: &MultiIndex, n1: usize) -> u128 {
    coarse
        .entries()
        .iter()
        .map(|&a| binomial_u128(a as u64 + n1 as u64 - 1, n1 as u64 - 1))
        .product()
}

fn binomial_u128(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}
