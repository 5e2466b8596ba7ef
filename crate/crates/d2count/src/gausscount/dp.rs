//! Exact distribution of a sum of independent, equally weighted discrete
//! variables on a common lattice.

use std::collections::BTreeMap;

use rug::integer::Order;
use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use super::cover::DiscreteSupport;
use crate::error::{Error, Result};
use crate::util::ceil_int;

/// Largest number of distinct partial sums the sparse strategy will track.
const SPARSE_ENTRY_CAP: usize = 1 << 22;

/// How [`dp_table_with`] convolves the supports.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DpStrategy {
    /// Dense when the packed table fits the bit budget, sparse otherwise.
    Auto,
    /// Kronecker substitution: each support becomes one big integer whose
    /// fixed-width bit fields hold the counts, and the supports are
    /// multiplied in a balanced product tree.
    Dense,
    /// Layer-by-layer convolution over a map from lattice point to count.
    Sparse,
}

/// The exact law of `X_1 + ... + X_K` where `X_i` is uniform over the
/// `R_i` values of the `i`-th support.
///
/// Probabilities are `count / total` with `total = prod_i R_i`; the counts of
/// all reachable lattice points sum to `total` exactly.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DpTable {
    /// The common lattice spacing.
    pub grid: Rational,
    /// Reachable lattice indices `n` (value `n * grid`) with their counts,
    /// sorted by index.
    pub entries: Vec<(Integer, Integer)>,
    pub total: Integer,
}

impl DpTable {
    /// `Pr[sum + tau >= 0]`, exactly.
    pub fn prob_at_least(&self, tau: &Rational) -> Rational {
        let cut = ceil_int(&(Rational::from(-tau) / &self.grid));
        let start = self.entries.partition_point(|(idx, _)| *idx < cut);
        let hits = self.entries[start..]
            .iter()
            .fold(Integer::new(), |acc, (_, c)| acc + c);
        Rational::from((hits, self.total.clone()))
    }

    /// Probability of the lattice point with index `n`.
    pub fn prob(&self, n: &Integer) -> Rational {
        match self.entries.binary_search_by(|(idx, _)| idx.cmp(n)) {
            Ok(pos) => Rational::from((self.entries[pos].1.clone(), self.total.clone())),
            Err(_) => Rational::new(),
        }
    }

    /// Number of reachable lattice points.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `Pr[X_1 + ... + X_K + tau >= 0]` exactly, for independent `X_i` uniform
/// over the given supports.  An empty list means the sum is zero.
pub fn dp_count(supports: &[DiscreteSupport], tau: &Rational, bit_budget: u64) -> Result<Rational> {
    if supports.is_empty() {
        return Ok(Rational::from(u32::from(*tau >= 0)));
    }
    Ok(dp_table_with(supports, DpStrategy::Auto, bit_budget)?.prob_at_least(tau))
}

/// Builds the full [`DpTable`] with an explicit strategy.
pub fn dp_table_with(
    supports: &[DiscreteSupport],
    strategy: DpStrategy,
    bit_budget: u64,
) -> Result<DpTable> {
    let grid = match supports.first() {
        Some(s) => s.grid.clone(),
        None => {
            return Err(Error::Precondition(
                "at least one support is required".into(),
            ))
        }
    };
    if let Some(bad) = supports.iter().find(|s| s.grid != grid) {
        return Err(Error::Precondition(format!(
            "support grids differ: {} vs {grid}",
            bad.grid
        )));
    }
    if supports.iter().any(|s| s.is_empty()) {
        return Err(Error::Precondition("empty support".into()));
    }
    let points: Vec<Vec<Integer>> = supports.iter().map(|s| s.lattice_points()).collect();
    let total = supports
        .iter()
        .fold(Integer::from(1), |acc, s| acc * s.len() as u64);
    let width = u64::from(total.significant_bits());
    let lows: Vec<Integer> = points
        .iter()
        .map(|p| p.iter().min().expect("non-empty").clone())
        .collect();
    let span: Integer = points
        .iter()
        .zip(&lows)
        .map(|(p, lo)| Integer::from(p.iter().max().expect("non-empty") - lo))
        .sum();
    let dense_bits = span
        .to_u64()
        .and_then(|s| s.checked_add(1))
        .and_then(|s| s.checked_mul(width));
    let dense_fits = dense_bits.is_some_and(|b| b <= bit_budget);
    let entries = match strategy {
        DpStrategy::Dense if !dense_fits => {
            return Err(Error::Feasibility(format!(
                "dense table of {span} cells exceeds the bit budget"
            )))
        }
        DpStrategy::Dense => dense(&points, &lows, width),
        DpStrategy::Auto if dense_fits => dense(&points, &lows, width),
        DpStrategy::Auto | DpStrategy::Sparse => sparse(&points)?,
    };
    Ok(DpTable {
        grid,
        entries,
        total,
    })
}

fn dense(points: &[Vec<Integer>], lows: &[Integer], width: u64) -> Vec<(Integer, Integer)> {
    let packed: Vec<Integer> = points
        .iter()
        .zip(lows)
        .map(|(p, lo)| {
            let offsets: Vec<u64> = p
                .iter()
                .map(|v| Integer::from(v - lo).to_u64().expect("fits"))
                .collect();
            pack(&offsets, width)
        })
        .collect();
    let product = product_tree(packed);
    let base: Integer = lows.iter().sum();
    unpack(&product, width)
        .into_iter()
        .filter(|(_, c)| *c != 0)
        .map(|(off, c)| (Integer::from(&base + off), c))
        .collect()
}

/// `sum_j z^(offsets_j)` evaluated at `z = 2^width`.
fn pack(offsets: &[u64], width: u64) -> Integer {
    let max = offsets.iter().copied().max().unwrap_or(0);
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for &o in offsets {
        *counts.entry(o).or_default() += 1;
    }
    let limbs = ((max + 1) * width).div_ceil(64) as usize + 1;
    let mut digits = vec![0u64; limbs];
    for (o, c) in counts {
        // c <= R < 2^width, so it occupies at most two limbs.
        let bit = o * width;
        let (limb, shift) = ((bit / 64) as usize, bit % 64);
        digits[limb] |= c << shift;
        if shift > 0 && limb + 1 < limbs {
            digits[limb + 1] |= c >> (64 - shift);
        }
    }
    Integer::from_digits(&digits, Order::Lsf)
}

fn product_tree(mut layer: Vec<Integer>) -> Integer {
    while layer.len() > 1 {
        let mut next = Vec::with_capacity(layer.len().div_ceil(2));
        let mut it = layer.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a * b),
                None => next.push(a),
            }
        }
        layer = next;
    }
    layer.pop().unwrap_or_else(|| Integer::from(1))
}

/// Splits `x` into `width`-bit fields, lowest first.
fn unpack(x: &Integer, width: u64) -> Vec<(u64, Integer)> {
    let digits: Vec<u64> = x.to_digits::<u64>(Order::Lsf);
    let bits = digits.len() as u64 * 64;
    let mut out = Vec::new();
    let mut slot = 0u64;
    while slot * width < bits {
        let start = slot * width;
        let end = (start + width).min(bits);
        let first = (start / 64) as usize;
        let last = ((end - 1) / 64) as usize;
        let mut field = Integer::from_digits(&digits[first..=last], Order::Lsf);
        field >>= (start % 64) as u32;
        field.keep_bits_mut(width as u32);
        out.push((slot, field));
        slot += 1;
    }
    out
}

fn sparse(points: &[Vec<Integer>]) -> Result<Vec<(Integer, Integer)>> {
    let mut layer: BTreeMap<Integer, Integer> = BTreeMap::new();
    layer.insert(Integer::new(), Integer::from(1));
    for p in points {
        let mut mult: BTreeMap<&Integer, u64> = BTreeMap::new();
        for v in p {
            *mult.entry(v).or_default() += 1;
        }
        let mut next: BTreeMap<Integer, Integer> = BTreeMap::new();
        for (idx, c) in &layer {
            for (&v, &m) in &mult {
                *next.entry(Integer::from(idx + v)).or_default() += Integer::from(c * m);
            }
        }
        if next.len() > SPARSE_ENTRY_CAP {
            return Err(Error::Feasibility(format!(
                "more than {SPARSE_ENTRY_CAP} distinct partial sums"
            )));
        }
        layer = next;
    }
    Ok(layer.into_iter().collect())
}
