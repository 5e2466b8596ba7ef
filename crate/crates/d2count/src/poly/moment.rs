//! Exact raw moments over the hypercube by sparse multilinear expansion.

use std::collections::HashMap;

use rug::Rational;

use super::Degree2Polynomial;
use crate::error::{Error, Result};

/// Largest `k` accepted by [`raw_moment_exact`] unless the caller passes a
/// different cap.
pub const DEFAULT_RAW_MOMENT_CAP: u32 = 6;

/// A multilinear monomial as a sorted list of distinct variable indices.
type Monomial = Vec<u32>;

/// Product of two multilinear monomials with `x_i^2 = 1`: the symmetric
/// difference of their index sets.
fn mul_monomials(a: &[u32], b: &[u32]) -> Monomial {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// `E_{x in {-1,1}^n}[p(x)^k]`, computed by expanding `p^k` with the
/// reduction `x_i^2 = 1` and reading off the constant term.
///
/// Requires a multilinear `p` and `k <= cap`; the expansion has
/// `n^{O(k)}` terms.
pub fn raw_moment_exact_capped(p: &Degree2Polynomial, k: u32, cap: u32) -> Result<Rational> {
    p.require_multilinear("raw_moment_exact")?;
    if k > cap {
        return Err(Error::Feasibility(format!(
            "raw moment order {k} exceeds the cap {cap}"
        )));
    }
    if k == 0 {
        return Ok(Rational::from(1));
    }
    let mut terms: Vec<(Monomial, Rational)> = Vec::new();
    if *p.constant_term() != 0 {
        terms.push((Vec::new(), p.constant_term().clone()));
    }
    for (&i, c) in p.lin_terms() {
        terms.push((vec![i as u32], c.clone()));
    }
    for (&(i, j), c) in p.quad_terms() {
        terms.push((vec![i as u32, j as u32], c.clone()));
    }
    // Only the constant term of p^k is needed, so the last factor is
    // applied by pairing monomials with themselves.
    let mut acc: HashMap<Monomial, Rational> = HashMap::new();
    acc.insert(Vec::new(), Rational::from(1));
    for _ in 1..k {
        let mut next: HashMap<Monomial, Rational> = HashMap::with_capacity(acc.len() * terms.len());
        for (m, c) in &acc {
            for (t, d) in &terms {
                let prod = Rational::from(c * d);
                let key = mul_monomials(m, t);
                match next.entry(key) {
                    std::collections::hash_map::Entry::Occupied(mut e) => {
                        *e.get_mut() += prod;
                    }
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(prod);
                    }
                }
            }
        }
        next.retain(|_, v| *v != 0);
        acc = next;
    }
    let mut result = Rational::new();
    for (t, d) in &terms {
        if let Some(c) = acc.get(t) {
            result += Rational::from(c * d);
        }
    }
    Ok(result)
}

/// [`raw_moment_exact_capped`] with the default cap of 6.
pub fn raw_moment_exact(p: &Degree2Polynomial, k: u32) -> Result<Rational> {
    raw_moment_exact_capped(p, k, DEFAULT_RAW_MOMENT_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let mut p = Degree2Polynomial::new_multilinear(2);
        p.add_lin(0, Rational::from(1)).unwrap();
        assert_eq!(raw_moment_exact(&p, 2).unwrap(), 1);
        assert_eq!(raw_moment_exact(&p, 3).unwrap(), 0);
        p.add_quad(0, 1, Rational::from(1)).unwrap();
        assert_eq!(raw_moment_exact(&p, 2).unwrap(), 2);
        assert!(raw_moment_exact(&p, 7).is_err());
    }

    #[test]
    fn matches_enumeration() {
        let mut p = Degree2Polynomial::new_multilinear(3);
        p.add_quad(0, 1, Rational::from(2)).unwrap();
        p.add_quad(1, 2, Rational::from(-3)).unwrap();
        p.add_lin(2, Rational::from(1)).unwrap();
        p.add_constant(Rational::from(1));
        for k in 1..=5u32 {
            let mut total = Rational::new();
            for mask in 0..8u32 {
                let x: Vec<i8> = (0..3)
                    .map(|i| if mask >> i & 1 == 1 { 1 } else { -1 })
                    .collect();
                let v = p.evaluate_signs(&x);
                total += crate::util::rat_pow(&v, k);
            }
            total /= 8u32;
            assert_eq!(raw_moment_exact(&p, k).unwrap(), total, "k = {k}");
        }
    }
}
