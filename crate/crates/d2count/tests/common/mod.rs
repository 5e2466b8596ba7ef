//! Seeded random instance generators shared by the integration tests.

#![allow(dead_code)]

use d2count::poly::{Degree2Polynomial, Graph, SymmetricMatrix};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rug::Rational;

pub use rand::SeedableRng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn r(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

/// Multilinear polynomial on `n` variables with every monomial of degree
/// at most two present and integer coefficients uniform in `[-c, c]`.
pub fn dense_multilinear(rng: &mut TestRng, n: usize, c: i64) -> Degree2Polynomial {
    let mut p = Degree2Polynomial::new_multilinear(n);
    for i in 0..n {
        for j in i + 1..n {
            p.add_quad(i, j, Rational::from(rng.gen_range(-c..=c)))
                .unwrap();
        }
        p.add_lin(i, Rational::from(rng.gen_range(-c..=c))).unwrap();
    }
    p.add_constant(Rational::from(rng.gen_range(-c..=c)));
    p
}

/// Multilinear polynomial where each monomial is present with probability
/// `density`.
pub fn sparse_multilinear(rng: &mut TestRng, n: usize, c: i64, density: f64) -> Degree2Polynomial {
    let mut p = Degree2Polynomial::new_multilinear(n);
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(density) {
                p.add_quad(i, j, Rational::from(rng.gen_range(-c..=c)))
                    .unwrap();
            }
        }
        if rng.gen_bool(density) {
            p.add_lin(i, Rational::from(rng.gen_range(-c..=c))).unwrap();
        }
    }
    p.add_constant(Rational::from(rng.gen_range(-c..=c)));
    p
}

/// General (non-multilinear) degree-2 polynomial with square terms and
/// integer coefficients in `[-c, c]`; the constant is drawn from a range
/// scaled to the size of the polynomial so both signs are common.
pub fn dense_general(rng: &mut TestRng, n: usize, c: i64) -> Degree2Polynomial {
    let mut p = Degree2Polynomial::new(n);
    for i in 0..n {
        for j in i..n {
            p.add_quad(i, j, Rational::from(rng.gen_range(-c..=c)))
                .unwrap();
        }
        p.add_lin(i, Rational::from(rng.gen_range(-c..=c))).unwrap();
    }
    let spread = c * (n as i64);
    p.add_constant(Rational::from(rng.gen_range(-spread..=spread)));
    p
}

/// Random symmetric matrix with integer entries in `[-c, c]` and, with
/// probability one half, a random rational scale.
pub fn random_symmetric(rng: &mut TestRng, n: usize, c: i64) -> SymmetricMatrix {
    let scale = if rng.gen_bool(0.5) {
        r(rng.gen_range(1..=9), rng.gen_range(1..=9))
    } else {
        Rational::from(1)
    };
    let mut vals = vec![vec![Rational::new(); n]; n];
    for i in 0..n {
        for j in i..n {
            let v = Rational::from(rng.gen_range(-c..=c)) * &scale;
            vals[i][j] = v.clone();
            vals[j][i] = v;
        }
    }
    SymmetricMatrix::from_fn(n, |i, j| vals[i][j].clone())
}

/// Erdős–Rényi graph `G(n, p)`.
pub fn erdos_renyi(rng: &mut TestRng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::new(n, edges).unwrap()
}
