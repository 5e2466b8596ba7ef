//! Dense symmetric matrices with exact rational entries.

use rug::{Integer, Rational};

/// A dense symmetric `n x n` matrix of exact rationals.  Only the upper
/// triangle is stored, so symmetry holds by construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymmetricMatrix {
    n: usize,
    upper: Vec<Rational>,
}

impl SymmetricMatrix {
    /// The zero matrix.
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            upper: vec![Rational::new(); n * (n + 1) / 2],
        }
    }

    /// Builds a matrix from a function of `(i, j)` with `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// A diagonal matrix.
    pub fn diagonal(d: &[Rational]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, v) in d.iter().enumerate() {
            m.set(i, i, v.clone());
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * self.n - i * (i + 1) / 2 + j
    }

    /// Entry `(i, j)`; equal to entry `(j, i)`.
    pub fn get(&self, i: usize, j: usize) -> &Rational {
        &self.upper[self.idx(i, j)]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: Rational) {
        let k = self.idx(i, j);
        self.upper[k] = v;
    }

    /// True when every entry is zero.
    pub fn is_zero(&self) -> bool {
        self.upper.iter().all(|v| *v == 0)
    }

    /// Squared Frobenius norm `sum_ij A_ij^2`.
    pub fn frobenius_sq(&self) -> Rational {
        let mut s = Rational::new();
        for i in 0..self.n {
            for j in i..self.n {
                let sq = Rational::from(self.get(i, j) * self.get(i, j));
                if i == j {
                    s += sq;
                } else {
                    s += sq * 2u32;
                }
            }
        }
        s
    }

    /// Trace.
    pub fn trace(&self) -> Rational {
        (0..self.n).fold(Rational::new(), |acc, i| acc + self.get(i, i))
    }

    /// Exact product `A v`.
    pub fn mul_vec(&self, v: &[Rational]) -> Vec<Rational> {
        // Work over common denominators: A = Ah / D and v = u / d.
        let lcm = |xs: &mut dyn Iterator<Item = &Rational>| {
            let mut l = Integer::from(1);
            for x in xs {
                if !l.is_divisible(x.denom()) {
                    l.lcm_mut(x.denom());
                }
            }
            l
        };
        let den = lcm(&mut self.upper.iter());
        let d = lcm(&mut v.iter());
        let scale = |x: &Rational, m: &Integer| {
            if x.denom() == m {
                x.numer().clone()
            } else {
                Integer::from(m / x.denom()) * x.numer()
            }
        };
        let ah: Vec<Integer> = self.upper.iter().map(|x| scale(x, &den)).collect();
        let u: Vec<Integer> = v.iter().map(|x| scale(x, &d)).collect();
        let dd = Integer::from(&den * &d);
        (0..self.n)
            .map(|i| {
                let mut acc = Integer::new();
                for (j, uj) in u.iter().enumerate() {
                    if *uj != 0 {
                        acc += Integer::from(&ah[self.idx(i, j)] * uj);
                    }
                }
                Rational::from((acc, dd.clone()))
            })
            .collect()
    }

    /// Row-major `f64` copy.
    pub fn to_f64_dense(&self) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.get(i, j).to_f64();
            }
        }
        out
    }

    /// `-A`.
    pub fn negated(&self) -> Self {
        Self {
            n: self.n,
            upper: self.upper.iter().map(|v| Rational::from(-v)).collect(),
        }
    }

    /// `A - lambda w w^T` in exact arithmetic.
    pub fn minus_rank_one(&self, lambda: &Rational, w: &[Rational]) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            for j in i..self.n {
                let d = Rational::from(lambda * &w[i]) * &w[j];
                let k = m.idx(i, j);
                m.upper[k] -= d;
            }
        }
        m
    }
}
