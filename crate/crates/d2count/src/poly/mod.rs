//! Degree-2 polynomials with exact rational coefficients, together with the
//! exact statistics consumed by the counting pipeline.
//!
//! Variables are 0-based in the API (`x_0 .. x_{n-1}`); the `.d2p` text
//! format is 1-based and converted on the way in and out.

mod format;
mod graph;
mod linear;
mod matrix;
mod moment;
mod substitute;

use std::collections::BTreeMap;

use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::weighted_square_sum;

pub use format::{format_d2p, parse_d2p, parse_edge_list, poly_digest};
pub use graph::{graph_cut_poly, graph_induced_poly, Graph};
pub use linear::LinearForm;
pub use matrix::SymmetricMatrix;
pub use moment::{raw_moment_exact, raw_moment_exact_capped, DEFAULT_RAW_MOMENT_CAP};
pub use substitute::{residue, substitute_decomposition, substitute_rational};

/// A general degree-2 polynomial
/// `p(x) = sum_{i<=j} a_ij x_i x_j + sum_i b_i x_i + C` over `n` variables.
///
/// The representation is canonical: zero coefficients are never stored, so
/// equality of values coincides with equality of polynomials.  Equality
/// ignores the multilinear flag.  Serialization uses the `.d2p` text form.
#[derive(Clone, Debug)]
pub struct Degree2Polynomial {
    n: usize,
    quad: BTreeMap<(usize, usize), Rational>,
    lin: BTreeMap<usize, Rational>,
    constant: Rational,
    multilinear: bool,
}

impl PartialEq for Degree2Polynomial {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.quad == other.quad
            && self.lin == other.lin
            && self.constant == other.constant
    }
}

impl Eq for Degree2Polynomial {}

impl Serialize for Degree2Polynomial {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_d2p(self))
    }
}

impl<'de> Deserialize<'de> for Degree2Polynomial {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_d2p(&text).map_err(serde::de::Error::custom)
    }
}

/// A partial assignment of hypercube variables to `-1` or `+1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Restriction {
    pub assignments: BTreeMap<usize, i8>,
}

impl Restriction {
    /// The empty restriction.
    pub fn new() -> Self {
        Self::default()
    }

    /// Fixes `x_i` to `value`, which must be `-1` or `+1`.
    pub fn set(&mut self, i: usize, value: i8) -> Result<()> {
        if value != 1 && value != -1 {
            return Err(Error::Precondition(format!(
                "restriction value {value} is not +-1"
            )));
        }
        self.assignments.insert(i, value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// A decoupled polynomial `sum_i (lambda_i y_i^2 + mu_i y_i) + C`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecoupledPolynomial {
    #[serde(with = "crate::util::serde_rational::vec")]
    pub lambdas: Vec<Rational>,
    #[serde(with = "crate::util::serde_rational::vec")]
    pub mus: Vec<Rational>,
    #[serde(with = "crate::util::serde_rational")]
    pub constant: Rational,
}

impl DecoupledPolynomial {
    /// The constant polynomial `c` (no variables).
    pub fn constant(c: Rational) -> Self {
        Self {
            lambdas: Vec::new(),
            mus: Vec::new(),
            constant: c,
        }
    }

    /// Number of variables `K`.
    pub fn k(&self) -> usize {
        self.lambdas.len()
    }

    /// Appends the term `lambda y^2 + mu y` on a fresh variable.
    pub fn push(&mut self, lambda: Rational, mu: Rational) {
        self.lambdas.push(lambda);
        self.mus.push(mu);
    }

    /// Exact mean under independent standard Gaussians.
    pub fn mean_gaussian(&self) -> Rational {
        let mut m = self.constant.clone();
        for l in &self.lambdas {
            m += l;
        }
        m
    }

    /// Exact variance under independent standard Gaussians.
    pub fn variance_gaussian(&self) -> Rational {
        weighted_square_sum(
            self.lambdas
                .iter()
                .map(|l| (l, 2))
                .chain(self.mus.iter().map(|m| (m, 1))),
        )
    }

    /// Evaluates at a point `y` of length `K`.
    pub fn evaluate_f64(&self, y: &[f64]) -> f64 {
        let mut s = self.constant.to_f64();
        for ((l, m), &yi) in self.lambdas.iter().zip(&self.mus).zip(y) {
            s += l.to_f64() * yi * yi + m.to_f64() * yi;
        }
        s
    }

    /// The same polynomial as a general [`Degree2Polynomial`].
    pub fn to_polynomial(&self) -> Degree2Polynomial {
        let mut p = Degree2Polynomial::new(self.k());
        for (i, (l, m)) in self.lambdas.iter().zip(&self.mus).enumerate() {
            p.add_quad(i, i, l.clone()).expect("index in range");
            p.add_lin(i, m.clone()).expect("index in range");
        }
        p.add_constant(self.constant.clone());
        p
    }
}

impl Degree2Polynomial {
    /// The zero polynomial on `n` variables; square terms are allowed.
    pub fn new(n: usize) -> Self {
        Self {
            n,
            quad: BTreeMap::new(),
            lin: BTreeMap::new(),
            constant: Rational::new(),
            multilinear: false,
        }
    }

    /// The zero polynomial on `n` variables with square terms forbidden.
    pub fn new_multilinear(n: usize) -> Self {
        Self {
            multilinear: true,
            ..Self::new(n)
        }
    }

    /// Constant polynomial `c` on `n` variables.
    pub fn from_constant(n: usize, c: Rational) -> Self {
        let mut p = Self::new_multilinear(n);
        p.constant = c;
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Whether square terms are forbidden for this polynomial.
    pub fn multilinear_flag(&self) -> bool {
        self.multilinear
    }

    /// True when no `x_i^2` term is present (the polynomial is multilinear
    /// as a function, whatever its flag).
    pub fn is_multilinear(&self) -> bool {
        self.quad.keys().all(|&(i, j)| i != j)
    }

    /// Sets or clears the multilinear flag; setting it fails if a square
    /// term is present.
    pub fn set_multilinear_flag(&mut self, flag: bool) -> Result<()> {
        if flag && !self.is_multilinear() {
            return Err(Error::Precondition("polynomial has square terms".into()));
        }
        self.multilinear = flag;
        Ok(())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n {
            return Err(Error::Precondition(format!(
                "variable index {i} out of range for n = {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Adds `c x_i x_j` (the order of `i`, `j` is irrelevant).
    pub fn add_quad(&mut self, i: usize, j: usize, c: Rational) -> Result<()> {
        self.check_index(i)?;
        self.check_index(j)?;
        let key = if i <= j { (i, j) } else { (j, i) };
        if self.multilinear && key.0 == key.1 {
            return Err(Error::Precondition(format!(
                "square term x_{i}^2 in a multilinear polynomial"
            )));
        }
        add_entry(&mut self.quad, key, c);
        Ok(())
    }

    /// Adds `c x_i`.
    pub fn add_lin(&mut self, i: usize, c: Rational) -> Result<()> {
        self.check_index(i)?;
        add_entry(&mut self.lin, i, c);
        Ok(())
    }

    /// Adds `c` to the constant term.
    pub fn add_constant(&mut self, c: Rational) {
        self.constant += c;
    }

    /// Coefficient `a_ij` (zero when absent).
    pub fn quad_coeff(&self, i: usize, j: usize) -> Rational {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.quad.get(&key).cloned().unwrap_or_default()
    }

    /// Coefficient `b_i` (zero when absent).
    pub fn lin_coeff(&self, i: usize) -> Rational {
        self.lin.get(&i).cloned().unwrap_or_default()
    }

    pub fn constant_term(&self) -> &Rational {
        &self.constant
    }

    /// Nonzero quadratic coefficients in ascending `(i, j)` order.
    pub fn quad_terms(&self) -> impl Iterator<Item = (&(usize, usize), &Rational)> {
        self.quad.iter()
    }

    /// Nonzero linear coefficients in ascending index order.
    pub fn lin_terms(&self) -> impl Iterator<Item = (&usize, &Rational)> {
        self.lin.iter()
    }

    /// Number of stored nonzero non-constant coefficients.
    pub fn num_terms(&self) -> usize {
        self.quad.len() + self.lin.len()
    }

    /// True when every non-constant coefficient is zero.
    pub fn is_constant(&self) -> bool {
        self.quad.is_empty() && self.lin.is_empty()
    }

    /// `c * p`.
    pub fn scaled(&self, c: &Rational) -> Self {
        if *c == 0 {
            let mut z = Self::new(self.n);
            z.multilinear = self.multilinear;
            return z;
        }
        let mut q = self.clone();
        for v in q.quad.values_mut() {
            *v *= c;
        }
        for v in q.lin.values_mut() {
            *v *= c;
        }
        q.constant *= c;
        q
    }

    /// `p + c`.
    pub fn shifted(&self, c: &Rational) -> Self {
        let mut q = self.clone();
        q.constant += c;
        q
    }

    /// `p - p(0)`, i.e. the polynomial with its constant term removed.
    pub fn without_constant(&self) -> Self {
        let mut q = self.clone();
        q.constant = Rational::new();
        q
    }

    /// `p + other` (variable counts must agree).
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::Precondition(
                "adding polynomials over different variable counts".into(),
            ));
        }
        let mut q = self.clone();
        q.multilinear = self.multilinear && other.multilinear;
        for (k, v) in &other.quad {
            add_entry(&mut q.quad, *k, v.clone());
        }
        for (k, v) in &other.lin {
            add_entry(&mut q.lin, *k, v.clone());
        }
        q.constant += &other.constant;
        Ok(q)
    }

    /// Evaluates at a rational point.
    pub fn evaluate(&self, x: &[Rational]) -> Result<Rational> {
        if x.len() != self.n {
            return Err(Error::Precondition(format!(
                "point has {} coordinates, expected {}",
                x.len(),
                self.n
            )));
        }
        let mut s = self.constant.clone();
        for (&(i, j), a) in &self.quad {
            s += Rational::from(a * &x[i]) * &x[j];
        }
        for (&i, b) in &self.lin {
            s += Rational::from(b * &x[i]);
        }
        Ok(s)
    }

    /// Evaluates at a hypercube point given as signs `+-1`.
    pub fn evaluate_signs(&self, x: &[i8]) -> Rational {
        let mut s = self.constant.clone();
        for (&(i, j), a) in &self.quad {
            if x[i] * x[j] > 0 {
                s += a;
            } else {
                s -= a;
            }
        }
        for (&i, b) in &self.lin {
            if x[i] > 0 {
                s += b;
            } else {
                s -= b;
            }
        }
        s
    }

    /// Floating-point evaluation (oracles only).
    pub fn evaluate_f64(&self, x: &[f64]) -> f64 {
        let mut s = self.constant.to_f64();
        for (&(i, j), a) in &self.quad {
            s += a.to_f64() * x[i] * x[j];
        }
        for (&i, b) in &self.lin {
            s += b.to_f64() * x[i];
        }
        s
    }

    /// Exact mean under `x ~ N(0,1)^n`: `C + sum_i a_ii`.
    pub fn mean_gaussian(&self) -> Rational {
        let mut m = self.constant.clone();
        for (&(i, j), a) in &self.quad {
            if i == j {
                m += a;
            }
        }
        m
    }

    /// Exact variance under `x ~ N(0,1)^n`:
    /// `sum_i (b_i^2 + 2 a_ii^2) + sum_{i<j} a_ij^2`.
    pub fn variance_gaussian(&self) -> Rational {
        weighted_square_sum(
            self.quad
                .iter()
                .map(|(&(i, j), a)| (a, if i == j { 2 } else { 1 }))
                .chain(self.lin.values().map(|b| (b, 1))),
        )
    }

    /// Exact variance under the uniform distribution on `{-1,1}^n`, which for
    /// a multilinear polynomial is the sum of its squared non-constant
    /// coefficients.
    pub fn variance_boolean(&self) -> Result<Rational> {
        self.require_multilinear("variance_boolean")?;
        Ok(self.ss())
    }

    /// Exact mean under the uniform distribution on `{-1,1}^n`.
    pub fn mean_boolean(&self) -> Result<Rational> {
        self.require_multilinear("mean_boolean")?;
        Ok(self.constant.clone())
    }

    /// `SS(p) = sum a_ij^2 + sum b_i^2` (all non-constant coefficients).
    pub fn ss(&self) -> Rational {
        weighted_square_sum(self.quad.values().chain(self.lin.values()).map(|a| (a, 1)))
    }

    /// Influences `Inf_i(p)`: the sum of squared coefficients of monomials
    /// containing `x_i`.
    pub fn influences(&self) -> Result<Vec<Rational>> {
        self.require_multilinear("influences")?;
        let mut inf = vec![Rational::new(); self.n];
        for (&(i, j), a) in &self.quad {
            let sq = Rational::from(a * a);
            inf[i] += &sq;
            inf[j] += sq;
        }
        for (&i, b) in &self.lin {
            inf[i] += Rational::from(b * b);
        }
        Ok(inf)
    }

    /// Whether `max_i Inf_i(p) <= tau * sum_i Inf_i(p)`.  The zero
    /// polynomial (and any constant) counts as regular for every `tau`.
    pub fn is_regular(&self, tau: &Rational) -> Result<bool> {
        let inf = self.influences()?;
        let total: Rational = inf.iter().fold(Rational::new(), |acc, x| acc + x);
        let max = inf.iter().max().cloned().unwrap_or_default();
        Ok(max <= Rational::from(tau * &total))
    }

    /// The symmetric matrix `A` with `A_ij = a_ij (1/2 + delta_ij/2)`, so
    /// that `x^T A x` is the quadratic part of `p`.
    pub fn quadratic_matrix(&self) -> SymmetricMatrix {
        let mut m = SymmetricMatrix::zeros(self.n);
        for (&(i, j), a) in &self.quad {
            if i == j {
                m.set(i, i, a.clone());
            } else {
                m.set(i, j, Rational::from(a / 2u32));
            }
        }
        m
    }

    /// The linear coefficients as a dense vector.
    pub fn linear_vector(&self) -> Vec<Rational> {
        let mut b = vec![Rational::new(); self.n];
        for (&i, v) in &self.lin {
            b[i] = v.clone();
        }
        b
    }

    /// Builds a polynomial from its quadratic matrix, linear vector and
    /// constant; off-diagonal entries contribute `2 A_ij x_i x_j`.
    pub fn from_parts(a: &SymmetricMatrix, b: &[Rational], c: Rational) -> Self {
        let n = a.n();
        let mut p = Self::new(n);
        for i in 0..n {
            for j in i..n {
                let e = a.get(i, j);
                if *e != 0 {
                    let coeff = if i == j {
                        e.clone()
                    } else {
                        Rational::from(e * 2u32)
                    };
                    p.quad.insert((i, j), coeff);
                }
            }
        }
        for (i, v) in b.iter().enumerate() {
            if *v != 0 {
                p.lin.insert(i, v.clone());
            }
        }
        p.constant = c;
        p
    }

    /// Sum of squared non-constant coefficients (`||p - p(0)||_2^2` over
    /// the hypercube for multilinear `p`).
    pub fn nonconstant_sq_norm(&self) -> Rational {
        self.ss()
    }

    /// The restriction `p_rho`: fixed variables are substituted and vanish
    /// from the result, which keeps the same variable count `n`.
    pub fn restrict(&self, rho: &Restriction) -> Result<Self> {
        self.require_multilinear("restrict")?;
        for &i in rho.assignments.keys() {
            self.check_index(i)?;
        }
        let mut q = Self {
            n: self.n,
            quad: BTreeMap::new(),
            lin: BTreeMap::new(),
            constant: self.constant.clone(),
            multilinear: self.multilinear,
        };
        for (&(i, j), a) in &self.quad {
            match (rho.assignments.get(&i), rho.assignments.get(&j)) {
                (Some(&si), Some(&sj)) => {
                    if si * sj > 0 {
                        q.constant += a;
                    } else {
                        q.constant -= a;
                    }
                }
                (Some(&si), None) => add_entry(&mut q.lin, j, signed(a, si)),
                (None, Some(&sj)) => add_entry(&mut q.lin, i, signed(a, sj)),
                (None, None) => add_entry(&mut q.quad, (i, j), a.clone()),
            }
        }
        for (&i, b) in &self.lin {
            match rho.assignments.get(&i) {
                Some(&si) => q.constant += signed(b, si),
                None => add_entry(&mut q.lin, i, b.clone()),
            }
        }
        Ok(q)
    }

    /// Least common multiple of all coefficient denominators.
    pub fn denominator_lcm(&self) -> rug::Integer {
        let mut l = rug::Integer::from(1);
        for v in self
            .quad
            .values()
            .chain(self.lin.values())
            .chain(std::iter::once(&self.constant))
        {
            l.lcm_mut(v.denom());
        }
        l
    }

    /// `(D, D * p)` where `D > 0` clears every denominator; the sign pattern
    /// of `p` is unchanged.
    pub fn integer_scaled(&self) -> (rug::Integer, Self) {
        let d = self.denominator_lcm();
        let q = self.scaled(&Rational::from(d.clone()));
        (d, q)
    }

    /// True when every coefficient is an integer.
    pub fn has_integer_coefficients(&self) -> bool {
        self.denominator_lcm() == 1
    }

    /// Sub-polynomial made of the monomials whose variables all lie in
    /// `keep`, re-indexed so that `keep[t]` becomes variable `t`.
    pub fn project(&self, keep: &[usize]) -> Self {
        let mut pos = vec![usize::MAX; self.n];
        for (t, &i) in keep.iter().enumerate() {
            pos[i] = t;
        }
        let mut q = Self::new(keep.len());
        q.multilinear = self.multilinear;
        for (&(i, j), a) in &self.quad {
            if pos[i] != usize::MAX && pos[j] != usize::MAX {
                let (a_, b_) = (pos[i].min(pos[j]), pos[i].max(pos[j]));
                q.quad.insert((a_, b_), a.clone());
            }
        }
        for (&i, b) in &self.lin {
            if pos[i] != usize::MAX {
                q.lin.insert(pos[i], b.clone());
            }
        }
        q.constant = self.constant.clone();
        q
    }

    pub(crate) fn require_multilinear(&self, op: &str) -> Result<()> {
        if !self.is_multilinear() {
            return Err(Error::Precondition(format!(
                "{op} requires a multilinear polynomial (no x_i^2 terms)"
            )));
        }
        Ok(())
    }
}

fn signed(a: &Rational, s: i8) -> Rational {
    if s > 0 {
        a.clone()
    } else {
        Rational::from(-a)
    }
}

fn add_entry<K: Ord>(map: &mut BTreeMap<K, Rational>, key: K, c: Rational) {
    if c == 0 {
        return;
    }
    match map.entry(key) {
        std::collections::btree_map::Entry::Vacant(e) => {
            e.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut e) => {
            *e.get_mut() += c;
            if *e.get() == 0 {
                e.remove();
            }
        }
    }
}
