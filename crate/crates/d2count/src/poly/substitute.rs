//! Change of basis along a unit direction: `x = w y + P x'` with
//! `P = I - w w^T`.

use rug::{Integer, Rational};

use super::{Degree2Polynomial, LinearForm};
use crate::error::{Error, Result};

/// Fractional bits used when a [`LinearForm`] is turned into an exact unit
/// vector, unless its own precision is higher.
const MIN_UNIT_BITS: u32 = 64;

fn unit_of(w: &LinearForm) -> Result<Vec<Rational>> {
    w.check_normalized()?;
    let bits = w
        .weights
        .iter()
        .map(|f| f.prec())
        .max()
        .unwrap_or(53)
        .max(MIN_UNIT_BITS);
    w.to_rational_unit(bits)
}

fn lcm_into(acc: &mut Integer, x: &Rational) {
    if !acc.is_divisible(x.denom()) {
        acc.lcm_mut(x.denom());
    }
}

fn dot(u: &[Rational], v: &[Rational]) -> Rational {
    u.iter()
        .zip(v)
        .fold(Rational::new(), |acc, (a, b)| acc + Rational::from(a * b))
}

/// `q(y, x) = p(w y + (I - w w^T) x)` for an exact unit vector `w`.
///
/// The result has `n + 1` variables: index 0 is `y` and index `j + 1` is
/// `x_j`.  When `||w|| = 1` exactly, `q(y, x)` with independent standard
/// Gaussians has the same distribution as `p(x)`.
pub fn substitute_rational(p: &Degree2Polynomial, w: &[Rational]) -> Result<Degree2Polynomial> {
    let n = p.n();
    if w.len() != n {
        return Err(Error::Precondition(format!(
            "direction has {} coordinates, expected {n}",
            w.len()
        )));
    }
    if dot(w, w) != 1 {
        return Err(Error::Precondition(
            "direction is not an exact unit vector".into(),
        ));
    }
    // Everything is computed over common denominators: A = Ah / D,
    // b = bh / D and w = u / d with integer Ah, bh, u.
    let a = p.quadratic_matrix();
    let b = p.linear_vector();
    let mut den = Integer::from(1);
    for i in 0..n {
        for j in i..n {
            lcm_into(&mut den, a.get(i, j));
        }
        lcm_into(&mut den, &b[i]);
    }
    let mut d = Integer::from(1);
    for x in w {
        lcm_into(&mut d, x);
    }
    let scale = |x: &Rational, m: &Integer| Integer::from(m / x.denom()) * x.numer();
    let ah: Vec<Vec<Integer>> = (0..n)
        .map(|i| (0..n).map(|j| scale(a.get(i, j), &den)).collect())
        .collect();
    let bh: Vec<Integer> = b.iter().map(|x| scale(x, &den)).collect();
    let u: Vec<Integer> = w.iter().map(|x| scale(x, &d)).collect();
    // Aw = vh / (D d), lambda = big_l / (D d^2), mu = ub / (D d).
    let vh: Vec<Integer> = ah
        .iter()
        .map(|row| row.iter().zip(&u).map(|(x, y)| Integer::from(x * y)).sum())
        .collect();
    let big_l: Integer = u.iter().zip(&vh).map(|(x, y)| Integer::from(x * y)).sum();
    let ub: Integer = u.iter().zip(&bh).map(|(x, y)| Integer::from(x * y)).sum();
    let d2 = Integer::from(d.square_ref());
    let d4 = Integer::from(d2.square_ref());
    let dd = Integer::from(&den * &d);
    let frac = |num: Integer, den: Integer| Rational::from((num, den));

    let mut q = Degree2Polynomial::new(n + 1);
    q.add_quad(0, 0, frac(big_l.clone(), Integer::from(&den * &d2)))?;
    q.add_lin(0, frac(ub.clone(), dd.clone()))?;
    let coupling_den = Integer::from(&dd * &d2);
    for j in 0..n {
        // 2 (Aw - lambda w)_j = 2 (vh_j d^2 - L u_j) / (D d^3)
        let num = (Integer::from(&vh[j] * &d2) - Integer::from(&big_l * &u[j])) * 2u32;
        q.add_quad(0, j + 1, frac(num, coupling_den.clone()))?;
    }
    let pap_den = Integer::from(&den * &d4);
    let pb_den = Integer::from(&den * &d2);
    for i in 0..n {
        for j in i..n {
            // (PAP)_ij = (Ah_ij d^4 - d^2 (u_i vh_j + vh_i u_j) + L u_i u_j) / (D d^4)
            let cross = Integer::from(&u[i] * &vh[j]) + Integer::from(&vh[i] * &u[j]);
            let mut num = Integer::from(&ah[i][j] * &d4) - cross * &d2;
            num += Integer::from(&big_l * &u[i]) * &u[j];
            if i != j {
                num *= 2u32;
            }
            q.add_quad(i + 1, j + 1, frac(num, pap_den.clone()))?;
        }
        // (Pb)_i = (bh_i d^2 - (u.bh) u_i) / (D d^2)
        let num = Integer::from(&bh[i] * &d2) - Integer::from(&ub * &u[i]);
        q.add_lin(i + 1, frac(num, pb_den.clone()))?;
    }
    q.add_constant(p.constant_term().clone());
    Ok(q)
}

/// `q(y, x) = p(alpha y + R(x))` for the normalized direction `w1`
/// (see [`substitute_rational`]); `w1` is first snapped to an exact unit
/// vector.
pub fn substitute_decomposition(
    p: &Degree2Polynomial,
    w1: &LinearForm,
) -> Result<Degree2Polynomial> {
    let w = unit_of(w1)?;
    substitute_rational(p, &w)
}

/// `Res(p, L1)`: the bilinear part `2 y (Aw - lambda w) . x` of the
/// substituted polynomial that couples `y` to the remaining variables.
///
/// Variables are laid out as in [`substitute_rational`].
pub fn residue(p: &Degree2Polynomial, l1: &LinearForm) -> Result<Degree2Polynomial> {
    let w = unit_of(l1)?;
    if w.len() != p.n() {
        return Err(Error::Precondition(format!(
            "direction has {} coordinates, expected {}",
            w.len(),
            p.n()
        )));
    }
    let a = p.quadratic_matrix();
    let aw = a.mul_vec(&w);
    let lambda = dot(&w, &aw);
    let mut r = Degree2Polynomial::new(p.n() + 1);
    for j in 0..p.n() {
        let c = (&aw[j] - Rational::from(&lambda * &w[j])) * 2u32;
        r.add_quad(0, j + 1, c)?;
    }
    Ok(r)
}

impl Degree2Polynomial {
    /// The part of `p` made of the cross terms `x_v x_j` (`j != v`): the
    /// residue of `p` with respect to variable `v`.
    pub fn cross_terms_with(&self, v: usize) -> Degree2Polynomial {
        let mut r = Degree2Polynomial::new(self.n());
        for (&(i, j), c) in self.quad_terms() {
            if i != j && (i == v || j == v) {
                r.add_quad(i, j, c.clone()).expect("index in range");
            }
        }
        r
    }

    /// The polynomial with every monomial involving variable `v` removed.
    pub fn without_var(&self, v: usize) -> Degree2Polynomial {
        let mut r = Degree2Polynomial::new(self.n());
        for (&(i, j), c) in self.quad_terms() {
            if i != v && j != v {
                r.add_quad(i, j, c.clone()).expect("index in range");
            }
        }
        for (&i, c) in self.lin_terms() {
            if i != v {
                r.add_lin(i, c.clone()).expect("index in range");
            }
        }
        r.add_constant(self.constant_term().clone());
        r
    }

    /// Drops variable `v` (which must not occur) and shifts later indices
    /// down by one.
    pub fn drop_var(&self, v: usize) -> Result<Degree2Polynomial> {
        let shift = |i: usize| if i > v { i - 1 } else { i };
        let mut r = Degree2Polynomial::new(self.n() - 1);
        for (&(i, j), c) in self.quad_terms() {
            if i == v || j == v {
                return Err(Error::Internal(format!("variable {v} still occurs")));
            }
            r.add_quad(shift(i), shift(j), c.clone())?;
        }
        for (&i, c) in self.lin_terms() {
            if i == v {
                return Err(Error::Internal(format!("variable {v} still occurs")));
            }
            r.add_lin(shift(i), c.clone())?;
        }
        r.add_constant(self.constant_term().clone());
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn basis_direction_renames_variable() {
        let mut p = Degree2Polynomial::new(2);
        p.add_quad(0, 1, r(3, 1)).unwrap();
        p.add_quad(0, 0, r(2, 1)).unwrap();
        p.add_lin(0, r(5, 1)).unwrap();
        p.add_lin(1, r(-1, 1)).unwrap();
        let q = substitute_decomposition(&p, &LinearForm::basis(2, 0)).unwrap();
        assert_eq!(q.quad_coeff(0, 0), 2);
        assert_eq!(q.quad_coeff(0, 2), 3);
        assert_eq!(q.lin_coeff(0), 5);
        assert_eq!(q.lin_coeff(2), -1);
        assert_eq!(q.lin_coeff(1), 0);
        assert_eq!(q.quad_coeff(1, 1), 0);
        assert_eq!(q.variance_gaussian(), p.variance_gaussian());
    }

    #[test]
    fn eigen_direction_of_cross_term() {
        let mut p = Degree2Polynomial::new(2);
        p.add_quad(0, 1, r(1, 1)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = substitute_decomposition(&p, &LinearForm::from_f64(&[s, s], 1e-9)).unwrap();
        assert!((q.quad_coeff(0, 0).to_f64() - 0.5).abs() < 1e-12);
        assert_eq!(q.variance_gaussian(), p.variance_gaussian());
        assert_eq!(q.mean_gaussian(), p.mean_gaussian());
    }

    #[test]
    fn residue_examples() {
        let mut lin = Degree2Polynomial::new(2);
        lin.add_lin(0, r(1, 1)).unwrap();
        assert!(residue(&lin, &LinearForm::basis(2, 0))
            .unwrap()
            .is_constant());
        let mut sq = Degree2Polynomial::new(1);
        sq.add_quad(0, 0, r(1, 1)).unwrap();
        assert!(residue(&sq, &LinearForm::basis(1, 0))
            .unwrap()
            .is_constant());
        let mut x = Degree2Polynomial::new(2);
        x.add_quad(0, 1, r(1, 1)).unwrap();
        assert_eq!(
            residue(&x, &LinearForm::basis(2, 0))
                .unwrap()
                .variance_gaussian(),
            1
        );
        assert!(residue(&x, &LinearForm::from_f64(&[0.5, 0.0], 1e-6)).is_err());
    }
}
