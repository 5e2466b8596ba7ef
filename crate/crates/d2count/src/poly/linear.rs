//! Normalized linear forms and their conversion to exact rational unit
//! vectors.

use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// A linear form `L(x) = sum_i w_i x_i` with floating-point weights.
///
/// `tolerance` is the permitted deviation of `||w||_2` from one when the form
/// is used as a normalized direction.
#[derive(Clone, Debug)]
pub struct LinearForm {
    pub weights: Vec<Float>,
    pub tolerance: f64,
}

impl LinearForm {
    pub fn new(weights: Vec<Float>, tolerance: f64) -> Self {
        Self { weights, tolerance }
    }

    /// Builds a form from `f64` weights at 53-bit precision.
    pub fn from_f64(weights: &[f64], tolerance: f64) -> Self {
        Self {
            weights: weights.iter().map(|&w| Float::with_val(53, w)).collect(),
            tolerance,
        }
    }

    /// The standard basis vector `e_i` in dimension `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        let mut w = vec![0.0; n];
        w[i] = 1.0;
        Self::from_f64(&w, 1e-12)
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    /// `||w||_2` at the weights' working precision.
    pub fn norm(&self) -> Float {
        let prec = self.weights.iter().map(Float::prec).max().unwrap_or(53);
        let mut s = Float::with_val(prec, 0);
        for w in &self.weights {
            s += Float::with_val(prec, w * w);
        }
        s.sqrt()
    }

    /// Fails unless `| ||w|| - 1 | <= tolerance`.
    pub fn check_normalized(&self) -> Result<()> {
        let dev = (self.norm() - 1u32).abs().to_f64();
        if !(dev <= self.tolerance) {
            return Err(Error::Precondition(format!(
                "linear form is not normalized (| ||w|| - 1 | = {dev:e} > {:e})",
                self.tolerance
            )));
        }
        Ok(())
    }

    /// An exact rational vector `u` with `||u||_2 = 1` exactly, close to
    /// `w / ||w||`.
    ///
    /// The direction is sent through inverse stereographic projection from
    /// the pole opposite to the largest-magnitude coordinate: the projected
    /// coordinates are rounded to dyadic rationals with `bits` fractional
    /// bits and mapped back, which lands exactly on the unit sphere.  The
    /// angle to `w` is `O(2^-bits)`.
    pub fn to_rational_unit(&self, bits: u32) -> Result<Vec<Rational>> {
        let n = self.weights.len();
        if n == 0 {
            return Err(Error::Precondition("empty linear form".into()));
        }
        let norm = self.norm();
        if norm.is_zero() || !norm.is_finite() {
            return Err(Error::Precondition(
                "degenerate linear form (norm 0)".into(),
            ));
        }
        let prec = self
            .weights
            .iter()
            .map(Float::prec)
            .max()
            .unwrap_or(53)
            .max(bits + 64);
        let unit: Vec<Float> = self
            .weights
            .iter()
            .map(|w| Float::with_val(prec, w / &norm))
            .collect();
        // Pole: largest |w_j|, lowest index on ties.
        let mut j0 = 0;
        for i in 1..n {
            if unit[i].clone().abs() > unit[j0].clone().abs() {
                j0 = i;
            }
        }
        let sigma: i32 = if unit[j0].is_sign_negative() { -1 } else { 1 };
        let denom = Float::with_val(prec, &unit[j0] * sigma) + 1u32;
        let scale = Integer::from(1) << bits;
        let mut r = vec![Rational::new(); n];
        let mut s_sq = Rational::new();
        for i in 0..n {
            if i == j0 {
                continue;
            }
            let si = Float::with_val(prec, &unit[i] * sigma) / &denom;
            let scaled = si * &scale;
            let k = scaled.round().to_integer().expect("finite");
            let ri = Rational::from((k, scale.clone()));
            s_sq += Rational::from(&ri * &ri);
            r[i] = ri;
        }
        let one_plus = Rational::from(&s_sq + 1u32);
        let mut u = vec![Rational::new(); n];
        for i in 0..n {
            let v = if i == j0 {
                Rational::from(1u32 - &s_sq) / &one_plus
            } else {
                Rational::from(&r[i] * 2u32) / &one_plus
            };
            u[i] = if sigma < 0 { -v } else { v };
        }
        Ok(u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_unit_is_exactly_unit() {
        let f = LinearForm::from_f64(&[0.6, -0.8, 0.001], 1e-2);
        let u = f.to_rational_unit(40).unwrap();
        let s = u
            .iter()
            .fold(Rational::new(), |a, x| a + Rational::from(x * x));
        assert_eq!(s, 1);
        assert!((u[1].to_f64() + 0.8).abs() < 1e-3);
    }

    #[test]
    fn basis_maps_to_basis() {
        let u = LinearForm::basis(3, 1).to_rational_unit(30).unwrap();
        assert_eq!(u, vec![Rational::new(), Rational::from(1), Rational::new()]);
        let neg = LinearForm::from_f64(&[0.0, -1.0], 1e-9)
            .to_rational_unit(30)
            .unwrap();
        assert_eq!(neg, vec![Rational::new(), Rational::from(-1)]);
    }

    #[test]
    fn degenerate_rejected() {
        assert!(LinearForm::from_f64(&[0.0, 0.0], 1e-9)
            .to_rational_unit(30)
            .is_err());
        assert!(LinearForm::from_f64(&[2.0, 0.0], 1e-9)
            .check_normalized()
            .is_err());
    }
}
