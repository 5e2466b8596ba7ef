//! High-precision standard normal CDF with a rigorous error bound.

use rug::float::Constant;
use rug::{Float, Rational};

/// `Phi(x)` to within `2^-bits`, returned at `bits + 32` bits of precision.
///
/// For `a = |x|` the series `Phi(a) = 1/2 + phi(a) sum_k a^(2k+1) / (2k+1)!!`
/// is summed until the terms have dropped below the target and decay by at
/// least a factor of two per step, so the tail is bounded by twice the next
/// term.  All terms are positive, so no cancellation occurs.  For `a` so
/// large that the Mills bound `phi(a)/a` is already below the target, the
/// result is `0` or `1` outright.  Negative arguments use `Phi(-a) = 1 - Phi(a)`.
pub fn normal_cdf_hp(x: &Rational, bits: u32) -> Float {
    let prec = bits + 32;
    if *x == 0 {
        return Float::with_val(prec, 0.5);
    }
    let a = Float::with_val(prec, x.clone().abs());
    let upper = upper_cdf(&a, bits + 1, prec);
    if *x > 0 {
        upper
    } else {
        Float::with_val(prec, 1 - upper)
    }
}

/// `Phi(a)` for `a > 0` to within `2^-target`.
fn upper_cdf(a: &Float, target: u32, prec: u32) -> Float {
    let a2 = Float::with_val(prec, a.square_ref());
    let pi = Float::with_val(prec, Constant::Pi);
    let root_two_pi = Float::with_val(prec, pi * 2u32).sqrt();
    let mut density = (Float::with_val(prec, -&a2) / 2u32).exp();
    density /= &root_two_pi;
    // Mills ratio: 1 - Phi(a) <= phi(a) / a.
    let eps = Float::with_val(prec, Float::i_exp(1, -(target as i32)));
    if Float::with_val(prec, &density / a) <= eps {
        return Float::with_val(prec, 1);
    }
    let mut term = a.clone();
    let mut sum = Float::new(prec);
    let mut k: u32 = 0;
    loop {
        sum += &term;
        term *= &a2;
        term /= 2 * k + 3;
        k += 1;
        let decaying = Float::with_val(prec, &a2 * 2u32) <= 2 * k + 3;
        if decaying
            && Float::with_val(prec, &density * &term) * 2u32 <= Float::with_val(prec, &eps / 4u32)
        {
            break;
        }
    }
    Float::with_val(prec, density * sum) + 0.5
}
