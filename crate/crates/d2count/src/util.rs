//! Small exact-arithmetic helpers on top of `rug`.

use std::cmp::Ordering;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};

/// Exact rational value of a finite `f64`.
pub fn rat_f64(x: f64) -> Rational {
    Rational::from_f64(x).expect("finite f64")
}

/// `2^e` as an exact rational (negative `e` allowed).
pub fn pow2(e: i64) -> Rational {
    if e >= 0 {
        Rational::from(Integer::from(1) << (e as u32))
    } else {
        Rational::from((Integer::from(1), Integer::from(1) << ((-e) as u32)))
    }
}

/// Largest `e` with `2^e <= x`, for `x > 0`.
pub fn floor_log2(x: &Rational) -> i64 {
    assert!(*x > 0, "floor_log2 of a non-positive value");
    let mut e = x.numer().significant_bits() as i64 - x.denom().significant_bits() as i64;
    while pow2(e) > *x {
        e -= 1;
    }
    while pow2(e + 1) <= *x {
        e += 1;
    }
    e
}

/// Smallest `e` with `2^e >= x`, for `x > 0`.
pub fn ceil_log2(x: &Rational) -> i64 {
    let e = floor_log2(x);
    if pow2(e) == *x {
        e
    } else {
        e + 1
    }
}

/// Largest power of two not exceeding `x > 0`.
pub fn pow2_floor(x: &Rational) -> Rational {
    pow2(floor_log2(x))
}

/// Nearest integer to `x`, breaking exact halves toward the even neighbour.
pub fn round_half_even(x: &Rational) -> Integer {
    let fl = x.clone().floor();
    let fl_int = fl.numer().clone();
    let frac = Rational::from(x - &fl);
    match frac.cmp(&Rational::from((1, 2))) {
        Ordering::Less => fl_int,
        Ordering::Greater => fl_int + 1,
        Ordering::Equal => {
            if fl_int.is_even() {
                fl_int
            } else {
                fl_int + 1
            }
        }
    }
}

/// Nearest integer to `x`, breaking exact halves toward zero.
pub fn round_half_toward_zero(x: &Rational) -> Integer {
    let fl = x.clone().floor();
    let fl_int = fl.numer().clone();
    let frac = Rational::from(x - &fl);
    match frac.cmp(&Rational::from((1, 2))) {
        Ordering::Less => fl_int,
        Ordering::Greater => fl_int + 1,
        Ordering::Equal => {
            if fl_int < 0 {
                fl_int + 1
            } else {
                fl_int
            }
        }
    }
}

/// `floor(x)` as an integer.
pub fn floor_int(x: &Rational) -> Integer {
    x.clone().floor().numer().clone()
}

/// `ceil(x)` as an integer.
pub fn ceil_int(x: &Rational) -> Integer {
    x.clone().ceil().numer().clone()
}

/// `floor(sqrt(x))` for a non-negative rational `x`.
pub fn floor_sqrt(x: &Rational) -> Integer {
    assert!(*x >= 0);
    floor_int(x).sqrt()
}

/// `ceil(sqrt(x))` for a non-negative rational `x`.
pub fn ceil_sqrt(x: &Rational) -> Integer {
    let r = floor_sqrt(x);
    if Rational::from(&r * &r) == *x {
        r
    } else {
        r + 1
    }
}

/// `sum_k w_k x_k^2`, accumulated over a common denominator so that only
/// one canonicalization is needed (much faster than repeated rational
/// additions when the denominators are large and mostly shared).
pub fn weighted_square_sum<'a>(terms: impl IntoIterator<Item = (&'a Rational, u32)>) -> Rational {
    square_sum_of_fractions(
        terms
            .into_iter()
            .filter(|(x, _)| **x != 0)
            .map(|(x, w)| (x.numer().clone(), x.denom().clone(), w)),
    )
}

/// `sum_k w_k (num_k / den_k)^2` for fractions that need not be in lowest
/// terms (`den_k > 0`).
pub fn square_sum_of_fractions(
    terms: impl IntoIterator<Item = (Integer, Integer, u32)>,
) -> Rational {
    let terms: Vec<(Integer, Integer, u32)> =
        terms.into_iter().filter(|(n, _, _)| *n != 0).collect();
    let mut lcm = Integer::from(1);
    for (_, d, _) in &terms {
        if !lcm.is_divisible(d) {
            lcm.lcm_mut(d);
        }
    }
    let mut sum = Integer::new();
    for (n, d, w) in terms {
        let scaled = if d == lcm {
            n
        } else {
            Integer::from(&lcm / &d) * n
        };
        sum += Integer::from(scaled.square_ref()) * w;
    }
    Rational::from((sum, lcm.square()))
}

/// `sum_k num_k / den_k` for fractions that need not be in lowest terms
/// (`den_k > 0`), with a single final canonicalization.
pub fn sum_of_fractions(terms: impl IntoIterator<Item = (Integer, Integer)>) -> Rational {
    let terms: Vec<(Integer, Integer)> = terms.into_iter().filter(|(n, _)| *n != 0).collect();
    let mut lcm = Integer::from(1);
    for (_, d) in &terms {
        if !lcm.is_divisible(d) {
            lcm.lcm_mut(d);
        }
    }
    let mut sum = Integer::new();
    for (n, d) in terms {
        if d == lcm {
            sum += n;
        } else {
            sum += Integer::from(&lcm / &d) * n;
        }
    }
    Rational::from((sum, lcm))
}

/// Exact dot product with a single final canonicalization.
pub fn exact_dot(u: &[Rational], v: &[Rational]) -> Rational {
    sum_of_fractions(
        u.iter()
            .zip(v)
            .filter(|(a, b)| **a != 0 && **b != 0)
            .map(|(a, b)| {
                (
                    Integer::from(a.numer() * b.numer()),
                    Integer::from(a.denom() * b.denom()),
                )
            }),
    )
}

/// Integer power of a rational.
pub fn rat_pow(x: &Rational, k: u32) -> Rational {
    Rational::from(x.pow(k))
}

/// Lossy conversion for logging, parameter formulas and reports.
pub fn to_f64(x: &Rational) -> f64 {
    x.to_f64()
}

/// Converts an `f64` known to be positive into the largest power of two
/// not exceeding it, as an exact rational.
pub fn pow2_floor_f64(x: f64) -> Rational {
    assert!(
        x > 0.0 && x.is_finite(),
        "expected a positive finite value, got {x}"
    );
    pow2_floor(&rat_f64(x))
}

/// Exact rational value of a finite `Float`.
pub fn float_to_rational(x: &Float) -> Rational {
    x.to_rational().expect("finite float")
}

/// Parses an exact rational from `a`, `-a`, `a/b`, or a decimal such as
/// `0.15` or `1.5e-3`.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty number".into()));
    }
    if let Some((num, den)) = s.split_once('/') {
        let n: Integer = num
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad numerator in '{s}'")))?;
        let d: Integer = den
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad denominator in '{s}'")))?;
        if d == 0 {
            return Err(Error::Parse(format!("zero denominator in '{s}'")));
        }
        return Ok(Rational::from((n, d)));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let exp: i64 = s[pos + 1..]
                .parse()
                .map_err(|_| Error::Parse(format!("bad exponent in '{s}'")))?;
            (&s[..pos], exp)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(Error::Parse(format!("bad number '{s}'")));
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(Error::Parse(format!("bad number '{s}'")));
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = Rational::from(all_digits.parse::<Integer>().unwrap_or_default());
    let scale = exponent - frac_part.len() as i64;
    let ten = Rational::from(10);
    if scale >= 0 {
        value *= Rational::from((&ten).pow(scale as u32));
    } else {
        value /= Rational::from((&ten).pow((-scale) as u32));
    }
    if negative {
        value = -value;
    }
    Ok(value)
}

/// Serde adapters that write exact rationals as `"num/den"` strings.
pub mod serde_rational {
    use rug::Rational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_rational(&text).map_err(serde::de::Error::custom)
    }

    /// Same encoding for vectors of rationals.
    pub mod vec {
        use rug::Rational;
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(xs: &[Rational], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(xs.len()))?;
            for x in xs {
                seq.serialize_element(&x.to_string())?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
            let items = Vec::<String>::deserialize(d)?;
            items
                .iter()
                .map(|t| super::super::parse_rational(t).map_err(serde::de::Error::custom))
                .collect()
        }
    }

    /// Same encoding for optional rationals.
    pub mod option {
        use rug::Rational;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(x: &Option<Rational>, s: S) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => s.serialize_some(&v.to_string()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Rational>, D::Error> {
            let text = Option::<String>::deserialize(d)?;
            text.map(|t| super::super::parse_rational(&t).map_err(serde::de::Error::custom))
                .transpose()
        }
    }

    /// Same encoding for optional vectors of rationals.
    pub mod option_vec {
        use rug::Rational;
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(
            x: &Option<Vec<Rational>>,
            s: S,
        ) -> Result<S::Ok, S::Error> {
            match x {
                Some(v) => s.serialize_some(&v.iter().map(|r| r.to_string()).collect::<Vec<_>>()),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<Option<Vec<Rational>>, D::Error> {
            let items = Option::<Vec<String>>::deserialize(d)?;
            items
                .map(|v| {
                    v.iter()
                        .map(|t| super::super::parse_rational(t).map_err(serde::de::Error::custom))
                        .collect()
                })
                .transpose()
        }
    }
}
