//! The critical index of a pair of sequences.

use rug::Rational;

use crate::error::{Error, Result};

/// Input to [`critical_index`]: a non-increasing non-negative main sequence
/// `c`, a non-negative auxiliary sequence `d` of the same length, and `tau`.
#[derive(Clone, Debug)]
pub struct CriticalIndexInput {
    pub main: Vec<Rational>,
    pub aux: Vec<Rational>,
    pub tau: Rational,
}

impl CriticalIndexInput {
    /// Validates the sequence invariants.
    pub fn new(main: Vec<Rational>, aux: Vec<Rational>, tau: Rational) -> Result<Self> {
        if main.len() != aux.len() {
            return Err(Error::Precondition(
                "main and auxiliary sequences differ in length".into(),
            ));
        }
        if main.iter().chain(&aux).any(|x| *x < 0) {
            return Err(Error::Precondition(
                "critical index sequences must be non-negative".into(),
            ));
        }
        if main.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Precondition(
                "main sequence must be non-increasing".into(),
            ));
        }
        if tau <= 0 {
            return Err(Error::Precondition("tau must be positive".into()));
        }
        Ok(Self { main, aux, tau })
    }
}

/// The least 0-based `i` with `c_i <= tau * sum_{j >= i} (c_j + d_j)`, or
/// `None` (infinity) when no such `i` exists.
///
/// A vanishing tail sum satisfies the test, so all-zero sequences have
/// critical index 0.
pub fn critical_index(input: &CriticalIndexInput) -> Option<usize> {
    let n = input.main.len();
    let mut suffix = vec![Rational::new(); n + 1];
    for i in (0..n).rev() {
        suffix[i] = Rational::from(&suffix[i + 1] + &input.main[i]) + &input.aux[i];
    }
    (0..n).find(|&i| input.main[i] <= Rational::from(&input.tau * &suffix[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[i64]) -> Vec<Rational> {
        xs.iter().map(|&x| Rational::from(x)).collect()
    }

    #[test]
    fn examples() {
        let half = Rational::from((1, 2));
        let ci = |c: &[i64], d: &[i64]| {
            critical_index(&CriticalIndexInput::new(v(c), v(d), half.clone()).unwrap())
        };
        assert_eq!(ci(&[1, 1, 1], &[0, 0, 0]), Some(0));
        assert_eq!(ci(&[8, 1, 1], &[0, 0, 0]), Some(1));
        assert_eq!(ci(&[4, 1], &[0, 4]), Some(0));
        assert_eq!(ci(&[0, 0], &[0, 0]), Some(0));
        assert_eq!(ci(&[100, 1, 1], &[0, 0, 0]), Some(1));
        let tiny = Rational::from((1, 100));
        assert_eq!(
            critical_index(&CriticalIndexInput::new(v(&[100, 10]), v(&[0, 0]), tiny).unwrap()),
            None
        );
    }

    #[test]
    fn rejects_unsorted() {
        assert!(CriticalIndexInput::new(v(&[1, 2]), v(&[0, 0]), Rational::from(1)).is_err());
    }
}
