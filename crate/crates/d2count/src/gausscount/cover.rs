//! A certified finite cover of the standard normal distribution and the
//! per-coordinate discretization built from it.

use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::normal_cdf_hp;
use crate::util::{ceil_sqrt, floor_log2, pow2, round_half_even, round_half_toward_zero};

/// Precision (bits) of the CDF evaluations used to certify a cover.
const CERT_BITS: u32 = 64;
/// Largest supported `log2(1/eps*)`.
const MAX_LOG2_INV_EPS_STAR: i64 = 20;

/// `R = 4/eps*` equally weighted points whose uniform distribution is within
/// Kolmogorov distance `eps*` of `N(0,1)`.
///
/// The points are quantiles of a standardized `Binomial(s^2, 1/2)` with `s`
/// the smallest odd integer with `s^2 >= cover_constant / eps*^2`.  The
/// lower half of the points comes from the binomial quantiles at levels
/// `(i + 1/2)/R`, the upper half is its mirror image, and every point is
/// rounded to a multiple of `eps*/4` with ties toward zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalCover {
    /// Sorted, strictly increasing cover points.
    #[serde(with = "crate::util::serde_rational::vec")]
    pub points: Vec<Rational>,
    #[serde(with = "crate::util::serde_rational")]
    pub eps_star: Rational,
    /// Spacing of the lattice the points lie on (`eps*/4`).
    #[serde(with = "crate::util::serde_rational")]
    pub grid: Rational,
    /// Number of trials `s^2` of the underlying binomial.
    pub binomial_trials: u64,
    /// Certified upper bound on the Kolmogorov distance to `N(0,1)`.
    pub max_deviation: f64,
}

impl NormalCover {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Builds and certifies the cover for `eps* = 2^-j` (`j >= 1`).
pub fn normal_cover(eps_star: &Rational, cover_constant: u64) -> Result<NormalCover> {
    if *eps_star <= 0 || *eps_star >= 1 || pow2(floor_log2(eps_star)) != *eps_star {
        return Err(Error::Precondition(format!(
            "eps* must be 1/2^j with j >= 1, got {eps_star}"
        )));
    }
    if cover_constant == 0 {
        return Err(Error::Precondition(
            "cover constant must be positive".into(),
        ));
    }
    let j = -floor_log2(eps_star);
    if j > MAX_LOG2_INV_EPS_STAR {
        return Err(Error::Feasibility(format!(
            "normal cover for eps* = 2^-{j} is too large"
        )));
    }
    let r = 1usize << (j + 2);
    let mut s = ceil_sqrt(&Rational::from(
        Integer::from(cover_constant) << (2 * j as u32),
    ))
    .to_u64()
    .ok_or_else(|| Error::Feasibility("binomial cover parameter overflow".into()))?;
    if s % 2 == 0 {
        s += 1;
    }
    let trials = s * s;
    let grid = Rational::from(eps_star / 4u32);

    let ks = lower_quantiles(trials, r);
    let mut lower: Vec<Rational> = Vec::with_capacity(r / 2);
    for k in ks {
        let std = Rational::from((Integer::from(2 * k) - trials, Integer::from(s)));
        lower.push(Rational::from(
            round_half_toward_zero(&Rational::from(&std / &grid)) * &grid,
        ));
    }
    let mut points = lower.clone();
    points.extend(lower.iter().rev().map(|t| Rational::from(-t)));
    if points.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Internal(
            "normal cover points are not strictly increasing".into(),
        ));
    }
    let max_deviation = certify(&points);
    let slack = 2f64.powi(-(CERT_BITS as i32));
    if max_deviation + slack > eps_star.to_f64() {
        return Err(Error::Internal(format!(
            "normal cover deviates from Phi by {max_deviation:e} > eps* = {eps_star}"
        )));
    }
    Ok(NormalCover {
        points,
        eps_star: eps_star.clone(),
        grid,
        binomial_trials: trials,
        max_deviation: max_deviation + slack,
    })
}

/// For `i < r/2`, the smallest `k` with `Pr[Bin(n, 1/2) <= k] >= (i + 1/2)/r`.
///
/// `n` is odd, so the lower half `k <= (n-1)/2` carries mass exactly `1/2`.
/// The probabilities are generated from the centre outward by the ratio
/// `P(k-1)/P(k) = k/(n-k+1)` and normalized, which avoids evaluating huge
/// binomial coefficients; mass below `1e-30` of the centre term is dropped.
fn lower_quantiles(n: u64, r: usize) -> Vec<u64> {
    let centre = (n - 1) / 2;
    let mut weights = vec![1.0f64];
    let mut k = centre;
    while k > 0 {
        let w = weights.last().copied().unwrap_or(0.0) * k as f64 / (n - k + 1) as f64;
        if w < 1e-30 {
            break;
        }
        weights.push(w);
        k -= 1;
    }
    // weights[d] is proportional to P(centre - d).
    let total: f64 = weights.iter().rev().sum();
    let lowest = centre - (weights.len() as u64 - 1);
    let mut out = Vec::with_capacity(r / 2);
    let mut cdf = 0.0f64;
    let mut i = 0usize;
    for (offset, w) in weights.iter().rev().enumerate() {
        cdf += w / total / 2.0;
        while i < r / 2 && cdf >= (i as f64 + 0.5) / r as f64 {
            out.push(lowest + offset as u64);
            i += 1;
        }
    }
    while out.len() < r / 2 {
        out.push(centre);
    }
    out
}

/// `max_i max(|Phi(t_i) - i/R|, |Phi(t_i) - (i+1)/R|)` over the sorted points;
/// between consecutive points the uniform CDF is flat and `Phi` monotone, so
/// this is the Kolmogorov distance up to the CDF evaluation error.
fn certify(points: &[Rational]) -> f64 {
    let r = points.len() as u32;
    let mut worst = Float::new(CERT_BITS + 32);
    for (i, t) in points.iter().enumerate() {
        let phi = normal_cdf_hp(t, CERT_BITS);
        let i = i as u32;
        for level in [i, i + 1] {
            let d = Float::with_val(
                CERT_BITS + 32,
                &phi - Float::with_val(CERT_BITS + 32, level) / r,
            )
            .abs();
            if d > worst {
                worst = d;
            }
        }
    }
    worst.to_f64_round(rug::float::Round::Up)
}

/// The image of a cover under `t -> l t^2 + m t`, an equally weighted
/// multiset of values on a common lattice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteSupport {
    #[serde(with = "crate::util::serde_rational::vec")]
    pub values: Vec<Rational>,
    /// Every value is an integer multiple of `grid`.
    #[serde(with = "crate::util::serde_rational")]
    pub grid: Rational,
}

impl DiscreteSupport {
    /// Builds a support from explicit values, checking they lie on `grid`.
    pub fn new(values: Vec<Rational>, grid: Rational) -> Result<Self> {
        if grid <= 0 {
            return Err(Error::Precondition("support grid must be positive".into()));
        }
        if values.is_empty() {
            return Err(Error::Precondition("support must be non-empty".into()));
        }
        for v in &values {
            if *Rational::from(v / &grid).denom() != 1 {
                return Err(Error::Precondition(format!(
                    "support value {v} is not a multiple of {grid}"
                )));
            }
        }
        Ok(Self { values, grid })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The values as integer multiples of the grid.
    pub fn lattice_points(&self) -> Vec<Integer> {
        self.values
            .iter()
            .map(|v| Rational::from(v / &self.grid).numer().clone())
            .collect()
    }

    /// Moves every value to the nearest multiple of `grid` (halves toward
    /// the even multiple).
    pub fn snapped(&self, grid: &Rational) -> Result<Self> {
        let values = self
            .values
            .iter()
            .map(|v| Rational::from(round_half_even(&Rational::from(v / grid)) * grid))
            .collect();
        Self::new(values, grid.clone())
    }
}

/// `{ l t^2 + m t : t in cover }`, exact, on the lattice `(eps*/4)^2`.
pub fn discretize(l: &Integer, m: &Integer, cover: &NormalCover) -> DiscreteSupport {
    let values = cover
        .points
        .iter()
        .map(|t| (l * Rational::from(t.square_ref())) + Rational::from(m * t))
        .collect();
    DiscreteSupport {
        values,
        grid: Rational::from(cover.grid.square_ref()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi(x: f64) -> f64 {
        let v = Float::with_val(128, -x) / Float::with_val(128, 2).sqrt();
        (v.erfc() / 2u32).to_f64()
    }

    #[test]
    fn half_cover_has_eight_symmetric_points() {
        let c = normal_cover(&Rational::from((1, 2)), 100).unwrap();
        assert_eq!(c.len(), 8);
        for (a, b) in c.points.iter().zip(c.points.iter().rev()) {
            assert_eq!(*a, Rational::from(-b));
        }
        assert_eq!(c.binomial_trials, 21 * 21);
    }

    #[test]
    fn median_is_zero_within_a_cell() {
        let c = normal_cover(&Rational::from((1, 16)), 100).unwrap();
        let r = c.len();
        let mid = Rational::from(&c.points[r / 2 - 1] + &c.points[r / 2]) / 2u32;
        assert!(mid.abs() <= c.grid);
    }

    #[test]
    fn cover_tracks_phi() {
        let eps = Rational::from((1, 64));
        let c = normal_cover(&eps, 100).unwrap();
        let r = c.len() as f64;
        let mut worst: f64 = 0.0;
        for (i, t) in c.points.iter().enumerate() {
            let p = phi(t.to_f64());
            worst = worst
                .max((p - i as f64 / r).abs())
                .max((p - (i + 1) as f64 / r).abs());
        }
        assert!(worst <= 1.0 / 64.0, "{worst}");
        assert!((worst - c.max_deviation).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_dyadic() {
        assert!(normal_cover(&Rational::from((1, 3)), 100).is_err());
        assert!(normal_cover(&Rational::from(1), 100).is_err());
    }

    #[test]
    fn discretize_examples() {
        let c = normal_cover(&Rational::from((1, 8)), 100).unwrap();
        let id = discretize(&Integer::new(), &Integer::from(1), &c);
        assert_eq!(id.values, c.points);
        let sq = discretize(&Integer::from(1), &Integer::new(), &c);
        assert!(sq.values.iter().all(|v| *v >= 0));
        assert_eq!(sq.grid, Rational::from((1, 1024)));
        assert!(DiscreteSupport::new(sq.values.clone(), sq.grid.clone()).is_ok());
    }

    #[test]
    fn squared_cover_tail_matches_chi_square() {
        let c = normal_cover(&Rational::from((1, 64)), 100).unwrap();
        let sq = discretize(&Integer::from(1), &Integer::new(), &c);
        let above = sq.values.iter().filter(|v| **v >= 1).count() as f64 / sq.len() as f64;
        let exact = 2.0 * phi(-1.0);
        assert!((above - exact).abs() <= 2.0 / 64.0, "{above} vs {exact}");
    }
}
