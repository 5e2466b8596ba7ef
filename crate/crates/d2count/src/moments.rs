//! Absolute moments `E_{x ~ {-1,1}^n}[|q(x)|^k]` of the normalized
//! polynomial `q = p / ||p||_2`, estimated by histogramming `q` with
//! threshold queries to the hypercube counter.
//!
//! `||p||_2 = sqrt(E[p^2])` is irrational in general.  It is never
//! approximated: a query `q(x) >= c` is rewritten as `D p(x) >= T` with
//! `D` clearing the denominators of `p` (so `D p` is integer-valued on the
//! cube) and `T = ceil(c ||p||_2 D)`, which is an exact integer square-root
//! computation.

use std::collections::BTreeMap;

use rug::float::Round;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::boolcount::{count_boolean, ThresholdCounter};
use crate::config::{Config, MomentConfig};
use crate::error::{Error, Result};
use crate::poly::{raw_moment_exact, Degree2Polynomial};
use crate::util::{ceil_sqrt, floor_sqrt, pow2, rat_f64, rat_pow};

/// Derived parameters of [`absolute_moment`].
///
/// `M = ceil(c_m k max(1, ln k) ln(1/eps))`, `tau = eps / (4 M^k)`,
/// `Delta = 2^-r` the largest power of two with
/// `Delta^k <= (eps/4) (tau/k)^k`, buckets `j = j_lo ..= j_hi` on each side
/// with `j_lo = ceil(k/tau) - 1` and `j_hi = M / Delta`, each estimated to
/// within `tau/4`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MomentParams {
    pub k: u32,
    #[serde(with = "crate::util::serde_rational")]
    pub epsilon: Rational,
    pub m: u64,
    #[serde(with = "crate::util::serde_rational")]
    pub tau: Rational,
    /// `Delta = 2^-r`.
    pub r: u32,
    #[serde(with = "crate::util::serde_rational")]
    pub delta: Rational,
    #[serde(with = "crate::util::serde_rational")]
    pub bucket_accuracy: Rational,
    pub j_lo: u64,
    pub j_hi: u64,
}

impl MomentParams {
    pub fn new(k: u32, epsilon: &Rational, cfg: &MomentConfig) -> Result<Self> {
        if k == 0 {
            return Err(Error::Precondition(
                "moment order k must be at least 1".into(),
            ));
        }
        if k > cfg.k_cap {
            return Err(Error::Feasibility(format!(
                "moment order {k} exceeds the configured cap {}",
                cfg.k_cap
            )));
        }
        if *epsilon <= 0 || *epsilon >= 1 {
            return Err(Error::Precondition(format!(
                "eps must lie in (0, 1), got {epsilon}"
            )));
        }
        let prec = 128;
        let kf = Float::with_val(prec, k);
        let ln_k = Float::with_val(prec, kf.ln_ref());
        let log_k = if ln_k < 1 {
            Float::with_val(prec, 1)
        } else {
            ln_k
        };
        let ln_inv_eps = Float::with_val(prec, Float::with_val(prec, epsilon).recip().ln_ref());
        let m_f = Float::with_val(prec, cfg.c_m) * kf * log_k * ln_inv_eps;
        let m = m_f
            .ceil()
            .to_integer()
            .and_then(|i| i.to_u64())
            .ok_or_else(|| Error::Feasibility("moment tail cutoff overflows".into()))?
            .max(1);
        let m_pow = Integer::from(Integer::u_pow_u(
            u32::try_from(m)
                .map_err(|_| Error::Feasibility("moment tail cutoff overflows".into()))?,
            k,
        ));
        let tau = epsilon / Rational::from(m_pow * 4u32);
        // Delta^k = 2^-rk <= (eps/4) (tau/k)^k, smallest such r.
        let target = Rational::from(epsilon / 4u32) * rat_pow(&Rational::from(&tau / k), k);
        let mut r: u32 = 0;
        while pow2(-(i64::from(r) * i64::from(k))) > target {
            r += 1;
        }
        let delta = pow2(-i64::from(r));
        let k_over_tau = Rational::from(Integer::from(k) / &tau);
        let j_lo = (crate::util::ceil_int(&k_over_tau) - 1u32)
            .max(Integer::from(1))
            .to_u64()
            .ok_or_else(|| Error::Feasibility("moment bucket index overflows".into()))?;
        let j_hi = (Integer::from(m) << r)
            .to_u64()
            .ok_or_else(|| Error::Feasibility("moment bucket count overflows".into()))?;
        Ok(Self {
            k,
            epsilon: epsilon.clone(),
            m,
            tau: tau.clone(),
            r,
            delta,
            bucket_accuracy: tau / 4u32,
            j_lo,
            j_hi,
        })
    }

    /// Number of buckets on both sides together.
    pub fn bucket_count(&self) -> u64 {
        if self.j_hi < self.j_lo {
            0
        } else {
            2 * (self.j_hi - self.j_lo + 1)
        }
    }
}

/// `q = p / ||p||_2` in integer form: `q(x) >= c` iff `D p(x) >= T(c)`.
#[derive(Clone, Debug)]
pub struct NormalizedThresholds {
    /// `D p` (integer coefficients).
    pub scaled: Degree2Polynomial,
    pub denominator: Integer,
    /// `E[p^2] = ||p||_2^2`.
    pub norm_sq: Rational,
}

impl NormalizedThresholds {
    pub fn new(p: &Degree2Polynomial) -> Result<Self> {
        p.require_multilinear("absolute_moment")?;
        let norm_sq = raw_moment_exact(p, 2)?;
        if norm_sq == 0 {
            return Err(Error::Precondition(
                "the zero polynomial has no normalization".into(),
            ));
        }
        let (denominator, scaled) = p.integer_scaled();
        Ok(Self {
            scaled,
            denominator,
            norm_sq,
        })
    }

    /// `(c ||p||_2 D)^2`.
    fn square(&self, c: &Rational) -> Rational {
        Rational::from(c.square_ref())
            * &self.norm_sq
            * Integer::from(self.denominator.square_ref())
    }

    /// Smallest integer `T` with `q(x) >= c  <=>  D p(x) >= T`.
    pub fn at_least(&self, c: &Rational) -> Integer {
        let y = self.square(c);
        if *c >= 0 {
            ceil_sqrt(&y)
        } else {
            -floor_sqrt(&y)
        }
    }

    /// Smallest integer `T` with `q(x) > c  <=>  D p(x) >= T`.
    pub fn greater_than(&self, c: &Rational) -> Integer {
        let y = self.square(c);
        if *c >= 0 {
            floor_sqrt(&y) + 1u32
        } else {
            1 - ceil_sqrt(&y)
        }
    }

    /// `floor(|u| / (D ||p||_2 Delta)) + 1` for an integer value `u` of
    /// `D p`: the bucket `j` with `(j-1) Delta <= |q| < j Delta`.
    fn bucket_of(&self, u: &Integer, delta: &Rational) -> Integer {
        let denom = Rational::from(delta.square_ref())
            * &self.norm_sq
            * Integer::from(self.denominator.square_ref());
        floor_sqrt(&(Rational::from(u.square_ref()) / denom)) + 1u32
    }

    /// Whether `|q| = c` for `D p = u` and `c >= 0`.
    fn abs_equals(&self, u: &Integer, c: &Rational) -> bool {
        Rational::from(u.square_ref()) == self.square(c)
    }
}

/// Estimate of `Pr[q(x) in [(j-1) Delta, j Delta]]` for `q = p/||p||_2`,
/// within `delta_acc`: the difference of two hypercube counts, each with
/// accuracy `delta_acc / 2`.
pub fn interval_prob(
    p: &Degree2Polynomial,
    delta: &Rational,
    j: i64,
    delta_acc: &Rational,
    cfg: &Config,
) -> Result<Rational> {
    if *delta <= 0 {
        return Err(Error::Precondition("bucket width must be positive".into()));
    }
    let nt = NormalizedThresholds::new(p)?;
    let acc = Rational::from(delta_acc / 2u32);
    let lo = Rational::from(delta * (j - 1));
    let hi = Rational::from(delta * j);
    let at_least = |t: Integer| -> Result<Rational> {
        Ok(count_boolean(&nt.scaled.shifted(&Rational::from(-t)), &acc, cfg)?.value)
    };
    Ok(at_least(nt.at_least(&lo))? - at_least(nt.greater_than(&hi))?)
}

/// How [`absolute_moment_with`] evaluates the buckets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentStrategy {
    /// `LeafHistogram` when available, `BucketScan` otherwise.
    Auto,
    /// Query the counter at every bucket boundary.
    BucketScan,
    /// When the counter's tree is shift-invariant with constant leaves,
    /// each threshold count is a sum of leaf weights; summing
    /// `|j Delta|^k q_j` over buckets then equals summing over leaves,
    /// which visits only non-empty buckets.
    LeafHistogram,
}

/// One non-empty bucket of the histogram.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    /// `+1` for `q in [(j-1) Delta, j Delta)`, `-1` for
    /// `q in (-j Delta, -(j-1) Delta]` (the outermost buckets are closed).
    pub side: i8,
    pub j: u64,
    #[serde(with = "crate::util::serde_rational")]
    pub mass: Rational,
}

/// Result of [`absolute_moment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub params: MomentParams,
    /// Estimate of `E[|q|^k]` for `q = p / ||p||_2`.
    #[serde(with = "crate::util::serde_rational")]
    pub value: Rational,
    #[serde(with = "crate::util::serde_rational")]
    pub e_plus: Rational,
    #[serde(with = "crate::util::serde_rational")]
    pub e_minus: Rational,
    /// `||p||_2^2 = E[p^2]`.
    #[serde(with = "crate::util::serde_rational")]
    pub norm_sq: Rational,
    pub strategy: MomentStrategy,
    pub buckets: Vec<Bucket>,
}

impl MomentEstimate {
    /// `value * ||p||_2^k`, the corresponding estimate of `E[|p|^k]`.
    pub fn unnormalized(&self, prec: u32) -> Float {
        let norm = Float::with_val(prec, &self.norm_sq).sqrt();
        let scale = Float::with_val(prec, rug::ops::Pow::pow(norm, self.params.k));
        Float::with_val_round(prec, &self.value * scale, Round::Nearest).0
    }
}

/// Estimates `E_{x ~ {-1,1}^n}[|q(x)|^k]` for `q = p / ||p||_2` to within
/// `eps`, for a non-zero multilinear `p`.
///
/// The mass of `q` beyond `M` and within `(j_lo - 1) Delta` of zero is
/// dropped; every other point is charged `|j Delta|^k` for the bucket
/// `j` containing it, with the bucket masses estimated by the hypercube
/// counter to within `tau/4`.  `eps` below `regularity.eps_floor` or `k`
/// above `moments.k_cap` is refused with [`Error::Feasibility`].
pub fn absolute_moment(
    p: &Degree2Polynomial,
    k: u32,
    epsilon: &Rational,
    cfg: &Config,
) -> Result<MomentEstimate> {
    if *epsilon < rat_f64(cfg.regularity.eps_floor) {
        return Err(Error::Feasibility(format!(
            "eps = {epsilon} is below the configured floor {}",
            cfg.regularity.eps_floor
        )));
    }
    let params = MomentParams::new(k, epsilon, &cfg.moments)?;
    absolute_moment_with(p, &params, MomentStrategy::Auto, cfg)
}

/// [`absolute_moment`] with explicit parameters and strategy.
pub fn absolute_moment_with(
    p: &Degree2Polynomial,
    params: &MomentParams,
    strategy: MomentStrategy,
    cfg: &Config,
) -> Result<MomentEstimate> {
    let nt = NormalizedThresholds::new(p)?;
    let c0 = nt.scaled.constant_term().clone();
    let base = nt.scaled.without_constant();
    let query_acc = Rational::from(&params.bucket_accuracy / 2u32);
    let counter = ThresholdCounter::new(&base, &query_acc, cfg)?;
    let law = match strategy {
        MomentStrategy::BucketScan => None,
        MomentStrategy::Auto | MomentStrategy::LeafHistogram => counter.constant_law(),
    };
    let (buckets, used) = match law {
        Some(law) => (
            leaf_histogram(&nt, &c0, &law, params),
            MomentStrategy::LeafHistogram,
        ),
        None if strategy == MomentStrategy::LeafHistogram => {
            return Err(Error::Precondition(
                "leaf histogram needs a shift-invariant tree with constant leaves".into(),
            ))
        }
        None => {
            if params.bucket_count() > cfg.moments.bucket_budget {
                return Err(Error::Feasibility(format!(
                    "moment estimate needs {} bucket queries, above the budget of {}",
                    params.bucket_count(),
                    cfg.moments.bucket_budget
                )));
            }
            (
                bucket_scan(&nt, &c0, &counter, params)?,
                MomentStrategy::BucketScan,
            )
        }
    };
    let mut e_plus = Rational::new();
    let mut e_minus = Rational::new();
    for b in &buckets {
        let weight = rat_pow(&Rational::from(&params.delta * b.j), params.k) * &b.mass;
        if b.side > 0 {
            e_plus += weight;
        } else {
            e_minus += weight;
        }
    }
    Ok(MomentEstimate {
        params: params.clone(),
        value: Rational::from(&e_plus + &e_minus),
        e_plus,
        e_minus,
        norm_sq: nt.norm_sq,
        strategy: used,
        buckets,
    })
}

fn bucket_scan(
    nt: &NormalizedThresholds,
    c0: &Rational,
    counter: &ThresholdCounter,
    params: &MomentParams,
) -> Result<Vec<Bucket>> {
    let mut cache: BTreeMap<Integer, Rational> = BTreeMap::new();
    // Pr[D p >= t] with D p = base + c0.
    let mut count = |t: Integer| -> Result<Rational> {
        if let Some(v) = cache.get(&t) {
            return Ok(v.clone());
        }
        let v = counter.count_at_least(&(Rational::from(&t) - c0))?;
        cache.insert(t, v.clone());
        Ok(v)
    };
    let mut out = Vec::new();
    if params.j_hi < params.j_lo {
        return Ok(out);
    }
    let d = &params.delta;
    for j in params.j_lo..=params.j_hi {
        let lo = Rational::from(d * (j - 1));
        let hi = Rational::from(d * j);
        let last = j == params.j_hi;
        // [(j-1) Delta, j Delta), closed at the top for the last bucket.
        let upper = if last {
            nt.greater_than(&hi)
        } else {
            nt.at_least(&hi)
        };
        let plus = count(nt.at_least(&lo))? - count(upper)?;
        // (-j Delta, -(j-1) Delta], closed at the bottom for the last bucket.
        let neg_hi = Rational::from(-&hi);
        let lower = if last {
            nt.at_least(&neg_hi)
        } else {
            nt.greater_than(&neg_hi)
        };
        let minus = count(lower)? - count(nt.greater_than(&(-lo)))?;
        for (side, mass) in [(1i8, plus), (-1i8, minus)] {
            if mass != 0 {
                out.push(Bucket { side, j, mass });
            }
        }
    }
    out.sort_by_key(|a| (a.side, a.j));
    Ok(out)
}

fn leaf_histogram(
    nt: &NormalizedThresholds,
    c0: &Rational,
    law: &[(Rational, Rational)],
    params: &MomentParams,
) -> Vec<Bucket> {
    let mut hist: BTreeMap<(i8, u64), Rational> = BTreeMap::new();
    let top = Rational::from(&params.delta * params.j_hi);
    for (v, w) in law {
        let u = Rational::from(v + c0).numer().clone();
        let sides: &[i8] = match u.cmp0() {
            std::cmp::Ordering::Greater => &[1],
            std::cmp::Ordering::Less => &[-1],
            std::cmp::Ordering::Equal => &[1, -1],
        };
        let mut j = nt.bucket_of(&u, &params.delta);
        if j == Integer::from(params.j_hi) + 1u32 && nt.abs_equals(&u, &top) {
            j = Integer::from(params.j_hi);
        }
        let Some(j) = j.to_u64() else { continue };
        if j < params.j_lo || j > params.j_hi {
            continue;
        }
        for &side in sides {
            *hist.entry((side, j)).or_default() += w;
        }
    }
    hist.into_iter()
        .filter(|(_, m)| *m != 0)
        .map(|((side, j), mass)| Bucket { side, j, mass })
        .collect()
}
