//! Counting for decoupled juntas and the end-to-end Gaussian counter.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rug::{Integer, Rational};
use serde::{Deserialize, Serialize};

use super::cover::{discretize, normal_cover, NormalCover};
use super::dp::{dp_table_with, DpStrategy};
use crate::config::{Config, CountConfig};
use crate::decouple::{construct_junta, JuntaTrace};
use crate::error::{Error, Result};
use crate::poly::{DecoupledPolynomial, Degree2Polynomial};
use crate::util::{ceil_log2, floor_log2, pow2, pow2_floor, rat_f64, rat_pow, round_half_even};

/// Parameters and intermediate sizes of one [`count_junta`] call.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JuntaCount {
    /// The estimate of `Pr[q(y) >= 0]`.
    #[serde(with = "crate::util::serde_rational")]
    pub value: Rational,
    #[serde(with = "crate::util::serde_rational")]
    pub eps_prime: Rational,
    /// The unit `2^ceil(log2 M) eps'/2` the coefficients were rounded to.
    #[serde(with = "crate::util::serde_rational::option")]
    pub unit: Option<Rational>,
    /// Rounded coefficients `(lambda'_i, mu'_i)` of the surviving coordinates.
    #[serde(with = "crate::util::serde_rational::vec")]
    pub lambdas: Vec<Rational>,
    #[serde(with = "crate::util::serde_rational::vec")]
    pub mus: Vec<Rational>,
    /// The threshold `tau' = C / unit`, kept exact.
    #[serde(with = "crate::util::serde_rational::option")]
    pub tau: Option<Rational>,
    #[serde(with = "crate::util::serde_rational::option")]
    pub eps_star: Option<Rational>,
    pub cover_points: usize,
    pub cover_deviation: Option<f64>,
    /// Number of reachable partial sums in the final DP layer.
    pub dp_support: usize,
}

/// Covers keyed by `(log2 eps*, cover_constant)`.
type CoverCache = Mutex<HashMap<(i64, u64), Arc<NormalCover>>>;

/// The cover for `(eps*, cover_constant)`, built once per process.
pub fn cached_normal_cover(eps_star: &Rational, cover_constant: u64) -> Result<Arc<NormalCover>> {
    static CACHE: OnceLock<CoverCache> = OnceLock::new();
    let key = (floor_log2(eps_star), cover_constant);
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if pow2(key.0) == *eps_star {
        if let Some(c) = cache.lock().expect("cover cache").get(&key) {
            return Ok(Arc::clone(c));
        }
    }
    let cover = Arc::new(normal_cover(eps_star, cover_constant)?);
    cache
        .lock()
        .expect("cover cache")
        .insert(key, Arc::clone(&cover));
    Ok(cover)
}

/// `eps' = 2^floor(log2 min(c1 eps^6, cap))`.
pub fn eps_prime(epsilon: &Rational, cfg: &CountConfig) -> Rational {
    let raw = rat_f64(cfg.c1) * rat_pow(epsilon, 6);
    let cap = rat_f64(cfg.eps_prime_cap);
    pow2_floor(if raw < cap { &raw } else { &cap })
}

/// Estimates `Pr_{y ~ N(0, I_K)}[q(y) >= 0]` to within `eps`.
///
/// The coefficients are divided by `2^ceil(log2 M) eps'/2`, where `M` is
/// the largest `|lambda_i|, |mu_i|`, and rounded to the nearest integer
/// (halves to even); the constant is divided by the same unit but kept
/// exact.  Each surviving coordinate is replaced by the image of a normal
/// cover with `eps* = 2^floor(log2(c2 eps / K))` under its quadratic, the
/// image is snapped to the lattice `1/dp_cells_per_unit`, and the exact
/// law of the sum is computed by [`dp_count`].
pub fn count_junta(
    q: &DecoupledPolynomial,
    epsilon: &Rational,
    cfg: &CountConfig,
) -> Result<JuntaCount> {
    if *epsilon <= 0 || *epsilon >= 1 {
        return Err(Error::Precondition(format!(
            "eps must lie in (0, 1), got {epsilon}"
        )));
    }
    let ep = eps_prime(epsilon, cfg);
    let max = q
        .lambdas
        .iter()
        .chain(&q.mus)
        .map(|c| c.clone().abs())
        .max()
        .unwrap_or_default();
    let mut out = JuntaCount {
        value: Rational::from(u32::from(q.constant >= 0)),
        eps_prime: ep.clone(),
        unit: None,
        lambdas: Vec::new(),
        mus: Vec::new(),
        tau: None,
        eps_star: None,
        cover_points: 0,
        cover_deviation: None,
        dp_support: 0,
    };
    if max == 0 {
        return Ok(out);
    }
    let unit = (pow2(ceil_log2(&max)) * &ep) / 2u32;
    let tau = Rational::from(&q.constant / &unit);
    for (l, m) in q.lambdas.iter().zip(&q.mus) {
        let l = round_half_even(&Rational::from(l / &unit));
        let m = round_half_even(&Rational::from(m / &unit));
        if l != 0 || m != 0 {
            out.lambdas.push(Rational::from(l));
            out.mus.push(Rational::from(m));
        }
    }
    out.value = Rational::from(u32::from(tau >= 0));
    out.unit = Some(unit);
    out.tau = Some(tau.clone());
    let k = out.lambdas.len();
    if k == 0 {
        return Ok(out);
    }
    let half = Rational::from((1, 2));
    let raw = (rat_f64(cfg.c2) * epsilon) / k as u64;
    let eps_star = pow2_floor(if raw < half { &raw } else { &half });
    let cover = cached_normal_cover(&eps_star, cfg.cover_constant)?;
    let cell = Rational::from((1, cfg.dp_cells_per_unit));
    let supports = out
        .lambdas
        .iter()
        .zip(&out.mus)
        .map(|(l, m)| discretize(l.numer(), m.numer(), &cover).snapped(&cell))
        .collect::<Result<Vec<_>>>()?;
    let table = dp_table_with(&supports, DpStrategy::Auto, cfg.dp_bit_budget)?;
    out.value = table.prob_at_least(&tau);
    out.eps_star = Some(eps_star);
    out.cover_points = cover.len();
    out.cover_deviation = Some(cover.max_deviation);
    out.dp_support = table.len();
    Ok(out)
}

/// Result of [`count_gaussian`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianCount {
    /// The estimate of `Pr_{x ~ N(0, I_n)}[p(x) >= 0]`.
    #[serde(with = "crate::util::serde_rational")]
    pub value: Rational,
    pub junta: DecoupledPolynomial,
    pub trace: JuntaTrace,
    pub count: JuntaCount,
}

/// Deterministic Gaussian counter with a fixed configuration.
#[derive(Clone, Debug, Default)]
pub struct GaussianCounter {
    pub config: Config,
}

impl GaussianCounter {
    pub fn new(config: Config) -> Self {
        Self { config }
    }

    /// See [`count_gaussian`].
    pub fn count(&self, p: &Degree2Polynomial, epsilon: &Rational) -> Result<GaussianCount> {
        count_gaussian(p, epsilon, &self.config)
    }
}

/// Estimates `Pr_{x ~ N(0, I_n)}[p(x) >= 0]` to within `eps`: the
/// polynomial is reduced to a decoupled junta with accuracy
/// `junta_eps_share * eps`, which is then counted with the remaining budget.
pub fn count_gaussian(
    p: &Degree2Polynomial,
    epsilon: &Rational,
    cfg: &Config,
) -> Result<GaussianCount> {
    if *epsilon <= 0 || *epsilon >= 1 {
        return Err(Error::Precondition(format!(
            "eps must lie in (0, 1), got {epsilon}"
        )));
    }
    let share = rat_f64(cfg.count.junta_eps_share);
    let junta_eps = Rational::from(epsilon * &share);
    let count_eps = Rational::from(epsilon - &junta_eps);
    let (junta, trace) = construct_junta(p, &junta_eps, &cfg.junta, &cfg.spectral)?;
    let count = count_junta(&junta, &count_eps, &cfg.count)?;
    Ok(GaussianCount {
        value: count.value.clone(),
        junta,
        trace,
        count,
    })
}

/// Integer helper used by tests and callers building juntas by hand.
pub fn junta_from_integers(lambdas: &[i64], mus: &[i64], constant: i64) -> DecoupledPolynomial {
    let mut q = DecoupledPolynomial::constant(Rational::from(constant));
    for (l, m) in lambdas.iter().zip(mus) {
        q.push(
            Rational::from(Integer::from(*l)),
            Rational::from(Integer::from(*m)),
        );
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eps(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn eps_prime_is_capped_power_of_two() {
        let cfg = CountConfig::default();
        assert_eq!(eps_prime(&eps(1, 10), &cfg), eps(1, 32));
        assert_eq!(
            eps_prime(&eps(1, 100), &cfg),
            pow2_floor(&(rat_f64(2097152.0) * rat_pow(&eps(1, 100), 6)))
        );
    }

    #[test]
    fn linear_junta_is_half() {
        let q = junta_from_integers(&[0], &[1], 0);
        let v = count_junta(&q, &eps(1, 10), &CountConfig::default())
            .unwrap()
            .value;
        assert!((v.to_f64() - 0.5).abs() <= 0.1);
    }

    #[test]
    fn shifted_square_is_nonnegative() {
        let q = junta_from_integers(&[1], &[0], 1);
        let v = count_junta(&q, &eps(1, 10), &CountConfig::default())
            .unwrap()
            .value;
        assert!(v.to_f64() >= 0.9 && v <= 1);
    }

    #[test]
    fn chi_square_tail() {
        let q = junta_from_integers(&[1], &[0], -1);
        let v = count_junta(&q, &eps(1, 10), &CountConfig::default())
            .unwrap()
            .value;
        assert!((v.to_f64() - 0.317_310_507_862_914).abs() <= 0.1, "{v}");
    }

    #[test]
    fn constant_junta_is_exact() {
        let cfg = CountConfig::default();
        assert_eq!(
            count_junta(&junta_from_integers(&[], &[], -1), &eps(1, 10), &cfg)
                .unwrap()
                .value,
            0
        );
        assert_eq!(
            count_junta(&junta_from_integers(&[0], &[0], 0), &eps(1, 10), &cfg)
                .unwrap()
                .value,
            1
        );
    }

    #[test]
    fn gaussian_symmetric_examples() {
        let cfg = Config::default();
        let mut sum = Degree2Polynomial::new(5);
        for i in 0..5 {
            sum.add_lin(i, Rational::from(1)).unwrap();
        }
        let v = count_gaussian(&sum, &eps(1, 10), &cfg).unwrap().value;
        assert!((v.to_f64() - 0.5).abs() <= 0.1);
        let mut prod = Degree2Polynomial::new(2);
        prod.add_quad(0, 1, Rational::from(1)).unwrap();
        let v = count_gaussian(&prod, &eps(1, 10), &cfg).unwrap().value;
        assert!((v.to_f64() - 0.5).abs() <= 0.1, "{v}");
    }
}
