//! Iterated decoupling: reduce a Gaussian polynomial to a decoupled junta.

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use super::decompose::{approximate_decompose, DecomposeKind};
use crate::config::{JuntaConfig, SpectralConfig};
use crate::error::{Error, Result};
use crate::poly::{poly_digest, DecoupledPolynomial, Degree2Polynomial};
use crate::spectral::EigenDiagnostics;
use crate::util::{
    ceil_sqrt, float_to_rational, floor_log2, floor_sqrt, pow2_floor, square_sum_of_fractions,
};

const PARAM_PREC: u32 = 192;

/// Derived parameters of [`construct_junta`].
///
/// With `L = max(1, ln(1/eps))`:
/// `alpha = 2^floor(log2(c_alpha eps^4 / L^2))`,
/// `K = ceil(c_K L / eps^4)`,
/// `gamma = 2^floor(log2(c_gamma (eps/K)^2 sqrt(alpha) / L))`,
/// `eta = 2^floor(log2(c_eta eps^4 / (K^4 L)))` and
/// `beta_grid = eps alpha / 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuntaParams {
    #[serde(with = "crate::util::serde_rational")]
    pub epsilon: Rational,
    #[serde(with = "crate::util::serde_rational")]
    pub alpha: Rational,
    pub k: u64,
    #[serde(with = "crate::util::serde_rational")]
    pub gamma: Rational,
    #[serde(with = "crate::util::serde_rational")]
    pub eta: Rational,
    #[serde(with = "crate::util::serde_rational")]
    pub beta_grid: Rational,
}

impl JuntaParams {
    pub fn new(epsilon: &Rational, cfg: &JuntaConfig) -> Result<Self> {
        if *epsilon <= 0 || *epsilon >= 1 {
            return Err(Error::Precondition(format!(
                "eps must lie in (0, 1), got {epsilon}"
            )));
        }
        for (name, c) in [
            ("c_alpha", cfg.c_alpha),
            ("c_k", cfg.c_k),
            ("c_gamma", cfg.c_gamma),
            ("c_eta", cfg.c_eta),
        ] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Precondition(format!(
                    "junta constant {name} must be positive"
                )));
            }
        }
        let f = |x: &Rational| Float::with_val(PARAM_PREC, x);
        let c = |x: f64| Float::with_val(PARAM_PREC, x);
        let eps = f(epsilon);
        let inv_ln = Float::with_val(PARAM_PREC, eps.recip_ref()).ln();
        let l = if inv_ln < 1 {
            Float::with_val(PARAM_PREC, 1)
        } else {
            inv_ln
        };
        let eps4 = Float::with_val(PARAM_PREC, (&eps).pow(4u32));
        let pos = |x: Float| -> Result<Rational> {
            if !(x.is_finite() && x > 0) {
                return Err(Error::Feasibility("junta parameter underflow".into()));
            }
            Ok(pow2_floor(&float_to_rational(&x)))
        };
        let alpha = pos(c(cfg.c_alpha) * &eps4 / Float::with_val(PARAM_PREC, l.square_ref()))?;
        let k_float = c(cfg.c_k) * &l / &eps4;
        let k_int = k_float.ceil().to_integer().expect("finite");
        let k = k_int
            .to_u64()
            .ok_or_else(|| Error::Feasibility(format!("junta size bound {k_int} is too large")))?
            .max(1);
        let kf = Float::with_val(PARAM_PREC, k);
        let ratio = Float::with_val(PARAM_PREC, &eps / &kf);
        let gamma = pos(c(cfg.c_gamma) * ratio.square() * f(&alpha).sqrt() / &l)?;
        let eta = pos(c(cfg.c_eta) * &eps4 / kf.pow(4u32) / &l)?;
        let beta_grid = Rational::from(epsilon * &alpha) / 2u32;
        Ok(Self {
            epsilon: epsilon.clone(),
            alpha,
            k,
            gamma,
            eta,
            beta_grid,
        })
    }

    /// Rounding grid `gamma / (K n)` for an `n`-variable polynomial.
    pub fn round_grid(&self, n: usize) -> Rational {
        Rational::from(&self.gamma / Integer::from(self.k)) / Integer::from(n.max(1))
    }
}

/// How one iteration of [`construct_junta`] ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JuntaBranch {
    /// `Var(s_i) < alpha`: stop and output `h + E[s_i] + C'`.
    LowVariance,
    /// Small top eigenvalue: stop and output `h + beta y + E[s'_i] + C'`.
    SmallEigenvalue,
    /// An eigendirection was split off; continue with `s_{i+1}`.
    Split,
}

/// How [`construct_junta`] terminated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JuntaExit {
    /// The input had zero variance; the junta is its constant.
    ZeroVariance,
    LowVariance,
    SmallEigenvalue,
}

/// Record of one loop iteration.  Exact quantities are rationals written as
/// `"num/den"` strings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JuntaIteration {
    /// 1-based iteration number `i`.
    pub index: usize,
    #[serde(with = "crate::util::serde_rational")]
    pub var_s: Rational,
    /// `Var(s'_i)` (absent on the low-variance exit, where no rounding
    /// happens).
    #[serde(with = "crate::util::serde_rational::option")]
    pub var_rounded: Option<Rational>,
    /// `Var(s_i - s'_i)`.
    #[serde(with = "crate::util::serde_rational::option")]
    pub var_round_error: Option<Rational>,
    /// SHA-256 prefix of the canonical `.d2p` text of `s'_i`.
    pub rounded_digest: Option<String>,
    pub branch: JuntaBranch,
    #[serde(with = "crate::util::serde_rational::option")]
    pub lambda: Option<Rational>,
    #[serde(with = "crate::util::serde_rational::option")]
    pub mu: Option<Rational>,
    /// `Var(s_{i+1})` after a split.
    #[serde(with = "crate::util::serde_rational::option")]
    pub var_s_next: Option<Rational>,
    /// `Var(h_i)` after this iteration.
    #[serde(with = "crate::util::serde_rational")]
    pub var_h: Rational,
    /// `beta` on the small-eigenvalue exit.
    #[serde(with = "crate::util::serde_rational::option")]
    pub beta: Option<Rational>,
    pub eigen: Option<EigenDiagnostics>,
}

/// Full record of a [`construct_junta`] run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JuntaTrace {
    pub params: JuntaParams,
    /// The positive factor applied to `p` so that `Var <= 1`.
    #[serde(with = "crate::util::serde_rational")]
    pub scale: Rational,
    /// `Var(p)` after scaling.
    #[serde(with = "crate::util::serde_rational")]
    pub scaled_variance: Rational,
    pub iterations: Vec<JuntaIteration>,
    /// The accumulated head `h` (without the final constant).
    pub head: DecoupledPolynomial,
    pub exit: JuntaExit,
}

/// Rational `s > 0` with `1 - 2^-60 <= s^2 var <= 1`.
fn unit_variance_scale(var: &Rational) -> Rational {
    let m = (62 - floor_log2(var) / 2 + 2).max(0) as u32;
    let scaled = var * Rational::from(Integer::from(1) << (2 * m));
    let root = ceil_sqrt(&scaled);
    Rational::from((Integer::from(1) << m, root))
}

/// Rounds every non-constant coefficient down to a multiple of `grid`;
/// also returns `Var(p - rounded)`.
fn round_down(p: &Degree2Polynomial, grid: &Rational) -> (Degree2Polynomial, Rational) {
    let (gn, gd) = (grid.numer(), grid.denom());
    let mut errors: Vec<(Integer, Integer, u32)> = Vec::new();
    let mut snap = |c: &Rational, weight: u32| -> Rational {
        // floor(c / grid) = floor(c_num gd / (c_den gn)).
        let k = Integer::from(c.numer() * gd)
            .div_rem_floor(Integer::from(c.denom() * gn))
            .0;
        let kg = Integer::from(&k * gn);
        let err = Integer::from(c.numer() * gd) - Integer::from(&kg * c.denom());
        errors.push((err, Integer::from(c.denom() * gd), weight));
        Rational::from((kg, gd.clone()))
    };
    let mut q = Degree2Polynomial::new(p.n());
    for (&(i, j), c) in p.quad_terms() {
        q.add_quad(i, j, snap(c, if i == j { 2 } else { 1 }))
            .expect("index in range");
    }
    for (&i, c) in p.lin_terms() {
        q.add_lin(i, snap(c, 1)).expect("index in range");
    }
    q.add_constant(p.constant_term().clone());
    (q, square_sum_of_fractions(errors))
}

/// Reduces `p` to a decoupled junta `q = sum_i (lambda_i y_i^2 + mu_i y_i) + C'`
/// whose Gaussian threshold probability `Pr[q >= 0]` is close to
/// `Pr[p >= 0]`.
///
/// `p` is first scaled by a positive rational to variance (just under) one;
/// the output is expressed in that scale, which leaves the sign pattern
/// unchanged.  A zero-variance input yields the constant junta `q = C`.
pub fn construct_junta(
    p: &Degree2Polynomial,
    epsilon: &Rational,
    junta_cfg: &JuntaConfig,
    spectral_cfg: &SpectralConfig,
) -> Result<(DecoupledPolynomial, JuntaTrace)> {
    let params = JuntaParams::new(epsilon, junta_cfg)?;
    let var = p.variance_gaussian();
    if var == 0 {
        let q = DecoupledPolynomial::constant(p.mean_gaussian());
        let trace = JuntaTrace {
            params,
            scale: Rational::from(1),
            scaled_variance: Rational::new(),
            iterations: Vec::new(),
            head: DecoupledPolynomial::default(),
            exit: JuntaExit::ZeroVariance,
        };
        return Ok((q, trace));
    }
    let scale = unit_variance_scale(&var);
    let scaled = p.scaled(&scale);
    let scaled_variance = scaled.variance_gaussian();
    let c_prime = scaled.constant_term().clone();
    let grid = params.round_grid(p.n());
    let mut s = scaled.without_constant();
    let mut head = DecoupledPolynomial::default();
    let mut iterations = Vec::new();
    let max_iterations = params.k as usize + 1;
    for index in 1.. {
        if index > max_iterations {
            return Err(Error::Internal(format!(
                "junta construction exceeded {max_iterations} iterations"
            )));
        }
        let var_s = s.variance_gaussian();
        if var_s < params.alpha {
            let mut q = head.clone();
            q.constant = s.mean_gaussian() + &c_prime;
            iterations.push(JuntaIteration {
                index,
                var_s,
                var_rounded: None,
                var_round_error: None,
                rounded_digest: None,
                branch: JuntaBranch::LowVariance,
                lambda: None,
                mu: None,
                var_s_next: None,
                var_h: head.variance_gaussian(),
                beta: None,
                eigen: None,
            });
            let trace = JuntaTrace {
                params,
                scale,
                scaled_variance,
                iterations,
                head,
                exit: JuntaExit::LowVariance,
            };
            return Ok((q, trace));
        }
        let (rounded, var_round_error) = round_down(&s, &grid);
        let var_rounded = rounded.variance_gaussian();
        if var_rounded == 0 {
            return Err(Error::Internal(
                "rounding erased a polynomial of non-negligible variance".into(),
            ));
        }
        let dec = approximate_decompose(&rounded, epsilon, &params.eta, spectral_cfg)?;
        match dec.kind {
            DecomposeKind::SmallMaxEigenvalue => {
                let ratio = &var_rounded / Rational::from(params.beta_grid.square_ref());
                let beta = Rational::from(floor_sqrt(&ratio)) * &params.beta_grid;
                let mut q = head.clone();
                q.push(Rational::new(), beta.clone());
                q.constant = rounded.mean_gaussian() + &c_prime;
                iterations.push(JuntaIteration {
                    index,
                    var_s,
                    var_rounded: Some(var_rounded),
                    var_round_error: Some(var_round_error),
                    rounded_digest: Some(poly_digest(&rounded)),
                    branch: JuntaBranch::SmallEigenvalue,
                    lambda: None,
                    mu: None,
                    var_s_next: None,
                    var_h: head.variance_gaussian(),
                    beta: Some(beta),
                    eigen: dec.eigen,
                });
                let trace = JuntaTrace {
                    params,
                    scale,
                    scaled_variance,
                    iterations,
                    head,
                    exit: JuntaExit::SmallEigenvalue,
                };
                return Ok((q, trace));
            }
            DecomposeKind::Split => {
                let lambda = dec.lambda1.clone().expect("split has lambda");
                let mu = dec.mu1.clone().expect("split has mu");
                let r = dec.r.as_ref().expect("split has r");
                let next = r.without_var(0).drop_var(0)?;
                head.push(lambda.clone(), mu.clone());
                let var_next = next.variance_gaussian();
                iterations.push(JuntaIteration {
                    index,
                    var_s,
                    var_rounded: Some(var_rounded),
                    var_round_error: Some(var_round_error),
                    rounded_digest: Some(poly_digest(&rounded)),
                    branch: JuntaBranch::Split,
                    lambda: Some(lambda),
                    mu: Some(mu),
                    var_s_next: Some(var_next),
                    var_h: head.variance_gaussian(),
                    beta: None,
                    eigen: dec.eigen,
                });
                s = next;
            }
        }
    }
    unreachable!("the loop only exits by returning")
}

/// Checks the loop invariants of a trace: for every iteration `i`,
/// `Var(s_{i+1}) <= (1 - eps^4/40)^i`,
/// `Var(s_{i+1}) + Var(h_i) >= (1 - eps/K)^i`, and at most `K + 1`
/// iterations.  Returns a description of the first violation.
pub fn check_trace_invariants(trace: &JuntaTrace) -> std::result::Result<(), String> {
    let eps = &trace.params.epsilon;
    let k = Integer::from(trace.params.k);
    if trace.iterations.len() as u64 > trace.params.k + 1 {
        return Err(format!(
            "{} iterations exceed K + 1 = {}",
            trace.iterations.len(),
            trace.params.k + 1
        ));
    }
    let contraction = Rational::from(1) - Rational::from(eps * eps).square() / 40u32;
    let conservation = Rational::from(1) - Rational::from(eps / &k);
    let mut c_pow = Rational::from(1);
    let mut m_pow = Rational::from(1);
    for it in &trace.iterations {
        // Exponent i for iteration i.
        c_pow *= &contraction;
        m_pow *= &conservation;
        let next = match &it.var_s_next {
            Some(v) => v.clone(),
            None => continue,
        };
        if next > c_pow {
            return Err(format!(
                "iteration {}: Var(s_next) = {} exceeds (1 - eps^4/40)^i",
                it.index,
                next.to_f64()
            ));
        }
        let mass = Rational::from(&next + &it.var_h);
        if mass < m_pow {
            return Err(format!(
                "iteration {}: Var(s_next) + Var(h) = {} below (1 - eps/K)^i",
                it.index,
                mass.to_f64()
            ));
        }
    }
    Ok(())
}
