//! Derandomized approximation of the largest-magnitude eigenpair of a
//! symmetric matrix by the shifted powering method.
//!
//! For `A` with `||A||_F > 0` the routine shifts to `A' = A + tI`
//! (`t = ceil(||A||_F)`, so `A'` is positive semidefinite), raises `A'` to a
//! power `>= k = ceil(log(9n/4) / (2 delta))` and tries *every* basis vector
//! `e_i` as a starting point, keeping the column of `A'^k` with the largest
//! quotient `mu_i = ||A' A'^k e_i||^2 / ||A'^k e_i||^2`.  Nothing is random.
//!
//! Because `k` is astronomically large for small `eps`, `eta`, the power is
//! formed by repeated squaring in `f64` until the normalized power reaches a
//! fixed point; the winning column is then refined at high precision by
//! Rayleigh-quotient iteration and certified to belong to the top of the
//! spectrum by an inertia count.  Both `A` and `-A` are processed so that
//! negative eigenvalues of large magnitude are found as well.

mod hp;

use rayon::join;
use rug::float::Round;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};

use crate::config::SpectralConfig;
use crate::error::{Error, Result};
use crate::poly::{LinearForm, SymmetricMatrix};
use crate::util::{ceil_sqrt, exact_dot, float_to_rational, floor_log2, pow2, weighted_square_sum};
use hp::HpMatrix;

/// Which branch of the eigenvalue routine was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EigenKind {
    /// The largest eigenvalue is too small relative to `||A||_F` to be
    /// worth splitting off.
    SmallMaxEigenvalue,
    /// An approximate eigenpair `(lambda~, w~)` was produced.
    Pair,
}

/// Diagnostics recorded alongside an [`EigenResult`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenDiagnostics {
    /// The iteration count `k` (decimal; it can exceed any machine integer).
    pub k: String,
    /// Matrix squarings actually performed (the power used is `>= k` or a
    /// numerical fixed point of the normalized powers).
    pub squarings: u32,
    /// Index `i*` of the winning starting vector (0-based).
    pub i_star: usize,
    /// The winning quotient `mu_{i*}` of the shifted, normalized matrix.
    pub mu_star: f64,
    /// `||B~ w~||_2` for the returned pair (zero on the small branch).
    pub residual: f64,
    /// Working precision of the refinement stage.
    pub precision_bits: u32,
    /// The shift `t`.
    pub shift: String,
    /// Refinement sweeps performed for the chosen sign.
    pub refinements: u32,
    /// Whether the inertia certificate forced a bisection restart.
    pub bisection: bool,
    /// `lambda~^2 / (eps^2 ||A||_F^2)` for the best candidate.
    pub threshold_ratio: f64,
}

/// Output of [`approximate_largest_eigen`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenResult {
    pub kind: EigenKind,
    /// `lambda~ >= 0`, the approximate magnitude of the top eigenvalue.
    #[serde(with = "crate::util::serde_rational::option")]
    pub lambda_tilde: Option<Rational>,
    /// `w~`, an exact rational unit vector (`||w~||_2 = 1` exactly).
    #[serde(with = "crate::util::serde_rational::option_vec")]
    pub w_tilde: Option<Vec<Rational>>,
    /// Sign of `w~^T A w~` (`+1` when zero): the sign of the eigenvalue
    /// `w~` approximates.
    pub sign: i8,
    pub diagnostics: EigenDiagnostics,
}

impl EigenResult {
    /// `B~ = A - sign * lambda~ w~ w~^T`, or `None` on the small branch.
    pub fn b_tilde(&self, a: &SymmetricMatrix) -> Option<SymmetricMatrix> {
        let (l, w) = (self.lambda_tilde.as_ref()?, self.w_tilde.as_ref()?);
        let signed = if self.sign < 0 {
            Rational::from(-l)
        } else {
            l.clone()
        };
        Some(deflate(a, &signed, w))
    }

    /// The signed eigenvalue estimate `sign * lambda~`.
    pub fn signed_lambda(&self) -> Option<Rational> {
        let l = self.lambda_tilde.as_ref()?;
        Some(if self.sign < 0 {
            Rational::from(-l)
        } else {
            l.clone()
        })
    }
}

/// Derived parameters of the eigenvalue routine.
#[derive(Clone, Debug)]
pub struct SpectralParams {
    pub epsilon: Rational,
    pub eta: Rational,
    /// `delta = min(eps^4 / 100, eta^4 / 10^8)`.
    pub delta: Rational,
    /// `delta^(1/4) = min(eps / 100^(1/4), eta / 100)`.
    pub delta_quarter: Float,
    /// `t = ceil(||A||_F)`.
    pub shift: Integer,
    /// `k = ceil(log(9n/4) / (2 delta))`.
    pub k: Integer,
    /// Working precision of the refinement stage.
    pub precision_bits: u32,
}

impl SpectralParams {
    pub fn new(
        a: &SymmetricMatrix,
        epsilon: &Rational,
        eta: &Rational,
        cfg: &SpectralConfig,
    ) -> Result<Self> {
        check_unit_interval("eps", epsilon)?;
        check_unit_interval("eta", eta)?;
        let e4 = Rational::from(epsilon * epsilon).square() / 100u32;
        let h4 = Rational::from(eta * eta).square() / 100_000_000u32;
        let delta = if e4 <= h4 { e4 } else { h4 };
        let log2_inv = |x: &Rational| -> u32 {
            let inv = Rational::from(x.recip_ref());
            crate::util::ceil_log2(&inv).max(0) as u32
        };
        let precision_bits = cfg
            .precision_bits
            .max(log2_inv(eta) + log2_inv(epsilon) + cfg.guard_bits);
        let prec = precision_bits + 64;
        let root10 = Float::with_val(prec, 100).sqrt().sqrt();
        let dq_eps = Float::with_val(prec, epsilon) / root10;
        let dq_eta = Float::with_val(prec, eta) / 100u32;
        let delta_quarter = if dq_eps <= dq_eta { dq_eps } else { dq_eta };
        let n = a.n().max(1);
        let log_term = Float::with_val(prec, 9 * n as u64) / 4u32;
        let k_float = log_term.ln() / (Float::with_val(prec, &delta) * 2u32);
        let k = k_float
            .ceil()
            .to_integer()
            .expect("finite")
            .max(Integer::from(1));
        let shift = ceil_sqrt(&a.frobenius_sq());
        Ok(Self {
            epsilon: epsilon.clone(),
            eta: eta.clone(),
            delta,
            delta_quarter,
            shift,
            k,
            precision_bits,
        })
    }
}

fn check_unit_interval(name: &str, x: &Rational) -> Result<()> {
    if *x <= 0 || *x >= 1 {
        return Err(Error::Precondition(format!(
            "{name} must lie in (0, 1), got {x}"
        )));
    }
    Ok(())
}

/// `B = A - lambda w w^T`, exactly.
pub fn deflate(a: &SymmetricMatrix, lambda: &Rational, w: &[Rational]) -> SymmetricMatrix {
    a.minus_rank_one(lambda, w)
}

/// Power iteration in `f64`: starting from `e_start`, applies `A'` `k`
/// times with renormalization and returns
/// `(mu, v) = (||A' v||^2, v)` for the unit iterate `v`.
pub fn power_iterate(a_prime: &SymmetricMatrix, start: usize, k: u64) -> Result<(f64, Vec<f64>)> {
    let n = a_prime.n();
    if start >= n {
        return Err(Error::Precondition(format!(
            "start index {start} out of range"
        )));
    }
    if k == 0 {
        return Err(Error::Precondition("power iteration needs k >= 1".into()));
    }
    let m = a_prime.to_f64_dense();
    let mut v = vec![0.0; n];
    v[start] = 1.0;
    for _ in 0..k {
        v = matvec(&m, &v);
        if !normalize_f64(&mut v) {
            return Err(Error::Internal(
                "power iterate underflowed to the zero vector".into(),
            ));
        }
    }
    let av = matvec(&m, &v);
    let mu = av.iter().map(|x| x * x).sum::<f64>();
    Ok((mu, v))
}

fn matvec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| (0..n).map(|j| m[i * n + j] * v[j]).sum())
        .collect()
}

fn normalize_f64(v: &mut [f64]) -> bool {
    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nv == 0.0 || !nv.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    true
}

/// Approximates the largest-magnitude eigenpair of `a`.
///
/// Returns [`EigenKind::SmallMaxEigenvalue`] exactly when
/// `lambda~^2 < (1 - 9 delta^(1/4)) eps^2 ||A||_F^2`; otherwise a pair
/// with `(1 - eta)|lambda_max| <= lambda~ <= |lambda_max|`,
/// `||B~ w~|| < eta ||A||_F` and `||B~||_F <= (1 - eps^2/40) ||A||_F`.
pub fn approximate_largest_eigen(
    a: &SymmetricMatrix,
    epsilon: &Rational,
    eta: &Rational,
    cfg: &SpectralConfig,
) -> Result<EigenResult> {
    if a.n() == 0 || a.is_zero() {
        return Err(Error::Precondition("matrix must not be all zero".into()));
    }
    // The guarantees are invariant under scaling, so work with
    // 2^e A, ||2^e A||_F in [1, 2), and map the result back.
    let e = -(floor_log2(&a.frobenius_sq()).div_euclid(2));
    let scale = pow2(e);
    let unscale = pow2(-e);
    let a_scaled = SymmetricMatrix::from_fn(a.n(), |i, j| Rational::from(a.get(i, j) * &scale));
    let params = SpectralParams::new(&a_scaled, epsilon, eta, cfg)?;
    let (plus, minus) = if a.n() == 1 {
        (exact_one_by_one(&a_scaled), exact_one_by_one(&a_scaled))
    } else {
        let (p, m) = join(
            || candidate(&a_scaled, 1, &params, cfg),
            || candidate(&a_scaled, -1, &params, cfg),
        );
        (p?, m?)
    };
    let mut best = if minus.lambda > plus.lambda {
        minus
    } else {
        plus
    };
    best.lambda *= &unscale;
    best.rq *= &unscale;
    for x in best.aw.iter_mut() {
        *x *= &unscale;
    }
    let prec = params.precision_bits * 2 + 64;
    let norm_sq = a.frobenius_sq();
    let rhs = (Float::with_val(prec, 1) - Float::with_val(prec, &params.delta_quarter * 9u32))
        * Float::with_val(prec, Rational::from(epsilon * epsilon) * &norm_sq);
    let lhs = Float::with_val(prec, Rational::from(&best.lambda * &best.lambda));
    let threshold_ratio = (lhs.clone()
        / Float::with_val(prec, Rational::from(epsilon * epsilon) * &norm_sq))
    .to_f64();
    let sign: i8 = if best.rq < 0 { -1 } else { 1 };
    let mut diagnostics = EigenDiagnostics {
        k: params.k.to_string(),
        squarings: best.squarings,
        i_star: best.i_star,
        mu_star: best.mu_star,
        residual: 0.0,
        precision_bits: params.precision_bits,
        shift: params.shift.to_string(),
        refinements: best.refinements,
        bisection: best.bisection,
        threshold_ratio,
    };
    if lhs < rhs {
        return Ok(EigenResult {
            kind: EigenKind::SmallMaxEigenvalue,
            lambda_tilde: None,
            w_tilde: None,
            sign,
            diagnostics,
        });
    }
    let signed = if sign < 0 {
        Rational::from(-&best.lambda)
    } else {
        best.lambda.clone()
    };
    let bw: Vec<Rational> = best
        .aw
        .iter()
        .zip(&best.w)
        .map(|(x, wi)| x - Rational::from(&signed * wi))
        .collect();
    let res_sq = bw
        .iter()
        .fold(Rational::new(), |acc, x| acc + Rational::from(x * x));
    diagnostics.residual = res_sq.to_f64().sqrt();
    Ok(EigenResult {
        kind: EigenKind::Pair,
        lambda_tilde: Some(best.lambda),
        w_tilde: Some(best.w),
        sign,
        diagnostics,
    })
}

/// One signed run of the routine.
struct Candidate {
    /// `lambda~` computed from `||A w~||`.
    lambda: Rational,
    w: Vec<Rational>,
    aw: Vec<Rational>,
    /// `w~^T A w~`.
    rq: Rational,
    i_star: usize,
    mu_star: f64,
    squarings: u32,
    refinements: u32,
    bisection: bool,
}

fn exact_one_by_one(a: &SymmetricMatrix) -> Candidate {
    let a00 = a.get(0, 0).clone();
    let w = vec![Rational::from(1)];
    let lambda = Rational::from(a00.abs_ref());
    Candidate {
        lambda,
        aw: vec![a00.clone()],
        rq: a00.clone(),
        w,
        i_star: 0,
        mu_star: 1.0,
        squarings: 0,
        refinements: 0,
        bisection: false,
    }
}

/// Repeated squaring of `X = (sA + tI) / 2t` in `f64`, renormalizing by the
/// largest entry, until `2^squarings >= k` or the powers stop changing.
fn power_matrix(
    a_f64: &[f64],
    n: usize,
    s: f64,
    t: f64,
    k: &Integer,
    cfg: &SpectralConfig,
) -> Result<(Vec<f64>, u32)> {
    let mut x: Vec<f64> = a_f64.iter().map(|v| s * v / (2.0 * t)).collect();
    for i in 0..n {
        x[i * n + i] += 0.5;
    }
    let needed = if *k <= 1 {
        0
    } else {
        (Integer::from(k - 1u32)).significant_bits()
    };
    let mut done = 0u32;
    while done < needed {
        if done >= cfg.max_squarings {
            return Err(Error::Feasibility(format!(
                "power matrix did not converge within {} squarings",
                cfg.max_squarings
            )));
        }
        let mut y = vec![0.0; n * n];
        for i in 0..n {
            for l in 0..n {
                let xil = x[i * n + l];
                if xil == 0.0 {
                    continue;
                }
                for j in 0..n {
                    y[i * n + j] += xil * x[l * n + j];
                }
            }
        }
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 || !scale.is_finite() {
            return Err(Error::Internal("matrix power underflowed".into()));
        }
        y.iter_mut().for_each(|v| *v /= scale);
        done += 1;
        let diff = x
            .iter()
            .zip(&y)
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        x = y;
        if diff <= 4.0 * f64::EPSILON {
            break;
        }
    }
    Ok((x, done))
}

fn candidate(
    a: &SymmetricMatrix,
    s: i8,
    params: &SpectralParams,
    cfg: &SpectralConfig,
) -> Result<Candidate> {
    let n = a.n();
    let a_f64 = a.to_f64_dense();
    let t = params.shift.to_f64().max(1.0);
    let sf = f64::from(s);
    let (x, squarings) = power_matrix(&a_f64, n, sf, t, &params.k, cfg)?;
    // A'/(2t) applied to each column of the power; mu_i in canonical order.
    let mut best: Option<(usize, f64)> = None;
    for i in 0..n {
        let col: Vec<f64> = (0..n).map(|r| x[r * n + i]).collect();
        let nsq: f64 = col.iter().map(|v| v * v).sum();
        if nsq == 0.0 {
            continue;
        }
        let mut num = 0.0;
        for r in 0..n {
            let mut acc = 0.5 * col[r];
            for c in 0..n {
                acc += sf * a_f64[r * n + c] * col[c] / (2.0 * t);
            }
            num += acc * acc;
        }
        let mu = num / nsq;
        if best.is_none_or(|(_, m)| mu > m) {
            best = Some((i, mu));
        }
    }
    let (i_star, mu_star) =
        best.ok_or_else(|| Error::Internal("every column of the matrix power vanished".into()))?;
    let w0: Vec<f64> = (0..n).map(|r| x[r * n + i_star]).collect();

    let prec = params.precision_bits;
    let hpm = HpMatrix {
        n,
        prec,
        data: (0..n * n)
            .map(|idx| {
                let v = a.get(idx / n, idx % n);
                let f = Float::with_val(prec, v);
                if s < 0 {
                    -f
                } else {
                    f
                }
            })
            .collect(),
    };
    let tf = Float::with_val(prec, &params.shift).max(&Float::with_val(prec, 1));
    let (v, refinements, bisection) = refine(&hpm, &w0, &tf, params, cfg)?;

    let form = LinearForm::new(v, 1.0);
    let w = form.to_rational_unit(prec)?;
    let aw = a.mul_vec(&w);
    let aw_sq = weighted_square_sum(aw.iter().map(|x| (x, 1)));
    let rq = exact_dot(&w, &aw);
    let mut norm_aw = Float::with_val_round(prec, &aw_sq, Round::Down).0;
    norm_aw.sqrt_round(Round::Down);
    let guard = Float::with_val(prec, &params.shift) >> (prec as i32 - 16);
    let mut lambda = float_to_rational(&(norm_aw - guard));
    if lambda < 0 {
        lambda = Rational::new();
    }
    Ok(Candidate {
        lambda,
        w,
        aw,
        rq,
        i_star,
        mu_star,
        squarings,
        refinements,
        bisection,
    })
}

/// Rayleigh-quotient iteration from `w0`, certified by an inertia count to
/// have converged to within `delta^(1/4) ||A||_F / (4 sqrt(n))` of the top
/// of the spectrum (`A` is pre-scaled so that `||A||_F >= 1`);
/// falls back to bisection plus inverse iteration when it has not.
fn refine(
    m: &HpMatrix,
    w0: &[f64],
    t: &Float,
    params: &SpectralParams,
    cfg: &SpectralConfig,
) -> Result<(Vec<Float>, u32, bool)> {
    let prec = m.prec;
    let tol = Float::with_val(prec, t >> (prec as i32 - 40));
    let mut v: Vec<Float> = w0.iter().map(|&x| Float::with_val(prec, x)).collect();
    if !hp::normalize(prec, &mut v) {
        return Err(Error::Internal("starting vector vanished".into()));
    }
    let mut sweeps = 0u32;
    let mut sigma = m.rayleigh(&v);
    rqi(
        m,
        &mut v,
        &mut sigma,
        &tol,
        cfg.max_refinements,
        &mut sweeps,
    );

    // |lambda_max| >= ||A||_F / sqrt(n) >= 1 / sqrt(n) after scaling, so this
    // margin is at most delta^(1/4) |lambda_max| / 4.
    let root_n = Float::with_val(prec, m.n).sqrt().ceil();
    let margin = Float::with_val(prec, &params.delta_quarter / root_n) / 4u32;
    if top_verified(m, &Float::with_val(prec, &sigma + &margin)) {
        return Ok((v, sweeps, false));
    }
    // Bisection on the spectrum for an interval [lo, hi] of width <= margin
    // containing the top eigenvalue and nothing above it.
    let mut lo = Float::with_val(prec, &sigma + &margin);
    let mut hi = Float::with_val(prec, t * 2u32);
    let width = margin;
    let tri = m.tridiagonal();
    let mut steps = 0u32;
    while Float::with_val(prec, &hi - &lo) > width {
        let mut mid = Float::with_val(prec, &lo + &hi) / 2u32;
        let below = loop {
            match tri.count_below(&mid) {
                Some(c) => break c,
                None => nudge(&mut mid, &width),
            }
        };
        if below < m.n {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
        if steps > 4 * prec {
            return Err(Error::Internal(
                "spectral bisection did not terminate".into(),
            ));
        }
    }
    // Inverse iteration with the fixed shift hi (>= every eigenvalue), whose
    // nearest eigenvalue is the top one.  A start vector orthogonal to the
    // top eigenvector cannot find it, so a fixed sequence of starts is
    // tried: w0, a generic vector, then every basis vector.
    let n = m.n;
    let shift = Float::with_val(prec, &hi + Float::with_val(prec, &width) / 2u32);
    let mut starts: Vec<Vec<f64>> = vec![w0.to_vec()];
    starts.push(
        (0..n)
            .map(|j| {
                1.0 + (j as f64 + 1.0) / (n as f64 + 2.0) * if j % 2 == 0 { 1.0 } else { -0.5 }
            })
            .collect(),
    );
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        starts.push(e);
    }
    for start in starts {
        let mut v: Vec<Float> = start.iter().map(|&x| Float::with_val(prec, x)).collect();
        if !hp::normalize(prec, &mut v) {
            continue;
        }
        for _ in 0..cfg.max_refinements.max(1) * 4 {
            sweeps += 1;
            let Some(mut y) = m.solve_shifted(&shift, &v) else {
                break;
            };
            if !hp::normalize(prec, &mut y) {
                break;
            }
            v = y;
            let s = m.rayleigh(&v);
            if residual(m, &v, &s) <= Float::with_val(prec, &width) / 4u32 {
                break;
            }
        }
        let mut sigma = m.rayleigh(&v);
        let mut polished = v.clone();
        let mut polished_sigma = sigma.clone();
        rqi(
            m,
            &mut polished,
            &mut polished_sigma,
            &tol,
            cfg.max_refinements,
            &mut sweeps,
        );
        if polished_sigma >= Float::with_val(prec, &lo - &width) {
            v = polished;
            sigma = polished_sigma;
        }
        if top_verified(
            m,
            &Float::with_val(prec, &sigma + Float::with_val(prec, &width * 4u32)),
        ) {
            return Ok((v, sweeps, true));
        }
    }
    Err(Error::Internal(
        "could not certify the top eigenvalue".into(),
    ))
}

/// Moves `x` up by a small amount that is guaranteed to change it.
fn nudge(x: &mut Float, width: &Float) {
    let prec = x.prec();
    let rel = Float::with_val(prec, x.clone().abs() >> (prec as i32 / 2));
    let abs = Float::with_val(prec, width >> 8);
    let step = if rel > abs { rel } else { abs };
    let before = x.clone();
    *x += step;
    if *x == before {
        x.next_up();
    }
}

fn top_verified(m: &HpMatrix, level: &Float) -> bool {
    let mut lvl = level.clone();
    let width = Float::with_val(m.prec, lvl.clone().abs() >> 32);
    for _ in 0..8 {
        match m.count_below(&lvl) {
            Some(c) => return c == m.n,
            None => nudge(&mut lvl, &width),
        }
    }
    false
}

fn residual(m: &HpMatrix, v: &[Float], sigma: &Float) -> Float {
    let mv = m.mul_vec(v);
    let diff: Vec<Float> = mv
        .iter()
        .zip(v)
        .map(|(a, b)| Float::with_val(m.prec, a - Float::with_val(m.prec, sigma * b)))
        .collect();
    hp::norm(m.prec, &diff)
}

fn rqi(
    m: &HpMatrix,
    v: &mut Vec<Float>,
    sigma: &mut Float,
    tol: &Float,
    max: u32,
    sweeps: &mut u32,
) {
    for _ in 0..max {
        if residual(m, v, sigma) <= *tol {
            break;
        }
        *sweeps += 1;
        let Some(mut y) = m.solve_shifted(sigma, v) else {
            break;
        };
        if !hp::normalize(m.prec, &mut y) {
            break;
        }
        *v = y;
        *sigma = m.rayleigh(v);
    }
}
