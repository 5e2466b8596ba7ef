//! Independent reference computations: exhaustive enumeration of the
//! hypercube, seeded Monte Carlo over Gaussians, and a high-precision
//! Jacobi eigenvalue solver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::OracleConfig;
use crate::error::{Error, Result};
use crate::poly::{Degree2Polynomial, SymmetricMatrix};

/// Calls `visit(p(x))` for every `x` in `{-1,1}^n`, in Gray-code order.
///
/// Coefficients are scaled to integers and each step updates the value in
/// `O(n)` from the partial derivatives.  `n` must not exceed `enum_cap`.
pub fn for_each_cube_value(
    p: &Degree2Polynomial,
    enum_cap: u32,
    mut visit: impl FnMut(&Rational),
) -> Result<()> {
    let n = p.n();
    if n > enum_cap as usize || n > 24 {
        return Err(Error::Precondition(format!(
            "enumeration needs n <= {}, got n = {n}",
            enum_cap.min(24)
        )));
    }
    let (den, q) = p.integer_scaled();
    let mut a = vec![vec![Integer::new(); n]; n];
    let mut constant = q.constant_term().numer().clone();
    for (&(i, j), c) in q.quad_terms() {
        if i == j {
            // x_i^2 = 1 on the cube.
            constant += c.numer();
        } else {
            a[i][j] = c.numer().clone();
            a[j][i] = c.numer().clone();
        }
    }
    let mut b = vec![Integer::new(); n];
    for (&i, c) in q.lin_terms() {
        b[i] = c.numer().clone();
    }
    // Start at x = (1, ..., 1).
    let mut x = vec![1i8; n];
    let mut grad: Vec<Integer> = (0..n)
        .map(|i| a[i].iter().fold(b[i].clone(), |acc, v| acc + v))
        .collect();
    let half_quad: Integer = (0..n)
        .map(|i| a[i].iter().skip(i + 1).sum::<Integer>())
        .sum();
    let mut value = constant + half_quad + b.iter().sum::<Integer>();
    visit(&Rational::from((value.clone(), den.clone())));
    for step in 1u64..(1u64 << n) {
        let j = step.trailing_zeros() as usize;
        // Flipping x_j changes p by -2 x_j (b_j + sum_k a_jk x_k).
        if x[j] > 0 {
            value -= Integer::from(&grad[j] * 2u32);
        } else {
            value += Integer::from(&grad[j] * 2u32);
        }
        for (k, g) in grad.iter_mut().enumerate() {
            if k != j && a[k][j] != 0 {
                if x[j] > 0 {
                    *g -= Integer::from(&a[k][j] * 2u32);
                } else {
                    *g += Integer::from(&a[k][j] * 2u32);
                }
            }
        }
        x[j] = -x[j];
        visit(&Rational::from((value.clone(), den.clone())));
    }
    Ok(())
}

/// Exact fraction of `{-1,1}^n` on which `predicate(p(x))` holds.
pub fn brute_force_boolean(
    p: &Degree2Polynomial,
    enum_cap: u32,
    mut predicate: impl FnMut(&Rational) -> bool,
) -> Result<Rational> {
    let mut hits = Integer::new();
    for_each_cube_value(p, enum_cap, |v| {
        if predicate(v) {
            hits += 1;
        }
    })?;
    Ok(Rational::from((hits, Integer::from(1) << p.n() as u32)))
}

/// Exact average of `f(p(x))` over `{-1,1}^n`.
pub fn brute_force_average(
    p: &Degree2Polynomial,
    enum_cap: u32,
    mut f: impl FnMut(&Rational) -> Rational,
) -> Result<Rational> {
    let mut sum = Rational::new();
    for_each_cube_value(p, enum_cap, |v| sum += f(v))?;
    Ok(sum / (Integer::from(1) << p.n() as u32))
}

/// A Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonteCarlo {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

/// Samples per independently seeded stream in [`mc_gaussian`].
const MC_CHUNK: u64 = 1 << 14;

/// Seeded Monte Carlo estimate of `Pr_{x ~ N(0, I_n)}[predicate(p(x))]`.
///
/// Samples are split into fixed chunks of `2^14`; chunk `c` draws from
/// ChaCha20 seeded with `mc_seed` on stream `c`, and each coordinate is an
/// inverse-CDF transform of a uniform `(k + 1/2) / 2^53`.  The estimate is
/// therefore a function of the seed alone, whatever the thread count.
pub fn mc_gaussian(
    p: &Degree2Polynomial,
    cfg: &OracleConfig,
    predicate: impl Fn(f64) -> bool + Sync,
) -> MonteCarlo {
    let n = p.n();
    let mut quad: Vec<(usize, usize, f64)> = p
        .quad_terms()
        .map(|(&(i, j), c)| (i, j, c.to_f64()))
        .collect();
    quad.sort_by_key(|&(i, j, _)| (i, j));
    let lin: Vec<(usize, f64)> = p.lin_terms().map(|(&i, c)| (i, c.to_f64())).collect();
    let constant = p.constant_term().to_f64();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let samples = cfg.mc_samples;
    let chunks = samples.div_ceil(MC_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(cfg.mc_seed);
            rng.set_stream(c);
            let count = MC_CHUNK.min(samples - c * MC_CHUNK);
            let mut x = vec![0.0f64; n];
            let mut hits = 0u64;
            for _ in 0..count {
                for xi in x.iter_mut() {
                    let k: u64 = rng.gen::<u64>() >> 11;
                    let u = (k as f64 + 0.5) / (1u64 << 53) as f64;
                    *xi = normal.inverse_cdf(u);
                }
                let mut v = constant;
                for &(i, j, a) in &quad {
                    v += a * x[i] * x[j];
                }
                for &(i, b) in &lin {
                    v += b * x[i];
                }
                if predicate(v) {
                    hits += 1;
                }
            }
            hits
        })
        .sum();
    let est = hits as f64 / samples as f64;
    MonteCarlo {
        estimate: est,
        std_error: (est * (1.0 - est) / samples as f64).sqrt(),
        samples,
    }
}

/// All eigenvalues of a symmetric rational matrix, ascending, by cyclic
/// Jacobi rotations at `prec` bits.
///
/// Sweeps continue until the off-diagonal mass falls below `2^-(prec-8)`
/// times the Frobenius norm.
pub fn jacobi_eigenvalues(a: &SymmetricMatrix, prec: u32) -> Vec<Float> {
    let n = a.n();
    let mut m: Vec<Vec<Float>> = (0..n)
        .map(|i| (0..n).map(|j| Float::with_val(prec, a.get(i, j))).collect())
        .collect();
    let fro = Float::with_val(prec, a.frobenius_sq()).sqrt();
    let tol = Float::with_val(prec, &fro >> (prec as i32 - 8));
    let tol_sq = Float::with_val(prec, tol.square_ref());
    for _sweep in 0..100 {
        let mut off = Float::new(prec);
        for i in 0..n {
            for j in i + 1..n {
                off += Float::with_val(prec, m[i][j].square_ref()) * 2u32;
            }
        }
        if off <= tol_sq {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].is_zero() {
                    continue;
                }
                // Rotation angle: tan(2 theta) = 2 m_pq / (m_qq - m_pp).
                let theta = Float::with_val(prec, &m[q][q] - &m[p][p])
                    / Float::with_val(prec, &m[p][q] * 2u32);
                let root = (Float::with_val(prec, theta.square_ref()) + 1u32).sqrt();
                let t = if theta.is_sign_negative() {
                    Float::with_val(prec, -1i32) / (Float::with_val(prec, -&theta) + &root)
                } else {
                    Float::with_val(prec, 1u32) / (Float::with_val(prec, &theta) + &root)
                };
                let c = (Float::with_val(prec, t.square_ref()) + 1u32)
                    .sqrt()
                    .recip();
                let s = Float::with_val(prec, &t * &c);
                for k in 0..n {
                    let mkp = m[k][p].clone();
                    let mkq = m[k][q].clone();
                    m[k][p] = Float::with_val(prec, &c * &mkp) - Float::with_val(prec, &s * &mkq);
                    m[k][q] = Float::with_val(prec, &s * &mkp) + Float::with_val(prec, &c * &mkq);
                }
                for k in 0..n {
                    let mpk = m[p][k].clone();
                    let mqk = m[q][k].clone();
                    m[p][k] = Float::with_val(prec, &c * &mpk) - Float::with_val(prec, &s * &mqk);
                    m[q][k] = Float::with_val(prec, &s * &mpk) + Float::with_val(prec, &c * &mqk);
                }
            }
        }
    }
    let mut eig: Vec<Float> = (0..n).map(|i| m[i][i].clone()).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    eig
}
