//! Small dense linear algebra at a fixed `rug::Float` precision.

use rug::{Assign, Float};

/// A dense row-major matrix of `Float`s sharing one precision.
#[derive(Clone, Debug)]
pub(crate) struct HpMatrix {
    pub n: usize,
    pub prec: u32,
    pub data: Vec<Float>,
}

impl HpMatrix {
    pub fn get(&self, i: usize, j: usize) -> &Float {
        &self.data[i * self.n + j]
    }

    pub fn zero(&self) -> Float {
        Float::new(self.prec)
    }

    /// `M v`.
    pub fn mul_vec(&self, v: &[Float]) -> Vec<Float> {
        (0..self.n)
            .map(|i| {
                let mut s = self.zero();
                for (mij, vj) in self.data[i * self.n..(i + 1) * self.n].iter().zip(v) {
                    s += mij * vj;
                }
                s
            })
            .collect()
    }

    /// `v^T M v`.
    pub fn rayleigh(&self, v: &[Float]) -> Float {
        dot(self.prec, v, &self.mul_vec(v))
    }

    /// Solves `(M - sigma I) x = b` by Gaussian elimination with partial
    /// pivoting.  Returns `None` when a pivot is exactly zero.
    pub fn solve_shifted(&self, sigma: &Float, b: &[Float]) -> Option<Vec<Float>> {
        let n = self.n;
        let p = self.prec;
        let mut m: Vec<Float> = self.data.clone();
        for i in 0..n {
            m[i * n + i] -= sigma;
        }
        let mut rhs: Vec<Float> = b.to_vec();
        let mut f = Float::new(p);
        for col in 0..n {
            let mut piv = col;
            for r in col + 1..n {
                if m[r * n + col].cmp_abs(&m[piv * n + col]) == Some(std::cmp::Ordering::Greater) {
                    piv = r;
                }
            }
            if m[piv * n + col].is_zero() {
                return None;
            }
            if piv != col {
                for c in 0..n {
                    m.swap(piv * n + c, col * n + c);
                }
                rhs.swap(piv, col);
            }
            let (top, bottom) = m.split_at_mut((col + 1) * n);
            let pivot_row = &top[col * n..];
            for r in 0..n - col - 1 {
                let row = &mut bottom[r * n..(r + 1) * n];
                if row[col].is_zero() {
                    continue;
                }
                f.assign(&row[col] / &pivot_row[col]);
                for c in col..n {
                    row[c] -= &f * &pivot_row[c];
                }
                let (rt, rb) = rhs.split_at_mut(col + 1);
                rb[r] -= &f * &rt[col];
            }
        }
        let mut x = vec![Float::new(p); n];
        for i in (0..n).rev() {
            let mut s = rhs[i].clone();
            for c in i + 1..n {
                s -= &m[i * n + c] * &x[c];
            }
            x[i] = s / &m[i * n + i];
        }
        Some(x)
    }

    /// Number of eigenvalues strictly below `sigma`, by Sylvester's law of
    /// inertia applied to an `L D L^T` factorization of `M - sigma I`.
    /// Returns `None` if a pivot vanishes exactly.
    pub fn count_below(&self, sigma: &Float) -> Option<usize> {
        let n = self.n;
        let p = self.prec;
        let mut l = vec![Float::new(p); n * n];
        let mut d = vec![Float::new(p); n];
        let mut ld = vec![Float::new(p); n];
        let mut negatives = 0;
        for j in 0..n {
            // ld[k] = L_jk d_k for k < j.
            for k in 0..j {
                ld[k].assign(&l[j * n + k] * &d[k]);
            }
            let mut dj = Float::with_val(p, self.get(j, j) - sigma);
            for k in 0..j {
                dj -= &l[j * n + k] * &ld[k];
            }
            if dj.is_zero() {
                return None;
            }
            if dj.is_sign_negative() {
                negatives += 1;
            }
            for i in j + 1..n {
                let mut s = self.get(i, j).clone();
                for k in 0..j {
                    s -= &l[i * n + k] * &ld[k];
                }
                l[i * n + j] = s / &dj;
            }
            d[j] = dj;
        }
        Some(negatives)
    }
}

/// A symmetric tridiagonal matrix: `diag` and the squares of the
/// off-diagonal entries, which is all a Sturm count needs.
#[derive(Clone, Debug)]
pub(crate) struct Tridiagonal {
    pub diag: Vec<Float>,
    pub off_sq: Vec<Float>,
}

impl HpMatrix {
    /// Householder reduction to an orthogonally similar tridiagonal matrix.
    pub fn tridiagonal(&self) -> Tridiagonal {
        let n = self.n;
        let p = self.prec;
        let mut a = self.data.clone();
        for k in 0..n.saturating_sub(2) {
            let m = n - k - 1;
            let mut v: Vec<Float> = (0..m).map(|i| a[(k + 1 + i) * n + k].clone()).collect();
            let xnorm = norm(p, &v);
            if xnorm.is_zero() {
                continue;
            }
            let alpha = if v[0].is_sign_negative() {
                xnorm
            } else {
                -xnorm
            };
            v[0] -= &alpha;
            if !normalize(p, &mut v) {
                continue;
            }
            // p = 2 B v, q = p - (v^T p) v, B <- B - v q^T - q v^T.
            let pv: Vec<Float> = (0..m)
                .map(|i| {
                    let mut s = Float::new(p);
                    for j in 0..m {
                        s += Float::with_val(p, &a[(k + 1 + i) * n + k + 1 + j] * &v[j]);
                    }
                    s * 2u32
                })
                .collect();
            let kk = dot(p, &v, &pv);
            let q: Vec<Float> = pv
                .iter()
                .zip(&v)
                .map(|(x, y)| Float::with_val(p, x - Float::with_val(p, &kk * y)))
                .collect();
            for i in 0..m {
                for j in 0..m {
                    let d = Float::with_val(p, &v[i] * &q[j]) + Float::with_val(p, &q[i] * &v[j]);
                    a[(k + 1 + i) * n + k + 1 + j] -= d;
                }
            }
            a[(k + 1) * n + k] = alpha;
        }
        Tridiagonal {
            diag: (0..n).map(|i| a[i * n + i].clone()).collect(),
            off_sq: (0..n.saturating_sub(1))
                .map(|i| Float::with_val(p, a[(i + 1) * n + i].square_ref()))
                .collect(),
        }
    }
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `sigma` (Sturm sequence).
    /// Returns `None` if a pivot vanishes exactly.
    pub fn count_below(&self, sigma: &Float) -> Option<usize> {
        let p = sigma.prec();
        let mut negatives = 0;
        let mut q = Float::new(p);
        for (i, d) in self.diag.iter().enumerate() {
            let mut next = Float::with_val(p, d - sigma);
            if i > 0 {
                next -= Float::with_val(p, &self.off_sq[i - 1] / &q);
            }
            if next.is_zero() {
                return None;
            }
            if next.is_sign_negative() {
                negatives += 1;
            }
            q = next;
        }
        Some(negatives)
    }
}

pub(crate) fn dot(prec: u32, u: &[Float], v: &[Float]) -> Float {
    let mut s = Float::new(prec);
    for (a, b) in u.iter().zip(v) {
        s += a * b;
    }
    s
}

pub(crate) fn norm(prec: u32, v: &[Float]) -> Float {
    dot(prec, v, v).sqrt()
}

/// Scales `v` to unit length; returns `false` if `v` is zero.
pub(crate) fn normalize(prec: u32, v: &mut [Float]) -> bool {
    let nv = norm(prec, v);
    if nv.is_zero() || !nv.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= &nv;
    }
    true
}
