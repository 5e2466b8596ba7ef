//! One decoupling step: split the top eigendirection off a polynomial.

use rug::Rational;
use serde::{Deserialize, Serialize};

use crate::config::SpectralConfig;
use crate::error::{Error, Result};
use crate::poly::{substitute_rational, Degree2Polynomial};
use crate::spectral::{approximate_largest_eigen, EigenDiagnostics, EigenKind};

/// Which branch [`approximate_decompose`] took.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecomposeKind {
    SmallMaxEigenvalue,
    Split,
}

/// Output of [`approximate_decompose`].
///
/// On [`DecomposeKind::Split`], `lambda1 y^2 + mu1 y + r(y, x)` with
/// independent standard Gaussians has exactly the distribution of `p(x)`.
/// `r` has `n + 1` variables: index 0 is `y`, index `j + 1` is `x_j`; it has
/// no `y^2` or `y` term, and its only `y`-dependence is the residue.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecomposeResult {
    pub kind: DecomposeKind,
    #[serde(with = "crate::util::serde_rational::option")]
    pub lambda1: Option<Rational>,
    #[serde(with = "crate::util::serde_rational::option")]
    pub mu1: Option<Rational>,
    pub r: Option<Degree2Polynomial>,
    /// The split direction (exact unit vector).
    #[serde(with = "crate::util::serde_rational::option_vec")]
    pub direction: Option<Vec<Rational>>,
    /// Diagnostics of the eigenvalue routine, when it ran.
    pub eigen: Option<EigenDiagnostics>,
}

impl DecomposeResult {
    fn small(eigen: Option<EigenDiagnostics>) -> Self {
        Self {
            kind: DecomposeKind::SmallMaxEigenvalue,
            lambda1: None,
            mu1: None,
            r: None,
            direction: None,
            eigen,
        }
    }

    /// `lambda1 y^2 + mu1 y + r` as one polynomial over `(y, x)`.
    pub fn recombined(&self) -> Option<Degree2Polynomial> {
        let mut q = self.r.clone()?;
        q.add_quad(0, 0, self.lambda1.clone()?).ok()?;
        q.add_lin(0, self.mu1.clone()?).ok()?;
        Some(q)
    }
}

/// Splits the approximate top eigendirection off `p`.
///
/// Requires a zero constant term and positive Gaussian variance.  Returns
/// [`DecomposeKind::SmallMaxEigenvalue`] when `||A||_F^2 < eps^2 Var(p)`
/// or when the eigenvalue routine reports a small top eigenvalue; in that
/// case `lambda_max(p)^2 <= eps^2 Var(p)`.  Otherwise the split satisfies
/// `Var(Res(r, y)) <= 4 eta^2 Var(p)` and
/// `Var(r) <= (1 - eps^4/40) Var(p)`.
pub fn approximate_decompose(
    p: &Degree2Polynomial,
    epsilon: &Rational,
    eta: &Rational,
    cfg: &SpectralConfig,
) -> Result<DecomposeResult> {
    if *p.constant_term() != 0 {
        return Err(Error::Precondition(
            "decompose requires a zero constant term".into(),
        ));
    }
    let var = p.variance_gaussian();
    if var == 0 {
        return Err(Error::Precondition(
            "decompose requires positive variance".into(),
        ));
    }
    let a = p.quadratic_matrix();
    let norm_sq = a.frobenius_sq();
    if norm_sq < Rational::from(epsilon * epsilon) * &var {
        return Ok(DecomposeResult::small(None));
    }
    let eig = approximate_largest_eigen(&a, epsilon, eta, cfg)?;
    if eig.kind == EigenKind::SmallMaxEigenvalue {
        return Ok(DecomposeResult::small(Some(eig.diagnostics)));
    }
    let w = eig.w_tilde.clone().expect("pair has a direction");
    let mut q = substitute_rational(p, &w)?;
    let lambda1 = q.quad_coeff(0, 0);
    let mu1 = q.lin_coeff(0);
    q.add_quad(0, 0, Rational::from(-&lambda1))?;
    q.add_lin(0, Rational::from(-&mu1))?;
    Ok(DecomposeResult {
        kind: DecomposeKind::Split,
        lambda1: Some(lambda1),
        mu1: Some(mu1),
        r: Some(q),
        direction: Some(w),
        eigen: Some(eig.diagnostics),
    })
}
