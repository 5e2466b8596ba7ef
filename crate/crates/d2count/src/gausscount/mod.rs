//! Counting for decoupled juntas over Gaussian inputs, and the end-to-end
//! Gaussian counter.
//!
//! A decoupled junta `q(y) = sum_i (lambda_i y_i^2 + mu_i y_i) + C` has
//! independent coordinates, so after rounding its coefficients to small
//! integers each coordinate can be replaced by a finite, equally weighted
//! image of a certified normal cover, and the law of the sum computed
//! exactly by dynamic programming.

mod count;
mod cover;
mod dp;

pub use count::{
    cached_normal_cover, count_gaussian, count_junta, eps_prime, junta_from_integers,
    GaussianCount, GaussianCounter, JuntaCount,
};
pub use cover::{discretize, normal_cover, DiscreteSupport, NormalCover};
pub use dp::{dp_count, dp_table_with, DpStrategy, DpTable};
