//! Verification oracles and run reports.

mod cdf;
mod oracle;
mod report;

pub use cdf::normal_cdf_hp;
pub use oracle::{
    brute_force_average, brute_force_boolean, for_each_cube_value, jacobi_eigenvalues, mc_gaussian,
    MonteCarlo,
};
pub use report::{sha256_hex, RunReport, StageTiming};
