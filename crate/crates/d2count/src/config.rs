//! Calibrated constants for every stage, loadable from a TOML-style
//! `key = value` file.
//!
//! The asymptotic analysis behind each stage leaves its constants open;
//! they are collected here so that a run is fully described by its input
//! and one `Config` value.  Fractional constants are stored as `f64` and
//! converted to exact rationals (every finite `f64` is a dyadic rational)
//! at the point of use.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants for the derandomized largest-eigenvalue routine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    /// Minimum working precision (mantissa bits) for the refinement stage.
    pub precision_bits: u32,
    /// Extra bits kept above `log2(1/eta)` when `eta` is very small.
    pub guard_bits: u32,
    /// Maximum number of matrix squarings spent computing `A'^k`.
    pub max_squarings: u32,
    /// Maximum number of refinement sweeps at working precision.
    pub max_refinements: u32,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            precision_bits: 128,
            guard_bits: 48,
            max_squarings: 4096,
            max_refinements: 60,
        }
    }
}

/// Constants of the junta construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JuntaConfig {
    pub c_alpha: f64,
    pub c_k: f64,
    pub c_gamma: f64,
    pub c_eta: f64,
}

impl Default for JuntaConfig {
    fn default() -> Self {
        Self {
            c_alpha: 1.0 / 16.0,
            c_k: 64.0,
            c_gamma: 1.0 / 16.0,
            c_eta: 1.0 / 64.0,
        }
    }
}

/// Constants of the junta counter (rounding, normal cover, DP).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountConfig {
    /// `eps' = c1 * eps^6`, rounded down to a power of two.
    pub c1: f64,
    /// Upper bound applied to `eps'` before rounding to a power of two.
    pub eps_prime_cap: f64,
    /// `eps* = c2 * eps / K`, rounded down to a power of two.
    pub c2: f64,
    /// Binomial cover uses the smallest odd square `>= cover_constant / eps*^2`.
    pub cover_constant: u64,
    /// Lattice cells per unit of the rounded junta when convolving supports.
    pub dp_cells_per_unit: u32,
    /// Largest packed DP table (in bits) the counter will build.
    pub dp_bit_budget: u64,
    /// Fraction of the Gaussian error budget spent on the junta construction.
    pub junta_eps_share: f64,
}

impl Default for CountConfig {
    fn default() -> Self {
        Self {
            c1: 2097152.0,
            eps_prime_cap: 1.0 / 32.0,
            c2: 0.5,
            cover_constant: 100,
            dp_cells_per_unit: 4,
            dp_bit_budget: 1 << 31,
            junta_eps_share: 0.5,
        }
    }
}

/// Constants of the regularity tree and the Boolean counter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegularityConfig {
    /// Tree parameter `tau = c_tau * eps^9`.
    pub c_tau: f64,
    /// Constant `C` in the sign-leaf threshold `t* = 1/(2 C^2)`.
    pub c_sign: f64,
    /// Constant `C'` in the relation between `tau` and `tau~`.
    pub c_prime: f64,
    /// Constant in `alpha = c * (d ln ln(1/tau) + d ln d)`.
    pub alpha_const: f64,
    /// Constant in the sign-leaf tail-norm bound `(c ln(1/beta))^(-d/2)`.
    pub log_const: f64,
    /// Exponent in the depth cap `(1/tau) (d ln(1/tau))^e`.
    pub depth_exponent: f64,
    /// Smallest accuracy accepted by the command-line front end.
    pub eps_floor: f64,
    /// Gaussian accuracy for regular leaves, as a fraction of `eps`.
    pub leaf_gauss_share: f64,
    /// Gaussian accuracy used by the regular fast path, as a fraction of `eps`.
    pub regular_gauss_share: f64,
    /// Largest number of tree leaves the counter is willing to build.
    pub leaf_budget: u64,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self {
            c_tau: 1.0,
            c_sign: 2.0,
            c_prime: 2.0,
            alpha_const: 4.0,
            log_const: 4.0,
            depth_exponent: 2.0,
            eps_floor: 0.02,
            leaf_gauss_share: 0.25,
            regular_gauss_share: 0.5,
            leaf_budget: 1 << 22,
        }
    }
}

/// Constants of the absolute-moment estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentConfig {
    /// `M = ceil(c_m * k * max(1, ln k) * ln(1/eps))`.
    pub c_m: f64,
    /// Largest moment order accepted.
    pub k_cap: u32,
    /// Largest order accepted by the exact raw-moment expansion.
    pub raw_k_cap: u32,
    /// Largest number of buckets queried one by one; larger histograms
    /// are only built when the counter's tree allows reading them off its
    /// leaves.
    pub bucket_budget: u64,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self {
            c_m: 2.0,
            k_cap: 5,
            raw_k_cap: 6,
            bucket_budget: 1 << 20,
        }
    }
}

/// Settings for the verification oracles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub mc_seed: u64,
    pub mc_samples: u64,
    /// Largest `n` for exhaustive enumeration (at most 24).
    pub enum_cap: u32,
    /// Bits of accuracy for the high-precision normal CDF.
    pub cdf_precision: u32,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            mc_seed: 0x5eed_d2c0_u64,
            mc_samples: 1_000_000,
            enum_cap: 20,
            cdf_precision: 64,
        }
    }
}

/// Complete configuration of a run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub spectral: SpectralConfig,
    pub junta: JuntaConfig,
    pub count: CountConfig,
    pub regularity: RegularityConfig,
    pub moments: MomentConfig,
    pub oracle: OracleConfig,
}

impl Config {
    /// Parses a TOML document, e.g. `junta.c_alpha = 0.03125` or a
    /// `[junta]` table; unspecified fields keep their defaults.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Renders the configuration as TOML (used in run reports).
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks ranges that the rest of the pipeline relies on.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("junta.c_alpha", self.junta.c_alpha),
            ("junta.c_k", self.junta.c_k),
            ("junta.c_gamma", self.junta.c_gamma),
            ("junta.c_eta", self.junta.c_eta),
            ("count.c1", self.count.c1),
            ("count.eps_prime_cap", self.count.eps_prime_cap),
            ("count.c2", self.count.c2),
            ("regularity.c_tau", self.regularity.c_tau),
            ("regularity.c_sign", self.regularity.c_sign),
            ("regularity.c_prime", self.regularity.c_prime),
            ("regularity.alpha_const", self.regularity.alpha_const),
            ("regularity.log_const", self.regularity.log_const),
            ("regularity.eps_floor", self.regularity.eps_floor),
            (
                "regularity.leaf_gauss_share",
                self.regularity.leaf_gauss_share,
            ),
            (
                "regularity.regular_gauss_share",
                self.regularity.regular_gauss_share,
            ),
            ("moments.c_m", self.moments.c_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parse(format!(
                    "config: {name} must be positive, got {v}"
                )));
            }
        }
        if !(self.count.junta_eps_share > 0.0 && self.count.junta_eps_share < 1.0) {
            return Err(Error::Parse(
                "config: count.junta_eps_share must lie in (0,1)".into(),
            ));
        }
        if self.count.dp_cells_per_unit == 0 {
            return Err(Error::Parse(
                "config: count.dp_cells_per_unit must be >= 1".into(),
            ));
        }
        if self.oracle.enum_cap > 24 {
            return Err(Error::Parse(
                "config: oracle.enum_cap must be at most 24".into(),
            ));
        }
        if self.spectral.precision_bits < 53 {
            return Err(Error::Parse(
                "config: spectral.precision_bits must be at least 53".into(),
            ));
        }
        Ok(())
    }
}
