//! Hypercube counting: the regularity tree with Gaussian counting at the
//! regular leaves, and the fast path for regular inputs.

use rayon::prelude::*;
use rug::Rational;
use serde::Serialize;

use super::tree::{construct_tree, DecisionTree, LeafLabel, LeafRef, RegularityParams, TreeStats};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::gausscount::{count_gaussian, GaussianCount};
use crate::poly::Degree2Polynomial;
use crate::util::{rat_f64, rat_pow};

fn check_eps(epsilon: &Rational) -> Result<()> {
    if *epsilon <= 0 || *epsilon >= 1 {
        return Err(Error::Precondition(format!(
            "eps must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// Tree parameter `tau = c_tau * eps^9`.
pub fn tree_tau(epsilon: &Rational, cfg: &Config) -> Rational {
    rat_f64(cfg.regularity.c_tau) * rat_pow(epsilon, 9)
}

/// Gaussian accuracy used at non-constant regular leaves.
pub fn leaf_gauss_eps(epsilon: &Rational, cfg: &Config) -> Result<Rational> {
    let e = rat_f64(cfg.regularity.leaf_gauss_share) * epsilon;
    if e >= 1 {
        return Err(Error::Precondition(format!(
            "leaf Gaussian accuracy {e} is not below 1"
        )));
    }
    Ok(e)
}

/// Contribution `Pr[p_rho >= 0]` of one leaf, before weighting.
///
/// Sign leaves contribute their label and `fail` leaves nothing.  Regular
/// leaves use the Gaussian counter; a constant leaf polynomial has the
/// exact answer `[c >= 0]`, which is what the Gaussian counter returns for
/// it, so it is read off directly.
fn leaf_value(
    leaf: &LeafRef<'_>,
    shift: &Rational,
    gauss_eps: &Rational,
    cfg: &Config,
) -> Result<Rational> {
    match leaf.label {
        LeafLabel::Plus => Ok(Rational::from(1)),
        LeafLabel::Minus | LeafLabel::Fail => Ok(Rational::new()),
        LeafLabel::Regular => {
            if leaf.poly.is_constant() {
                let c = Rational::from(leaf.poly.constant_term() - shift);
                Ok(Rational::from(u32::from(c >= 0)))
            } else {
                let q = leaf.poly.shifted(&Rational::from(-shift));
                Ok(count_gaussian(&q, gauss_eps, cfg)?.value)
            }
        }
    }
}

/// `sum_leaves 2^-depth * value(leaf)`, with the (possibly expensive) leaf
/// values computed in parallel and summed in canonical order.
fn accumulate(
    tree: &DecisionTree,
    shift: &Rational,
    gauss_eps: &Rational,
    cfg: &Config,
) -> Result<Rational> {
    let leaves = tree.leaves();
    let values: Vec<Rational> = leaves
        .par_iter()
        .map(|l| leaf_value(l, shift, gauss_eps, cfg))
        .collect::<Result<Vec<_>>>()?;
    let mut sum = Rational::new();
    for (leaf, v) in leaves.iter().zip(values) {
        if v != 0 {
            sum += v * leaf.weight();
        }
    }
    Ok(sum)
}

/// Result of [`count_boolean`].
#[derive(Clone, Debug, Serialize)]
pub struct BooleanCount {
    /// The estimate of `Pr_{x ~ {-1,1}^n}[p(x) >= 0]`.
    #[serde(with = "crate::util::serde_rational")]
    pub value: Rational,
    pub params: RegularityParams,
    /// Accuracy passed to the Gaussian counter at regular leaves.
    #[serde(with = "crate::util::serde_rational")]
    pub leaf_gauss_eps: Rational,
    pub stats: TreeStats,
    /// Total weight of the `fail` leaves.
    #[serde(with = "crate::util::serde_rational")]
    pub fail_mass: Rational,
    #[serde(skip)]
    pub tree: DecisionTree,
}

/// Hypercube counter with a fixed configuration.
#[derive(Clone, Debug, Default)]
pub struct BooleanCounter {
    pub config: Config,
}

impl BooleanCounter {
    pub fn new(config: Config) -> Self {
        Self { config }
    }

    /// See [`count_boolean`].
    pub fn count(&self, p: &Degree2Polynomial, epsilon: &Rational) -> Result<BooleanCount> {
        count_boolean(p, epsilon, &self.config)
    }

    /// See [`count_boolean_regular`].
    pub fn count_regular(&self, p: &Degree2Polynomial, epsilon: &Rational) -> Result<RegularCount> {
        count_boolean_regular(p, epsilon, &self.config)
    }
}

/// Estimates `Pr_{x ~ {-1,1}^n}[p(x) >= 0]` for a multilinear `p`.
///
/// Builds the regularity tree with `tau = c_tau eps^9`, then adds `2^-depth`
/// for every `+1` leaf and `2^-depth * Pr_{N(0,I)}[p_rho >= 0]` for every
/// regular leaf, the latter estimated by [`count_gaussian`] with accuracy
/// `leaf_gauss_share * eps`.  `-1` and `fail` leaves add nothing.
pub fn count_boolean(
    p: &Degree2Polynomial,
    epsilon: &Rational,
    cfg: &Config,
) -> Result<BooleanCount> {
    check_eps(epsilon)?;
    p.require_multilinear("count_boolean")?;
    let tau = tree_tau(epsilon, cfg);
    let gauss_eps = leaf_gauss_eps(epsilon, cfg)?;
    let tree = construct_tree(p, &tau, &cfg.regularity)?;
    let value = accumulate(&tree, &Rational::new(), &gauss_eps, cfg)?;
    Ok(BooleanCount {
        value,
        params: tree.params.clone(),
        leaf_gauss_eps: gauss_eps,
        stats: tree.stats.clone(),
        fail_mass: tree.label_mass(LeafLabel::Fail),
        tree,
    })
}

/// Result of [`count_boolean_regular`].
#[derive(Clone, Debug, Serialize)]
pub struct RegularCount {
    #[serde(with = "crate::util::serde_rational")]
    pub value: Rational,
    /// The regularity parameter `c_tau eps^9` that `p` satisfied.
    #[serde(with = "crate::util::serde_rational")]
    pub tau: Rational,
    pub gaussian: GaussianCount,
}

/// Fast path for a `c_tau eps^9`-regular multilinear `p`: the tree is a
/// single regular leaf, so the answer is
/// `count_gaussian(p, regular_gauss_share * eps)`.
///
/// Returns [`Error::Precondition`] when `p` is not regular enough; use
/// [`count_boolean`] for such inputs.
pub fn count_boolean_regular(
    p: &Degree2Polynomial,
    epsilon: &Rational,
    cfg: &Config,
) -> Result<RegularCount> {
    check_eps(epsilon)?;
    p.require_multilinear("count_boolean_regular")?;
    let tau = tree_tau(epsilon, cfg);
    if !p.is_regular(&tau)? {
        let inf = p.influences()?;
        let total = inf.iter().fold(Rational::new(), |acc, x| acc + x);
        let max = inf.iter().max().cloned().unwrap_or_default();
        return Err(Error::Precondition(format!(
            "polynomial is not {:.3e}-regular (largest influence share {:.3e}); use the general Boolean counter",
            tau.to_f64(),
            (max / total).to_f64()
        )));
    }
    let e = rat_f64(cfg.regularity.regular_gauss_share) * epsilon;
    check_eps(&e)?;
    let gaussian = count_gaussian(p, &e, cfg)?;
    Ok(RegularCount {
        value: gaussian.value.clone(),
        tau,
        gaussian,
    })
}

/// Threshold queries `Pr[p(x) >= t]` for many `t` against one tree.
///
/// Influences, regularity and critical indices ignore the constant term,
/// so the tree for `p - t` differs from the tree for `p` only through the
/// sign test of large-critical-index expansions.  When the tree of `p`
/// contains no such expansion, every `p - t` has the same tree with leaf
/// polynomials shifted by `-t`, and [`ThresholdCounter::count_at_least`]
/// returns exactly `count_boolean(p - t, eps).value` without rebuilding it.
/// Otherwise each query runs [`count_boolean`] afresh.
#[derive(Clone, Debug)]
pub struct ThresholdCounter {
    base: Degree2Polynomial,
    epsilon: Rational,
    gauss_eps: Rational,
    config: Config,
    tree: DecisionTree,
}

impl ThresholdCounter {
    pub fn new(p: &Degree2Polynomial, epsilon: &Rational, cfg: &Config) -> Result<Self> {
        check_eps(epsilon)?;
        p.require_multilinear("count_boolean")?;
        let tree = construct_tree(p, &tree_tau(epsilon, cfg), &cfg.regularity)?;
        Ok(Self {
            base: p.clone(),
            epsilon: epsilon.clone(),
            gauss_eps: leaf_gauss_eps(epsilon, cfg)?,
            config: cfg.clone(),
            tree,
        })
    }

    /// Whether queries reuse the tree of `p`.
    pub fn shift_invariant(&self) -> bool {
        self.tree.stats.large_index_expansions == 0
    }

    pub fn tree(&self) -> &DecisionTree {
        &self.tree
    }

    /// The estimate `count_boolean(p - t, eps).value` of `Pr[p(x) >= t]`.
    pub fn count_at_least(&self, t: &Rational) -> Result<Rational> {
        if self.shift_invariant() {
            accumulate(&self.tree, t, &self.gauss_eps, &self.config)
        } else {
            Ok(count_boolean(
                &self.base.shifted(&Rational::from(-t)),
                &self.epsilon,
                &self.config,
            )?
            .value)
        }
    }

    /// When the tree is shift-invariant and every leaf is constant, the
    /// estimate for every threshold is the exact law of `p`: the leaf
    /// constants with their weights `2^-depth`, in canonical order.
    pub fn constant_law(&self) -> Option<Vec<(Rational, Rational)>> {
        if !self.shift_invariant() {
            return None;
        }
        let leaves = self.tree.leaves();
        if leaves
            .iter()
            .any(|l| l.label != LeafLabel::Regular || !l.poly.is_constant())
        {
            return None;
        }
        Some(
            leaves
                .iter()
                .map(|l| (l.poly.constant_term().clone(), l.weight()))
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::brute_force_boolean;
    use crate::poly::{graph_cut_poly, Graph};

    fn eps(a: i64, b: i64) -> Rational {
        Rational::from((a, b))
    }

    #[test]
    fn odd_linear_form_is_half() {
        let mut p = Degree2Polynomial::new_multilinear(3);
        for i in 0..3 {
            p.add_lin(i, Rational::from(1)).unwrap();
        }
        let v = count_boolean(&p, &eps(1, 10), &Config::default())
            .unwrap()
            .value;
        assert!((v.to_f64() - 0.5).abs() <= 0.1);
    }

    #[test]
    fn triangle_cut_at_least_two() {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let p = graph_cut_poly(&g)
            .scaled(&Rational::from(2))
            .shifted(&Rational::from(-4));
        let v = count_boolean(&p, &eps(1, 10), &Config::default())
            .unwrap()
            .value;
        assert!((v.to_f64() - 0.75).abs() <= 0.1, "{v}");
    }

    #[test]
    fn matches_enumeration_on_small_input() {
        let mut p = Degree2Polynomial::new_multilinear(6);
        p.add_quad(0, 1, Rational::from(3)).unwrap();
        p.add_quad(2, 5, Rational::from(-2)).unwrap();
        p.add_quad(3, 4, Rational::from(1)).unwrap();
        p.add_lin(0, Rational::from(2)).unwrap();
        p.add_constant(Rational::from(-1));
        let v = count_boolean(&p, &eps(3, 20), &Config::default())
            .unwrap()
            .value;
        let exact = brute_force_boolean(&p, 20, |v| *v >= 0).unwrap();
        assert!(Rational::from(&v - &exact).abs() <= eps(3, 20));
    }

    #[test]
    fn regular_fast_path() {
        let mut p = Degree2Polynomial::new_multilinear(100);
        for i in 0..100 {
            p.add_lin(i, Rational::from(1)).unwrap();
        }
        let r = count_boolean_regular(&p, &eps(3, 5), &Config::default()).unwrap();
        assert!((r.value.to_f64() - 0.5).abs() <= 0.6);
        let mut q = Degree2Polynomial::new_multilinear(2);
        q.add_lin(0, Rational::from(1)).unwrap();
        assert!(matches!(
            count_boolean_regular(&q, &eps(1, 10), &Config::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn threshold_counter_matches_fresh_counts() {
        let mut p = Degree2Polynomial::new_multilinear(5);
        p.add_quad(0, 1, Rational::from(2)).unwrap();
        p.add_quad(1, 4, Rational::from(-1)).unwrap();
        p.add_lin(3, Rational::from(3)).unwrap();
        let cfg = Config::default();
        let tc = ThresholdCounter::new(&p, &eps(1, 10), &cfg).unwrap();
        assert!(tc.shift_invariant());
        for t in -7..=7 {
            let t = Rational::from(t);
            let fresh = count_boolean(&p.shifted(&Rational::from(-&t)), &eps(1, 10), &cfg)
                .unwrap()
                .value;
            assert_eq!(tc.count_at_least(&t).unwrap(), fresh);
        }
        assert!(tc.constant_law().is_some());
    }
}
