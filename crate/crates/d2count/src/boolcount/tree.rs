//! The regularity decision tree: restrict high-influence variables until
//! every leaf is regular, nearly constant in sign, or too deep.

use rug::ops::Pow;
use rug::{Float, Rational};
use serde::{Deserialize, Serialize};

use crate::config::RegularityConfig;
use crate::decouple::{critical_index, CriticalIndexInput};
use crate::error::{Error, Result};
use crate::poly::{poly_digest, Degree2Polynomial, Restriction};
use crate::util::{float_to_rational, rat_f64, rat_pow};

/// Working precision for the transcendental parameter formulas.
const PARAM_PREC: u32 = 128;
/// Degree of the polynomials handled by the tree.
const DEGREE: u32 = 2;

/// Parameters of the tree construction for degree `d = 2`.
///
/// With `L = ln(1/tau)`: `tau~` solves
/// `tau = tau~ (C' d ln d ln(1/tau~))^d` (clamped to `tau` when the factor
/// is below one), `alpha = alpha_const (d ln max(1, L) + d ln d)`, the
/// large-critical-index expansion depth is `ceil(alpha / tau~)`,
/// `t* = 1/(2 C^d)`, and the depth cap is `floor((1/tau) (d L)^e)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegularityParams {
    #[serde(with = "crate::util::serde_rational")]
    pub tau: Rational,
    /// Failure-probability parameter, equal to `tau`.
    #[serde(with = "crate::util::serde_rational")]
    pub beta: Rational,
    #[serde(with = "crate::util::serde_rational")]
    pub tau_tilde: Rational,
    #[serde(with = "crate::util::serde_rational")]
    pub alpha: Rational,
    /// `ceil(alpha / tau~)`: critical indices at least this large trigger
    /// an expansion of exactly this depth followed by the sign test.
    pub expansion_depth: u64,
    #[serde(with = "crate::util::serde_rational")]
    pub t_star: Rational,
    /// Square of the tail-norm bound `t* (log_const ln(1/beta))^(-d/2)`.
    #[serde(with = "crate::util::serde_rational")]
    pub tail_norm_sq_bound: Rational,
    /// Nodes deeper than this become `fail` leaves.
    pub depth_cap: u64,
}

fn sat_u64(x: &Float) -> u64 {
    if x.is_nan() || *x <= 0 {
        0
    } else if *x >= u64::MAX {
        u64::MAX
    } else {
        x.to_integer().and_then(|i| i.to_u64()).unwrap_or(u64::MAX)
    }
}

impl RegularityParams {
    /// Derives every parameter from `tau` and the configured constants.
    pub fn new(tau: &Rational, cfg: &RegularityConfig) -> Result<Self> {
        if *tau <= 0 || *tau >= 1 {
            return Err(Error::Precondition(format!(
                "tau must lie in (0, 1), got {tau}"
            )));
        }
        let f = |x: f64| Float::with_val(PARAM_PREC, x);
        let d = f(f64::from(DEGREE));
        let ln_d = Float::with_val(PARAM_PREC, d.ln_ref());
        let l = Float::with_val(
            PARAM_PREC,
            Float::with_val(PARAM_PREC, tau).recip().ln_ref(),
        );

        // tau~ = exp(-u) with h(u) = d ln(c u) - u - ln(tau) = 0; h decreases
        // for u > d, and h(L) >= 0 whenever c L >= 1.
        let c = Float::with_val(PARAM_PREC, f(cfg.c_prime) * &d) * &ln_d;
        let h = |u: &Float| -> Float {
            let cu = Float::with_val(PARAM_PREC, &c * u);
            Float::with_val(PARAM_PREC, cu.ln() * &d) - u + &l
        };
        let tau_tilde = if Float::with_val(PARAM_PREC, &c * &l) < 1 {
            tau.clone()
        } else {
            let mut lo = if l > d { l.clone() } else { d.clone() };
            if h(&lo) < 0 {
                lo = l.clone();
            }
            let mut hi = Float::with_val(PARAM_PREC, &lo * 2u32) + 1u32;
            while h(&hi) >= 0 {
                hi *= 2u32;
            }
            for _ in 0..PARAM_PREC {
                let mid = Float::with_val(PARAM_PREC, &lo + &hi) / 2u32;
                if h(&mid) >= 0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t = float_to_rational(&Float::with_val(PARAM_PREC, -hi).exp());
            if t > *tau {
                tau.clone()
            } else {
                t
            }
        };
        if tau_tilde <= 0 {
            return Err(Error::Feasibility(format!(
                "tau = {tau} is too small for the tree parameters"
            )));
        }

        let lnln = if l > 1 {
            Float::with_val(PARAM_PREC, l.ln_ref())
        } else {
            f(0.0)
        };
        let alpha_f = f(cfg.alpha_const)
            * (Float::with_val(PARAM_PREC, &d * &lnln) + Float::with_val(PARAM_PREC, &d * &ln_d));
        let alpha = float_to_rational(&alpha_f);
        let ratio = Float::with_val(
            PARAM_PREC,
            &alpha_f / Float::with_val(PARAM_PREC, &tau_tilde),
        );
        let expansion_depth = sat_u64(&ratio.ceil()).max(1);

        let t_star = (rat_pow(&rat_f64(cfg.c_sign), DEGREE) * 2u32).recip();
        let log_factor = f(cfg.log_const) * &l;
        let tail = Float::with_val(PARAM_PREC, (&log_factor).pow(DEGREE)).recip();
        let tail_norm_sq_bound = float_to_rational(&tail) * Rational::from(t_star.square_ref());

        let depth_base = Float::with_val(PARAM_PREC, &d * &l);
        let depth_factor = Float::with_val(PARAM_PREC, (&depth_base).pow(cfg.depth_exponent));
        let cap = Float::with_val(
            PARAM_PREC,
            &depth_factor * Float::with_val(PARAM_PREC, tau).recip(),
        );
        let depth_cap = sat_u64(&cap.floor()).max(1);

        Ok(Self {
            tau: tau.clone(),
            beta: tau.clone(),
            tau_tilde,
            alpha,
            expansion_depth,
            t_star,
            tail_norm_sq_bound,
            depth_cap,
        })
    }
}

/// Label of a tree leaf.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LeafLabel {
    /// `sign(p_rho) = +1` except on a `tau` fraction of the subcube.
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
    /// The depth cap was exceeded.
    #[serde(rename = "fail")]
    Fail,
    /// `p_rho` is `tau`-regular.
    #[serde(rename = "regular")]
    Regular,
}

/// A node of a [`DecisionTree`].  Internal nodes branch on `x_var`; the
/// `minus` child has `x_var = -1`, the `plus` child `x_var = +1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Internal {
        var: usize,
        minus: usize,
        plus: usize,
    },
    Leaf {
        label: LeafLabel,
        depth: usize,
        poly: Degree2Polynomial,
    },
}

/// Counts describing a tree.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeStats {
    pub internal_nodes: usize,
    pub leaves: usize,
    pub plus_leaves: usize,
    pub minus_leaves: usize,
    pub fail_leaves: usize,
    pub regular_leaves: usize,
    pub max_depth: usize,
    /// Expansions taken because the critical index reached
    /// `expansion_depth` (the only place the sign test runs).
    pub large_index_expansions: usize,
    pub small_index_expansions: usize,
}

/// A leaf visited by [`DecisionTree::leaves`].
#[derive(Clone, Copy, Debug)]
pub struct LeafRef<'a> {
    pub label: LeafLabel,
    pub depth: usize,
    pub poly: &'a Degree2Polynomial,
}

impl LeafRef<'_> {
    /// `2^-depth`, the probability that a uniform input reaches the leaf.
    pub fn weight(&self) -> Rational {
        Rational::from((1u32, rug::Integer::from(1) << self.depth as u32))
    }
}

/// Debug view of a tree: internal nodes show their variable (1-based),
/// leaves their label, depth and polynomial digest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeDump {
    Internal {
        var: usize,
        minus: Box<TreeDump>,
        plus: Box<TreeDump>,
    },
    Leaf {
        label: LeafLabel,
        depth: usize,
        digest: String,
        terms: usize,
    },
}

/// Decision tree over hypercube variables whose leaves carry the
/// restricted polynomial and a [`LeafLabel`].
///
/// Every input `x` reaches exactly one leaf, and the leaf polynomial agrees
/// with `p` on `x`.  Nodes live in an arena; traversal order (minus child
/// first) is the canonical leaf order used for all accumulations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub params: RegularityParams,
    nodes: Vec<TreeNode>,
    root: usize,
    pub stats: TreeStats,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Leaves in canonical (left-to-right, minus before plus) order.
    pub fn leaves(&self) -> Vec<LeafRef<'_>> {
        let mut out = Vec::with_capacity(self.stats.leaves);
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            match &self.nodes[id] {
                TreeNode::Internal { minus, plus, .. } => {
                    stack.push(*plus);
                    stack.push(*minus);
                }
                TreeNode::Leaf { label, depth, poly } => out.push(LeafRef {
                    label: *label,
                    depth: *depth,
                    poly,
                }),
            }
        }
        out
    }

    /// Leaves in canonical order together with the restriction leading to
    /// each of them.
    pub fn leaf_paths(&self) -> Vec<(Restriction, LeafRef<'_>)> {
        let mut out = Vec::with_capacity(self.stats.leaves);
        let mut stack = vec![(self.root, Restriction::new())];
        while let Some((id, rho)) = stack.pop() {
            match &self.nodes[id] {
                TreeNode::Internal { var, minus, plus } => {
                    let mut r_plus = rho.clone();
                    r_plus.assignments.insert(*var, 1);
                    let mut r_minus = rho;
                    r_minus.assignments.insert(*var, -1);
                    stack.push((*plus, r_plus));
                    stack.push((*minus, r_minus));
                }
                TreeNode::Leaf { label, depth, poly } => {
                    out.push((
                        rho,
                        LeafRef {
                            label: *label,
                            depth: *depth,
                            poly,
                        },
                    ));
                }
            }
        }
        out
    }

    /// The leaf reached by `x in {-1,1}^n`.
    pub fn leaf_for(&self, x: &[i8]) -> LeafRef<'_> {
        let mut id = self.root;
        loop {
            match &self.nodes[id] {
                TreeNode::Internal { var, minus, plus } => {
                    id = if x[*var] > 0 { *plus } else { *minus }
                }
                TreeNode::Leaf { label, depth, poly } => {
                    return LeafRef {
                        label: *label,
                        depth: *depth,
                        poly,
                    }
                }
            }
        }
    }

    /// Total weight `sum 2^-depth` of leaves with the given label.
    pub fn label_mass(&self, label: LeafLabel) -> Rational {
        self.leaves()
            .iter()
            .filter(|l| l.label == label)
            .fold(Rational::new(), |acc, l| acc + l.weight())
    }

    /// `sum_leaves 2^-depth` (exactly one for a well-formed tree).
    pub fn total_mass(&self) -> Rational {
        self.leaves()
            .iter()
            .fold(Rational::new(), |acc, l| acc + l.weight())
    }

    pub fn dump(&self) -> TreeDump {
        self.dump_node(self.root)
    }

    fn dump_node(&self, id: usize) -> TreeDump {
        match &self.nodes[id] {
            TreeNode::Internal { var, minus, plus } => TreeDump::Internal {
                var: var + 1,
                minus: Box::new(self.dump_node(*minus)),
                plus: Box::new(self.dump_node(*plus)),
            },
            TreeNode::Leaf { label, depth, poly } => TreeDump::Leaf {
                label: *label,
                depth: *depth,
                digest: poly_digest(poly),
                terms: poly.num_terms(),
            },
        }
    }
}

/// Builds the regularity tree for a multilinear `p` with tree parameter
/// `tau` and the configured constants.
pub fn construct_tree(
    p: &Degree2Polynomial,
    tau: &Rational,
    cfg: &RegularityConfig,
) -> Result<DecisionTree> {
    construct_tree_with(p, RegularityParams::new(tau, cfg)?, cfg.leaf_budget)
}

/// Builds the regularity tree with explicit parameters.
///
/// Each pending node `rho` at depth `d_rho` is processed as follows.
///
/// 1. If `d_rho` exceeds the depth cap, it becomes a `fail` leaf.
/// 2. Variables are sorted by decreasing influence in `p_rho` (ties by
///    lower index).  If the largest influence is at most `tau` times the
///    total, `rho` becomes a `regular` leaf.
/// 3. Otherwise let `ci` be the `tau`-critical index of the sorted
///    influences.  If `ci >= expansion_depth`, the `expansion_depth`
///    highest-influence variables `H` are fixed in every possible way.  A
///    child `rho'` becomes a sign leaf labelled `sign(p_rho'(0))` when
///    `p_rho'(0)^2 >= t*^2 N` and `||p_rho' - p_rho'(0)||^2 <= bound N`,
///    where `N = ||p_rho - p_rho(0)||^2` normalizes the parent; the
///    constant of `p_rho'` is the truncation of `p_rho` to `H` evaluated
///    at `rho'`, and the rest is the tail polynomial on the free variables.
///    Other children are processed in turn.
/// 4. If `ci < expansion_depth`, the first `ci` variables are fixed in
///    every possible way and each child is processed.
///
/// Fails with [`Error::Feasibility`] when the tree would exceed
/// `leaf_budget` leaves.
pub fn construct_tree_with(
    p: &Degree2Polynomial,
    params: RegularityParams,
    leaf_budget: u64,
) -> Result<DecisionTree> {
    p.require_multilinear("construct_tree")?;
    let mut b = Builder {
        params: &params,
        nodes: Vec::new(),
        stats: TreeStats::default(),
        pending_leaves: 1,
        budget: leaf_budget,
    };
    let root = b.process(p.clone(), 0)?;
    let Builder { nodes, stats, .. } = b;
    Ok(DecisionTree {
        params,
        nodes,
        root,
        stats,
    })
}

struct Builder<'a> {
    params: &'a RegularityParams,
    nodes: Vec<TreeNode>,
    stats: TreeStats,
    /// Leaves of the partial tree (finished or pending).
    pending_leaves: u64,
    budget: u64,
}

/// Threshold test of the large-critical-index branch, normalized by the
/// parent's non-constant mass.
struct SignTest {
    norm_sq: Rational,
}

impl Builder<'_> {
    fn leaf(&mut self, label: LeafLabel, depth: usize, poly: Degree2Polynomial) -> usize {
        self.stats.leaves += 1;
        self.stats.max_depth = self.stats.max_depth.max(depth);
        match label {
            LeafLabel::Plus => self.stats.plus_leaves += 1,
            LeafLabel::Minus => self.stats.minus_leaves += 1,
            LeafLabel::Fail => self.stats.fail_leaves += 1,
            LeafLabel::Regular => self.stats.regular_leaves += 1,
        }
        self.nodes.push(TreeNode::Leaf { label, depth, poly });
        self.nodes.len() - 1
    }

    fn process(&mut self, p: Degree2Polynomial, depth: usize) -> Result<usize> {
        if depth as u64 > self.params.depth_cap {
            return Ok(self.leaf(LeafLabel::Fail, depth, p));
        }
        let inf = p.influences()?;
        let mut order: Vec<usize> = (0..p.n()).collect();
        order.sort_by(|&a, &b| inf[b].cmp(&inf[a]).then(a.cmp(&b)));
        let total = inf.iter().fold(Rational::new(), |acc, x| acc + x);
        let top = order.first().map(|&i| inf[i].clone()).unwrap_or_default();
        if top <= Rational::from(&self.params.tau * &total) {
            return Ok(self.leaf(LeafLabel::Regular, depth, p));
        }
        let nonzero = order.iter().take_while(|&&i| inf[i] != 0).count();
        let main: Vec<Rational> = order.iter().map(|&i| inf[i].clone()).collect();
        let input =
            CriticalIndexInput::new(main, vec![Rational::new(); p.n()], self.params.tau.clone())?;
        // An infinite critical index means every influential variable is
        // critical.
        let ci = critical_index(&input).unwrap_or(nonzero);
        let (fixed, sign) = if ci as u64 >= self.params.expansion_depth {
            self.stats.large_index_expansions += 1;
            let h = (self.params.expansion_depth as usize).min(nonzero);
            (h, Some(SignTest { norm_sq: p.ss() }))
        } else {
            self.stats.small_index_expansions += 1;
            (ci, None)
        };
        if fixed >= 63 || self.pending_leaves - 1 + (1u64 << fixed) > self.budget {
            return Err(Error::Feasibility(format!(
                "regularity tree would exceed the leaf budget of {} (expanding {fixed} variables at depth {depth})",
                self.budget
            )));
        }
        self.pending_leaves += (1u64 << fixed) - 1;
        self.expand(p, &order[..fixed], depth, sign.as_ref())
    }

    fn expand(
        &mut self,
        p: Degree2Polynomial,
        vars: &[usize],
        depth: usize,
        sign: Option<&SignTest>,
    ) -> Result<usize> {
        let Some((&var, rest)) = vars.split_first() else {
            return self.child(p, depth, sign);
        };
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Internal {
            var,
            minus: usize::MAX,
            plus: usize::MAX,
        });
        self.stats.internal_nodes += 1;
        let mut ids = [0usize; 2];
        for (slot, value) in [-1i8, 1].into_iter().enumerate() {
            let mut rho = Restriction::new();
            rho.set(var, value)?;
            let child = p.restrict(&rho)?;
            ids[slot] = self.expand(child, rest, depth + 1, sign)?;
        }
        self.nodes[id] = TreeNode::Internal {
            var,
            minus: ids[0],
            plus: ids[1],
        };
        Ok(id)
    }

    fn child(
        &mut self,
        p: Degree2Polynomial,
        depth: usize,
        sign: Option<&SignTest>,
    ) -> Result<usize> {
        if let Some(test) = sign {
            let c = p.constant_term();
            let head_sq = Rational::from(c.square_ref());
            let t_sq = Rational::from(self.params.t_star.square_ref());
            let big_head = *c != 0 && head_sq >= Rational::from(&t_sq * &test.norm_sq);
            if big_head && p.ss() <= Rational::from(&self.params.tail_norm_sq_bound * &test.norm_sq)
            {
                let label = if *c > 0 {
                    LeafLabel::Plus
                } else {
                    LeafLabel::Minus
                };
                return Ok(self.leaf(label, depth, p));
            }
        }
        self.process(p, depth)
    }
}
