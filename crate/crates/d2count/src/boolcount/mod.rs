//! Hypercube counting: a decision tree that restricts high-influence
//! variables until the leaves are regular or essentially constant in sign,
//! with the Gaussian counter standing in for regular leaves.

mod count;
mod tree;

pub use count::{
    count_boolean, count_boolean_regular, leaf_gauss_eps, tree_tau, BooleanCount, BooleanCounter,
    RegularCount, ThresholdCounter,
};
pub use tree::{
    construct_tree, construct_tree_with, DecisionTree, LeafLabel, LeafRef, RegularityParams,
    TreeDump, TreeNode, TreeStats,
};
