//! Bagged ensembles of the CART trees.
//!
//! Tree `t` of a forest seeded with `s` uses its own ChaCha8 generator
//! seeded `s + t` (wrapping), drawing first the bootstrap sample and then
//! the per-node feature subsets in depth-first node order. Every tree is
//! therefore reproducible in isolation, and the ensemble is independent of
//! fitting order or thread scheduling.
//!
//! With bootstrap off and all features in play a tree consumes no
//! randomness at all, so a single-tree forest in that configuration equals
//! the plain decision tree bit for bit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::{ByteMat, Mat};
use crate::scalar::Real;

use super::tree::{
    build_tree, mean_values, vote_labels, DevianceScorer, FittedTree, GiniScorer, TreeParams,
    N_CLASSES,
};

/// How many features each node examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeatureMode {
    /// Every feature (no sampling, no randomness).
    All,
    /// `ceil(sqrt(F))`, the classification default.
    SqrtTotal,
    /// `max(1, floor(F / 3))`, the regression default.
    ThirdTotal,
}

impl FeatureMode {
    pub fn count(self, total: usize) -> usize {
        match self {
            FeatureMode::All => total,
            FeatureMode::SqrtTotal => (total as f64).sqrt().ceil() as usize,
            FeatureMode::ThirdTotal => (total / 3).max(1),
        }
    }
}

/// Ensemble shape and per-tree growth limits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Resample the training set with replacement per tree.
    pub bootstrap: bool,
    pub feature_mode: FeatureMode,
    pub tree: TreeParams,
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_trees == 0 {
            return Err("a forest needs at least one tree".to_string());
        }
        self.tree.validate()
    }

    /// The classification default: 100 bootstrapped trees, sqrt features.
    pub fn classification_default() -> Self {
        ForestParams {
            n_trees: 100,
            bootstrap: true,
            feature_mode: FeatureMode::SqrtTotal,
            tree: TreeParams::default(),
        }
    }

    /// The regression default: 100 bootstrapped trees, F/3 features.
    pub fn regression_default() -> Self {
        ForestParams {
            n_trees: 100,
            bootstrap: true,
            feature_mode: FeatureMode::ThirdTotal,
            tree: TreeParams::default(),
        }
    }
}

/// Draw `n` sample ids with replacement, or the identity when bootstrap is
/// off (consuming no randomness).
fn draw_members(n: usize, bootstrap: bool, rng: &mut Option<ChaCha8Rng>) -> Vec<u32> {
    if !bootstrap {
        return (0..n as u32).collect();
    }
    let rng = rng.as_mut().expect("bootstrap requires a seeded generator");
    (0..n).map(|_| rng.gen_range(0..n) as u32).collect()
}

fn tree_rng(
    params: &ForestParams,
    n_features: usize,
    seed: u64,
    index: usize,
) -> Option<ChaCha8Rng> {
    let needs_rng = params.bootstrap || params.feature_mode.count(n_features) < n_features;
    needs_rng.then(|| ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64)))
}

/// Fit a forest on label targets.
pub(crate) fn fit_label_forest<T: Real>(
    x: &Mat<T>,
    labels: &ByteMat,
    params: &ForestParams,
    seed: u64,
) -> Vec<FittedTree<T>> {
    let m = params.feature_mode.count(x.cols());
    (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params, x.cols(), seed, t);
            let members = draw_members(x.rows(), params.bootstrap, &mut rng);
            let mut scorer = GiniScorer::new(labels);
            build_tree(x, &mut scorer, &params.tree, members, m, &mut rng)
        })
        .collect()
}

/// Fit a forest on real targets.
pub(crate) fn fit_value_forest<T: Real>(
    x: &Mat<T>,
    values: &Mat<T>,
    params: &ForestParams,
    seed: u64,
) -> Vec<FittedTree<T>> {
    let m = params.feature_mode.count(x.cols());
    (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_rng(params, x.cols(), seed, t);
            let members = draw_members(x.rows(), params.bootstrap, &mut rng);
            let mut scorer = DevianceScorer::new(values);
            build_tree(x, &mut scorer, &params.tree, members, m, &mut rng)
        })
        .collect()
}

/// Majority vote across trees: each tree votes its leaf's majority label
/// per output, and across-tree ties resolve to the lowest class.
pub(crate) fn predict_label_forest<T: Real>(
    trees: &[FittedTree<T>],
    labels: &ByteMat,
    features: &[T],
    out: &mut [u8],
) {
    let mut counts = vec![[0u32; N_CLASSES]; out.len()];
    let mut tree_vote = vec![0u8; out.len()];
    for tree in trees {
        vote_labels(labels, tree.leaf_members(features), &mut tree_vote);
        for (c, &v) in counts.iter_mut().zip(&tree_vote) {
            c[v as usize] += 1;
        }
    }
    for (o, c) in counts.iter().enumerate() {
        let mut best = 0;
        for k in 1..N_CLASSES {
            if c[k] > c[best] {
                best = k;
            }
        }
        out[o] = best as u8;
    }
}

/// Mean of the per-tree leaf means, accumulated in tree-index order.
pub(crate) fn predict_value_forest<T: Real>(
    trees: &[FittedTree<T>],
    values: &Mat<T>,
    features: &[T],
    out: &mut [T],
) {
    out.fill(T::zero());
    let mut leaf = vec![T::zero(); out.len()];
    for tree in trees {
        mean_values(values, tree.leaf_members(features), &mut leaf);
        for (acc, &v) in out.iter_mut().zip(&leaf) {
            *acc += v;
        }
    }
    let inv = T::one() / T::from_usize(trees.len()).expect("tree count fits scalar");
    for acc in out.iter_mut() {
        *acc *= inv;
    }
}
