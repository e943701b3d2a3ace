//! Exact CART construction shared by the tree and forest estimators.
//!
//! Trees split on midpoint thresholds between consecutive distinct feature
//! values, scored by summed per-output impurity (Gini for labels, deviance
//! for real targets). Candidate evaluation is incremental: walking the
//! samples of a node in feature order moves one sample from the right
//! partition to the left in O(#outputs) aggregate updates, so scoring every
//! candidate threshold of a feature costs one sorted sweep.
//!
//! Outputs that are constant within a node contribute exactly zero impurity
//! to every candidate, so each node tracks its varying-output set (a subset
//! of its parent's) and the sweeps touch only those outputs. This is a pure
//! optimization: scores are identical to the full sums.
//!
//! Leaves store the training-sample ids that reached them rather than
//! per-output aggregate arrays; predictions re-aggregate (majority vote or
//! mean) over those members at query time. With wide multi-output targets
//! this keeps a fitted tree small, and a leaf holding a single sample
//! reproduces that sample's targets exactly.
//!
//! Ties are deterministic everywhere: equal split scores keep the first
//! candidate in (ascending feature, ascending threshold) order, equal
//! feature values sort by sample id, and equal votes pick the smallest
//! class.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{ByteMat, Mat};
use crate::scalar::Real;

/// Number of pixel classes.
pub const N_CLASSES: usize = 3;

/// Growth limits for a single tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Maximum split depth (root at depth 0); `None` grows until pure.
    pub max_depth: Option<usize>,
    /// Minimum samples each side of a split must keep.
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.min_samples_leaf == 0 {
            return Err("min_samples_leaf must be >= 1".to_string());
        }
        if self.max_depth == Some(0) {
            return Err("max_depth must be >= 1 when set".to_string());
        }
        Ok(())
    }
}

/// One node of a fitted tree. Children are vector indices; the root is
/// node 0 and a parent always precedes its children (depth-first, left
/// subtree complete before the right).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node<T> {
    Split {
        feature: u32,
        threshold: T,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Training-sample ids that reached this leaf (bootstrap may repeat
        /// an id).
        members: Vec<u32>,
    },
}

/// A fitted decision tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedTree<T> {
    pub nodes: Vec<Node<T>>,
}

impl<T: Real> FittedTree<T> {
    /// Members of the leaf a feature vector falls into.
    pub fn leaf_members(&self, features: &[T]) -> &[u32] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[*feature as usize] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                Node::Leaf { members } => return members,
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn walk<T>(nodes: &[Node<T>], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Incremental impurity bookkeeping for one node.
///
/// Protocol per node: `reset_node` (establishing the varying-output set as
/// a subset of the parent's), then per candidate feature `begin_feature`
/// followed by `move_left` per sample in ascending feature order, querying
/// `score` at valid cut positions.
pub(crate) trait SplitScorer {
    /// Recompute node aggregates over `members`, restricted to
    /// `parent_varying` (all outputs when `None`).
    fn reset_node(&mut self, members: &[u32], parent_varying: Option<&[u32]>);
    /// Outputs that still vary inside this node.
    fn varying(&self) -> &[u32];
    /// True when every output is constant within the node.
    fn node_is_pure(&self) -> bool {
        self.varying().is_empty()
    }
    /// Start a fresh left/right sweep: left empty, right = whole node.
    fn begin_feature(&mut self);
    /// Move one sample from the right partition to the left.
    fn move_left(&mut self, sample: u32);
    /// Summed impurity of the current partition (lower is better).
    fn score(&self) -> f64;
}

/// Gini impurity over multi-output labels.
///
/// For counts `c_k` of a partition of size `m`, the contribution of one
/// output is `m · (1 - Σ (c_k/m)²) = m - (Σ c_k²)/m`; the score sums this
/// over both partitions and all varying outputs. The squared-count sums are
/// held as integers and updated in O(1) per output per move.
pub(crate) struct GiniScorer<'a> {
    labels: &'a ByteMat,
    varying: Vec<u32>,
    /// Class counts per varying output, `3 * varying.len()` entries.
    counts_node: Vec<u32>,
    counts_left: Vec<u32>,
    counts_right: Vec<u32>,
    sq_left: u64,
    sq_right: u64,
    n_node: usize,
    n_left: usize,
    n_right: usize,
}

impl<'a> GiniScorer<'a> {
    pub(crate) fn new(labels: &'a ByteMat) -> Self {
        GiniScorer {
            labels,
            varying: Vec::new(),
            counts_node: Vec::new(),
            counts_left: Vec::new(),
            counts_right: Vec::new(),
            sq_left: 0,
            sq_right: 0,
            n_node: 0,
            n_left: 0,
            n_right: 0,
        }
    }
}

impl SplitScorer for GiniScorer<'_> {
    fn reset_node(&mut self, members: &[u32], parent_varying: Option<&[u32]>) {
        let all: Vec<u32>;
        let candidates: &[u32] = match parent_varying {
            Some(v) => v,
            None => {
                all = (0..self.labels.cols() as u32).collect();
                &all
            }
        };
        self.n_node = members.len();
        let n = members.len() as u32;

        // Count classes for every candidate output, then keep the outputs
        // where no single class holds the whole node.
        let mut counts = vec![0u32; candidates.len() * N_CLASSES];
        for &s in members {
            let row = self.labels.row(s as usize);
            for (ci, &o) in candidates.iter().enumerate() {
                counts[ci * N_CLASSES + row[o as usize] as usize] += 1;
            }
        }
        self.varying.clear();
        self.counts_node.clear();
        for (ci, &o) in candidates.iter().enumerate() {
            let slot = &counts[ci * N_CLASSES..(ci + 1) * N_CLASSES];
            if slot.iter().all(|&c| c < n) {
                self.varying.push(o);
                self.counts_node.extend_from_slice(slot);
            }
        }
        self.counts_left.resize(self.counts_node.len(), 0);
        self.counts_right.resize(self.counts_node.len(), 0);
    }

    fn varying(&self) -> &[u32] {
        &self.varying
    }

    fn begin_feature(&mut self) {
        self.counts_left.fill(0);
        self.counts_right.copy_from_slice(&self.counts_node);
        self.sq_left = 0;
        self.sq_right = self
            .counts_node
            .iter()
            .map(|&c| (c as u64) * (c as u64))
            .sum();
        self.n_left = 0;
        self.n_right = self.n_node;
    }

    fn move_left(&mut self, sample: u32) {
        let row = self.labels.row(sample as usize);
        for (vi, &o) in self.varying.iter().enumerate() {
            let idx = vi * N_CLASSES + row[o as usize] as usize;
            let cl = self.counts_left[idx] as u64;
            self.sq_left += 2 * cl + 1;
            self.counts_left[idx] += 1;
            let cr = self.counts_right[idx] as u64;
            self.sq_right -= 2 * cr - 1;
            self.counts_right[idx] -= 1;
        }
        self.n_left += 1;
        self.n_right -= 1;
    }

    fn score(&self) -> f64 {
        let v = self.varying.len() as f64;
        let nl = self.n_left as f64;
        let nr = self.n_right as f64;
        (nl * v - self.sq_left as f64 / nl) + (nr * v - self.sq_right as f64 / nr)
    }
}

/// Summed squared deviance over multi-output real targets.
///
/// The contribution of one output to a partition of size `m` with value sum
/// `s` and squared sum `q` is `q - s²/m` (total squared deviation from the
/// partition mean); aggregates are updated in O(1) per output per move.
pub(crate) struct DevianceScorer<'a, T> {
    values: &'a Mat<T>,
    varying: Vec<u32>,
    sums_node: Vec<f64>,
    sums_left: Vec<f64>,
    sums_right: Vec<f64>,
    /// Σ over varying outputs of squared value sums.
    usq_left: f64,
    usq_right: f64,
    /// Σ over members and varying outputs of squared values.
    q_node: f64,
    q_left: f64,
    q_right: f64,
    /// Per-sample Σ over varying outputs of squared values, indexed by
    /// sample id.
    row_sq: Vec<f64>,
    n_node: usize,
    n_left: usize,
    n_right: usize,
    usq_node: f64,
}

impl<'a, T: Real> DevianceScorer<'a, T> {
    pub(crate) fn new(values: &'a Mat<T>) -> Self {
        DevianceScorer {
            values,
            varying: Vec::new(),
            sums_node: Vec::new(),
            sums_left: Vec::new(),
            sums_right: Vec::new(),
            usq_left: 0.0,
            usq_right: 0.0,
            q_node: 0.0,
            q_left: 0.0,
            q_right: 0.0,
            row_sq: vec![0.0; values.rows()],
            n_node: 0,
            n_left: 0,
            n_right: 0,
            usq_node: 0.0,
        }
    }

    #[inline]
    fn value(&self, sample: u32, output: u32) -> f64 {
        self.values
            .at(sample as usize, output as usize)
            .to_f64()
            .expect("target value fits f64")
    }
}

impl<T: Real> SplitScorer for DevianceScorer<'_, T> {
    fn reset_node(&mut self, members: &[u32], parent_varying: Option<&[u32]>) {
        let all: Vec<u32>;
        let candidates: &[u32] = match parent_varying {
            Some(v) => v,
            None => {
                all = (0..self.values.cols() as u32).collect();
                &all
            }
        };
        self.n_node = members.len();

        // An output varies when its members take at least two distinct
        // values; constant outputs add exactly zero deviance everywhere.
        let m = candidates.len();
        let mut mins = vec![f64::INFINITY; m];
        let mut maxs = vec![f64::NEG_INFINITY; m];
        let mut sums = vec![0.0f64; m];
        for &s in members {
            for (ci, &o) in candidates.iter().enumerate() {
                let y = self.value(s, o);
                mins[ci] = mins[ci].min(y);
                maxs[ci] = maxs[ci].max(y);
                sums[ci] += y;
            }
        }
        self.varying.clear();
        self.sums_node.clear();
        for ci in 0..m {
            if mins[ci] < maxs[ci] {
                self.varying.push(candidates[ci]);
                self.sums_node.push(sums[ci]);
            }
        }
        self.sums_left.resize(self.varying.len(), 0.0);
        self.sums_right.resize(self.varying.len(), 0.0);

        self.q_node = 0.0;
        for &s in members {
            let mut rs = 0.0;
            for &o in &self.varying {
                let y = self.value(s, o);
                rs += y * y;
            }
            self.row_sq[s as usize] = rs;
            self.q_node += rs;
        }
        self.usq_node = self.sums_node.iter().map(|&s| s * s).sum();
    }

    fn varying(&self) -> &[u32] {
        &self.varying
    }

    fn begin_feature(&mut self) {
        self.sums_left.fill(0.0);
        self.sums_right.copy_from_slice(&self.sums_node);
        self.usq_left = 0.0;
        self.usq_right = self.usq_node;
        self.q_left = 0.0;
        self.q_right = self.q_node;
        self.n_left = 0;
        self.n_right = self.n_node;
    }

    fn move_left(&mut self, sample: u32) {
        for (vi, &o) in self.varying.iter().enumerate() {
            let y = self.value(sample, o);
            let sl = self.sums_left[vi];
            self.usq_left += 2.0 * sl * y + y * y;
            self.sums_left[vi] = sl + y;
            let sr = self.sums_right[vi];
            self.usq_right += y * y - 2.0 * sr * y;
            self.sums_right[vi] = sr - y;
        }
        let rs = self.row_sq[sample as usize];
        self.q_left += rs;
        self.q_right -= rs;
        self.n_left += 1;
        self.n_right -= 1;
    }

    fn score(&self) -> f64 {
        (self.q_left - self.usq_left / self.n_left as f64)
            + (self.q_right - self.usq_right / self.n_right as f64)
    }
}

/// Grow one tree over `members` (indices into the rows of `x`).
///
/// `m_features` counts the features examined per node; when it is fewer
/// than the total, a uniform subset is drawn from `rng` at each node (in
/// depth-first node order), and when it equals the total no randomness is
/// consumed at all.
pub(crate) fn build_tree<T: Real, S: SplitScorer>(
    x: &Mat<T>,
    scorer: &mut S,
    params: &TreeParams,
    members: Vec<u32>,
    m_features: usize,
    rng: &mut Option<ChaCha8Rng>,
) -> FittedTree<T> {
    assert!(!members.is_empty(), "cannot grow a tree over zero samples");
    let mut nodes = Vec::new();
    grow(
        x, scorer, params, &mut nodes, members, None, 0, m_features, rng,
    );
    FittedTree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow<T: Real, S: SplitScorer>(
    x: &Mat<T>,
    scorer: &mut S,
    params: &TreeParams,
    nodes: &mut Vec<Node<T>>,
    members: Vec<u32>,
    parent_varying: Option<&[u32]>,
    depth: usize,
    m_features: usize,
    rng: &mut Option<ChaCha8Rng>,
) -> u32 {
    let my_index = nodes.len() as u32;
    // Placeholder; replaced by a Split if a valid cut is found.
    nodes.push(Node::Leaf {
        members: Vec::new(),
    });

    let n = members.len();
    let depth_ok = params.max_depth.is_none_or(|d| depth < d);
    let mut best: Option<(f64, usize, T)> = None;
    let mut my_varying: Vec<u32> = Vec::new();

    if depth_ok && n >= 2 * params.min_samples_leaf {
        scorer.reset_node(&members, parent_varying);
        if !scorer.node_is_pure() {
            my_varying.extend_from_slice(scorer.varying());
            let features = choose_features(x.cols(), m_features, rng);
            let mut order = members.clone();
            let two = T::one() + T::one();
            for f in features {
                order.sort_unstable_by(|&a, &b| {
                    x.at(a as usize, f)
                        .partial_cmp(&x.at(b as usize, f))
                        .expect("features must be finite")
                        .then(a.cmp(&b))
                });
                scorer.begin_feature();
                for pos in 0..n - 1 {
                    scorer.move_left(order[pos]);
                    let lo = x.at(order[pos] as usize, f);
                    let hi = x.at(order[pos + 1] as usize, f);
                    if lo < hi {
                        let n_left = pos + 1;
                        let n_right = n - n_left;
                        if n_left >= params.min_samples_leaf && n_right >= params.min_samples_leaf {
                            let score = scorer.score();
                            if best.is_none_or(|(b, _, _)| score < b) {
                                // Midpoint; nudge back onto `lo` if rounding
                                // reached `hi`, so both sides stay nonempty.
                                let mut thr = (lo + hi) / two;
                                if !(thr < hi) {
                                    thr = lo;
                                }
                                best = Some((score, f, thr));
                            }
                        }
                    }
                }
            }
        }
    }

    match best {
        None => {
            nodes[my_index as usize] = Node::Leaf { members };
            my_index
        }
        Some((_, feature, threshold)) => {
            let (left_members, right_members): (Vec<u32>, Vec<u32>) = members
                .iter()
                .partition(|&&s| x.at(s as usize, feature) <= threshold);
            let left = grow(
                x,
                scorer,
                params,
                nodes,
                left_members,
                Some(&my_varying),
                depth + 1,
                m_features,
                rng,
            );
            let right = grow(
                x,
                scorer,
                params,
                nodes,
                right_members,
                Some(&my_varying),
                depth + 1,
                m_features,
                rng,
            );
            nodes[my_index as usize] = Node::Split {
                feature: feature as u32,
                threshold,
                left,
                right,
            };
            my_index
        }
    }
}

/// Pick the features to examine at one node: ascending order, uniformly
/// sampled without replacement when `m < total`.
fn choose_features(total: usize, m: usize, rng: &mut Option<ChaCha8Rng>) -> Vec<usize> {
    if m >= total {
        return (0..total).collect();
    }
    let rng = rng
        .as_mut()
        .expect("feature subsampling requires a seeded generator");
    let mut indices: Vec<usize> = (0..total).collect();
    for i in 0..m {
        let j = rng.gen_range(i..total);
        indices.swap(i, j);
    }
    indices.truncate(m);
    indices.sort_unstable();
    indices
}

/// Majority vote per output over leaf members; ties pick the smallest class.
pub(crate) fn vote_labels(labels: &ByteMat, members: &[u32], out: &mut [u8]) {
    debug_assert_eq!(out.len(), labels.cols());
    debug_assert!(!members.is_empty());
    if members.len() == 1 {
        out.copy_from_slice(labels.row(members[0] as usize));
        return;
    }
    let p = labels.cols();
    let mut counts = vec![0u32; p * N_CLASSES];
    for &s in members {
        let row = labels.row(s as usize);
        for (o, &k) in row.iter().enumerate() {
            counts[o * N_CLASSES + k as usize] += 1;
        }
    }
    for o in 0..p {
        let slot = &counts[o * N_CLASSES..(o + 1) * N_CLASSES];
        let mut best = 0usize;
        for k in 1..N_CLASSES {
            if slot[k] > slot[best] {
                best = k;
            }
        }
        out[o] = best as u8;
    }
}

/// Mean per output over leaf members.
pub(crate) fn mean_values<T: Real>(values: &Mat<T>, members: &[u32], out: &mut [T]) {
    debug_assert_eq!(out.len(), values.cols());
    debug_assert!(!members.is_empty());
    out.fill(T::zero());
    for &s in members {
        for (acc, &v) in out.iter_mut().zip(values.row(s as usize)) {
            *acc += v;
        }
    }
    let n = T::from_usize(members.len()).expect("member count fits scalar");
    for acc in out.iter_mut() {
        *acc /= n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_labels() -> (Mat<f64>, ByteMat) {
        // Four samples, one feature; label flips at x = 0.5.
        let x = Mat::from_vec(4, 1, vec![0.1, 0.2, 0.8, 0.9]).unwrap();
        let y = ByteMat::from_vec(4, 1, vec![0, 0, 2, 2]).unwrap();
        (x, y)
    }

    #[test]
    fn splits_a_separable_classification_problem() {
        let (x, y) = tiny_labels();
        let mut scorer = GiniScorer::new(&y);
        let tree = build_tree(
            &x,
            &mut scorer,
            &TreeParams::default(),
            vec![0, 1, 2, 3],
            1,
            &mut None,
        );
        assert_eq!(tree.depth(), 1);
        assert_eq!(tree.n_leaves(), 2);
        match &tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
            }
            other => panic!("expected root split, got {other:?}"),
        }
        let mut out = [9u8];
        vote_labels(&y, tree.leaf_members(&[0.3]), &mut out);
        assert_eq!(out, [0]);
        vote_labels(&y, tree.leaf_members(&[0.85]), &mut out);
        assert_eq!(out, [2]);
    }

    #[test]
    fn gini_picks_the_brute_force_best_split() {
        // Oracle: enumerate every (feature, midpoint) cut and score it by
        // directly computing Σ m·(1 - Σ p²) over both sides and outputs;
        // the builder must choose the same cut.
        let x = Mat::from_vec(
            6,
            2,
            vec![
                0.10, 0.90, //
                0.20, 0.10, //
                0.30, 0.80, //
                0.40, 0.20, //
                0.50, 0.70, //
                0.60, 0.30,
            ],
        )
        .unwrap();
        let y = ByteMat::from_vec(6, 2, vec![0, 1, 0, 1, 0, 2, 2, 1, 2, 2, 2, 2]).unwrap();

        let gini_of = |ids: &[u32]| -> f64 {
            let mut total = 0.0;
            for o in 0..2 {
                let mut counts = [0f64; 3];
                for &s in ids {
                    counts[y.at(s as usize, o) as usize] += 1.0;
                }
                let m = ids.len() as f64;
                let sq: f64 = counts.iter().map(|c| (c / m) * (c / m)).sum();
                total += m * (1.0 - sq);
            }
            total
        };

        let all: Vec<u32> = (0..6).collect();
        let mut best_score = f64::INFINITY;
        let mut best_cut = (usize::MAX, f64::NAN);
        for f in 0..2 {
            let mut vals: Vec<f64> = all.iter().map(|&s| x.at(s as usize, f)).collect();
            vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for w in vals.windows(2) {
                if w[0] < w[1] {
                    let thr = (w[0] + w[1]) / 2.0;
                    let left: Vec<u32> = all
                        .iter()
                        .copied()
                        .filter(|&s| x.at(s as usize, f) <= thr)
                        .collect();
                    let right: Vec<u32> = all
                        .iter()
                        .copied()
                        .filter(|&s| x.at(s as usize, f) > thr)
                        .collect();
                    let score = gini_of(&left) + gini_of(&right);
                    if score < best_score {
                        best_score = score;
                        best_cut = (f, thr);
                    }
                }
            }
        }

        let mut scorer = GiniScorer::new(&y);
        let tree = build_tree(&x, &mut scorer, &TreeParams::default(), all, 2, &mut None);
        match &tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature as usize, best_cut.0);
                assert_eq!(*threshold, best_cut.1);
            }
            other => panic!("expected root split, got {other:?}"),
        }
    }

    #[test]
    fn deviance_matches_brute_force_on_regression_targets() {
        let x = Mat::from_vec(5, 1, vec![0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        let y =
            Mat::from_vec(5, 2, vec![1.0, 0.0, 1.1, 0.2, 3.0, 1.0, 3.2, 1.1, 3.1, 0.9]).unwrap();

        let dev_of = |ids: &[u32]| -> f64 {
            let mut total = 0.0;
            for o in 0..2 {
                let m = ids.len() as f64;
                let mean: f64 = ids.iter().map(|&s| y.at(s as usize, o)).sum::<f64>() / m;
                total += ids
                    .iter()
                    .map(|&s| (y.at(s as usize, o) - mean).powi(2))
                    .sum::<f64>();
            }
            total
        };

        let all: Vec<u32> = (0..5).collect();
        let mut best_score = f64::INFINITY;
        let mut best_thr = f64::NAN;
        for w in [0.2, 0.4, 0.6, 0.8] {
            let left: Vec<u32> = all
                .iter()
                .copied()
                .filter(|&s| x.at(s as usize, 0) <= w)
                .collect();
            let right: Vec<u32> = all
                .iter()
                .copied()
                .filter(|&s| x.at(s as usize, 0) > w)
                .collect();
            let score = dev_of(&left) + dev_of(&right);
            if score < best_score {
                best_score = score;
                best_thr = w;
            }
        }
        assert_eq!(best_thr, 0.4, "sanity: the gap between clusters wins");

        let mut scorer = DevianceScorer::new(&y);
        let tree = build_tree(&x, &mut scorer, &TreeParams::default(), all, 1, &mut None);
        match &tree.nodes[0] {
            Node::Split { threshold, .. } => {
                assert!((threshold - best_thr).abs() < 1e-12);
            }
            other => panic!("expected root split, got {other:?}"),
        }
    }

    #[test]
    fn fully_grown_tree_reproduces_distinct_training_rows() {
        // Distinct feature rows force singleton leaves, so re-aggregated
        // predictions equal the training targets bitwise.
        let n = 20;
        let x = Mat::from_vec(
            n,
            2,
            (0..2 * n).map(|i| (i as f64) / (2 * n) as f64).collect(),
        )
        .unwrap();
        let y_vals: Vec<f64> = (0..n * 3).map(|i| ((i * 37) % 17) as f64 * 0.11).collect();
        let y = Mat::from_vec(n, 3, y_vals).unwrap();
        let mut scorer = DevianceScorer::new(&y);
        let tree = build_tree(
            &x,
            &mut scorer,
            &TreeParams::default(),
            (0..n as u32).collect(),
            2,
            &mut None,
        );
        let mut out = vec![0.0f64; 3];
        for s in 0..n {
            let members = tree.leaf_members(x.row(s));
            assert_eq!(members, &[s as u32]);
            mean_values(&y, members, &mut out);
            assert_eq!(out.as_slice(), y.row(s));
        }
    }

    #[test]
    fn max_depth_and_min_samples_leaf_limit_growth() {
        let n = 64;
        let x = Mat::from_vec(n, 1, (0..n).map(|i| i as f64 / n as f64).collect()).unwrap();
        let y_vals: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let y = Mat::from_vec(n, 1, y_vals).unwrap();

        let mut scorer = DevianceScorer::new(&y);
        let capped = build_tree(
            &x,
            &mut scorer,
            &TreeParams {
                max_depth: Some(3),
                min_samples_leaf: 1,
            },
            (0..n as u32).collect(),
            1,
            &mut None,
        );
        assert_eq!(capped.depth(), 3);
        assert_eq!(capped.n_leaves(), 8);

        let mut scorer = DevianceScorer::new(&y);
        let chunky = build_tree(
            &x,
            &mut scorer,
            &TreeParams {
                max_depth: None,
                min_samples_leaf: 10,
            },
            (0..n as u32).collect(),
            1,
            &mut None,
        );
        for node in &chunky.nodes {
            if let Node::Leaf { members } = node {
                assert!(members.len() >= 10);
            }
        }
    }

    #[test]
    fn pure_nodes_become_leaves_immediately() {
        let x = Mat::from_vec(4, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let y = ByteMat::from_vec(4, 2, vec![1, 0, 1, 0, 1, 0, 1, 0]).unwrap();
        let mut scorer = GiniScorer::new(&y);
        let tree = build_tree(
            &x,
            &mut scorer,
            &TreeParams::default(),
            vec![0, 1, 2, 3],
            1,
            &mut None,
        );
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.depth(), 0);
    }

    #[test]
    fn tie_break_prefers_lowest_feature_and_threshold() {
        // Feature 1 mirrors feature 0, so every cut score appears twice;
        // the builder must keep the feature-0 candidate, and among the
        // equally scoring cuts of feature 0 the smallest threshold.
        let x = Mat::<f64>::from_vec(4, 2, vec![0.1, 0.1, 0.2, 0.2, 0.3, 0.3, 0.4, 0.4]).unwrap();
        let y = ByteMat::from_vec(4, 1, vec![0, 2, 0, 2]).unwrap();
        let mut scorer = GiniScorer::new(&y);
        let tree = build_tree(
            &x,
            &mut scorer,
            &TreeParams::default(),
            vec![0, 1, 2, 3],
            2,
            &mut None,
        );
        match &tree.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                // Candidates 0.15 and 0.35 tie at the best score; the
                // first one examined must win.
                assert!((*threshold - 0.15).abs() < 1e-12);
            }
            other => panic!("expected root split, got {other:?}"),
        }
    }

    #[test]
    fn vote_ties_pick_the_smallest_class() {
        let y = ByteMat::from_vec(2, 3, vec![0, 2, 1, 2, 0, 1]).unwrap();
        let mut out = vec![9u8; 3];
        vote_labels(&y, &[0, 1], &mut out);
        // Output 0: one vote each for 0 and 2 -> 0; output 1: same -> 0;
        // output 2: both vote 1 -> 1.
        assert_eq!(out, vec![0, 0, 1]);
    }

    #[test]
    fn feature_subsets_are_sorted_and_deterministic() {
        use rand::SeedableRng;
        let mut rng_a = Some(ChaCha8Rng::seed_from_u64(9));
        let mut rng_b = Some(ChaCha8Rng::seed_from_u64(9));
        let a = choose_features(30, 6, &mut rng_a);
        let b = choose_features(30, 6, &mut rng_b);
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert!(a.iter().all(|&f| f < 30));

        // Using all features consumes no randomness.
        let mut rng = Some(ChaCha8Rng::seed_from_u64(9));
        let all = choose_features(5, 5, &mut rng);
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
        let mut probe_a = rng.clone().unwrap();
        let mut probe_b = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            rand::Rng::gen::<u64>(&mut probe_a),
            rand::Rng::gen::<u64>(&mut probe_b)
        );
    }
}
