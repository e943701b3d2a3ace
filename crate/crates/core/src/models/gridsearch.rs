//! Hyperparameter grid search for the value forest, scored by k-fold
//! cross-validated pooled R².
//!
//! The candidate grid is the cartesian product of tree counts, depth caps,
//! and leaf-size floors, enumerated in that nesting order. One seeded
//! shuffle fixes the fold assignment for every candidate (fold `f` holds
//! the contiguous slice `f·n/k .. (f+1)·n/k` of the shuffled order), every
//! forest fit reuses the search seed, and the best mean score wins with
//! ties resolved to the earliest candidate. The winner is refit on the full
//! training set.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::r2;
use crate::linalg::Mat;
use crate::scalar::Real;

use super::forest::{fit_value_forest, predict_value_forest, FeatureMode, ForestParams};
use super::tree::{FittedTree, TreeParams};

/// Candidate lists for the search, crossed in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridParams {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_leaf: Vec<usize>,
    pub folds: usize,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            n_trees: vec![50, 100],
            max_depth: vec![Some(8), Some(16), None],
            min_samples_leaf: vec![1, 5],
            folds: 3,
        }
    }
}

impl GridParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_trees.is_empty() || self.max_depth.is_empty() || self.min_samples_leaf.is_empty()
        {
            return Err("the candidate grid must not be empty".to_string());
        }
        if self.folds < 2 {
            return Err("cross-validation needs at least 2 folds".to_string());
        }
        for &t in &self.n_trees {
            if t == 0 {
                return Err("candidate tree counts must be >= 1".to_string());
            }
        }
        for &d in self.max_depth.iter().flatten() {
            if d == 0 {
                return Err("candidate depth caps must be >= 1".to_string());
            }
        }
        for &m in &self.min_samples_leaf {
            if m == 0 {
                return Err("candidate leaf sizes must be >= 1".to_string());
            }
        }
        Ok(())
    }

    fn candidates(&self) -> Vec<GridCandidate> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &min_samples_leaf in &self.min_samples_leaf {
                    out.push(GridCandidate {
                        n_trees,
                        max_depth,
                        min_samples_leaf,
                    });
                }
            }
        }
        out
    }
}

/// One point of the candidate grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridCandidate {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl GridCandidate {
    fn forest_params(self) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            bootstrap: true,
            feature_mode: FeatureMode::ThirdTotal,
            tree: TreeParams {
                max_depth: self.max_depth,
                min_samples_leaf: self.min_samples_leaf,
            },
        }
    }
}

/// Candidate plus its mean cross-validation score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridScore<T> {
    pub candidate: GridCandidate,
    pub mean_r2: T,
}

/// Search outcome: the scored grid and the winner refit on all data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedGrid<T> {
    pub(crate) chosen_index: usize,
    pub(crate) scores: Vec<GridScore<T>>,
    pub(crate) forest: ForestParams,
    pub(crate) trees: Vec<FittedTree<T>>,
}

impl<T: Real> FittedGrid<T> {
    pub fn chosen(&self) -> GridCandidate {
        self.scores[self.chosen_index].candidate
    }

    pub fn scores(&self) -> &[GridScore<T>] {
        &self.scores
    }
}

/// Run the search. `values` carries the regression targets; the refit trees
/// index into it, so the caller keeps it alongside the returned state.
pub(crate) fn fit_grid<T: Real>(
    x: &Mat<T>,
    values: &Mat<T>,
    params: &GridParams,
    seed: u64,
) -> Result<FittedGrid<T>, String> {
    params.validate()?;
    let n = x.rows();
    if n < params.folds {
        return Err(format!(
            "{n} samples cannot be split into {} folds",
            params.folds
        ));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let bounds: Vec<usize> = (0..=params.folds).map(|f| f * n / params.folds).collect();

    let folds: Vec<(Vec<usize>, Vec<usize>)> = (0..params.folds)
        .map(|f| {
            let held: Vec<usize> = order[bounds[f]..bounds[f + 1]].to_vec();
            let kept: Vec<usize> = order[..bounds[f]]
                .iter()
                .chain(&order[bounds[f + 1]..])
                .copied()
                .collect();
            (kept, held)
        })
        .collect();

    let candidates = params.candidates();
    let folds_t = T::from_usize(params.folds).expect("fold count fits scalar");
    let mut scores = Vec::with_capacity(candidates.len());
    let mut chosen_index = 0usize;
    for (ci, cand) in candidates.iter().enumerate() {
        let fp = cand.forest_params();
        fp.validate()?;
        let mut sum = T::zero();
        for (kept, held) in &folds {
            let x_fit = x.take_rows(kept);
            let y_fit = values.take_rows(kept);
            let x_val = x.take_rows(held);
            let y_val = values.take_rows(held);
            let trees = fit_value_forest(&x_fit, &y_fit, &fp, seed);
            let mut pred = Mat::zeros(x_val.rows(), values.cols());
            let mut row = vec![T::zero(); values.cols()];
            for r in 0..x_val.rows() {
                predict_value_forest(&trees, &y_fit, x_val.row(r), &mut row);
                pred.row_mut(r).copy_from_slice(&row);
            }
            sum += r2(&y_val, &pred).map_err(|e| format!("fold score failed: {e}"))?;
        }
        let mean_r2 = sum / folds_t;
        if mean_r2
            > scores
                .get(chosen_index)
                .map_or(T::neg_infinity(), |s: &GridScore<T>| s.mean_r2)
        {
            chosen_index = ci;
        }
        scores.push(GridScore {
            candidate: *cand,
            mean_r2,
        });
    }

    let forest = candidates[chosen_index].forest_params();
    let trees = fit_value_forest(x, values, &forest, seed);
    Ok(FittedGrid {
        chosen_index,
        scores,
        forest,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n: usize) -> (Mat<f64>, Mat<f64>) {
        let x = Mat::from_vec(
            n,
            3,
            (0..n * 3)
                .map(|k| ((k * 37 + 11) % 53) as f64 / 53.0)
                .collect(),
        )
        .unwrap();
        let mut y = Mat::zeros(n, 2);
        for r in 0..n {
            y.set(r, 0, x.at(r, 0) + 0.5 * x.at(r, 1));
            y.set(r, 1, 1.0 - x.at(r, 2));
        }
        (x, y)
    }

    fn small_grid() -> GridParams {
        GridParams {
            n_trees: vec![3],
            max_depth: vec![Some(2), None],
            min_samples_leaf: vec![1, 4],
            folds: 3,
        }
    }

    #[test]
    fn scores_every_candidate_in_declaration_order() {
        let (x, y) = toy(18);
        let fit = fit_grid(&x, &y, &small_grid(), 7).unwrap();
        assert_eq!(fit.scores.len(), 4);
        let expect = [(Some(2), 1), (Some(2), 4), (None, 1), (None, 4)];
        for (s, (d, m)) in fit.scores.iter().zip(expect) {
            assert_eq!(s.candidate.n_trees, 3);
            assert_eq!(s.candidate.max_depth, d);
            assert_eq!(s.candidate.min_samples_leaf, m);
        }
        // The winner strictly beats everything before it and at least ties
        // everything after it.
        let best = fit.scores[fit.chosen_index].mean_r2;
        for (i, s) in fit.scores.iter().enumerate() {
            if i < fit.chosen_index {
                assert!(best > s.mean_r2);
            } else {
                assert!(best >= s.mean_r2);
            }
        }
    }

    #[test]
    fn duplicate_candidates_tie_to_the_first() {
        let (x, y) = toy(15);
        let grid = GridParams {
            n_trees: vec![3, 3],
            max_depth: vec![None],
            min_samples_leaf: vec![1],
            folds: 3,
        };
        let fit = fit_grid(&x, &y, &grid, 5).unwrap();
        assert_eq!(fit.scores[0].mean_r2, fit.scores[1].mean_r2);
        assert_eq!(fit.chosen_index, 0);
    }

    #[test]
    fn single_point_grid_equals_the_plain_forest() {
        let (x, y) = toy(12);
        let grid = GridParams {
            n_trees: vec![5],
            max_depth: vec![None],
            min_samples_leaf: vec![1],
            folds: 3,
        };
        let fit = fit_grid(&x, &y, &grid, 42).unwrap();
        let mut fp = ForestParams::regression_default();
        fp.n_trees = 5;
        let plain = fit_value_forest(&x, &y, &fp, 42);
        assert_eq!(fit.trees, plain);
        assert_eq!(fit.chosen().n_trees, 5);
    }

    #[test]
    fn search_is_reproducible_and_seed_sensitive() {
        let (x, y) = toy(18);
        let a = fit_grid(&x, &y, &small_grid(), 9).unwrap();
        let b = fit_grid(&x, &y, &small_grid(), 9).unwrap();
        assert_eq!(a, b);
        let c = fit_grid(&x, &y, &small_grid(), 10).unwrap();
        assert!(a.scores != c.scores || a.trees != c.trees);
    }

    #[test]
    fn rejects_empty_grids_and_short_data() {
        let (x, y) = toy(12);
        let mut grid = small_grid();
        grid.n_trees.clear();
        assert!(fit_grid(&x, &y, &grid, 1).is_err());

        let grid = small_grid();
        let (x2, y2) = (x.take_rows(&[0, 1]), y.take_rows(&[0, 1]));
        assert!(fit_grid(&x2, &y2, &grid, 1).is_err());

        let mut grid = small_grid();
        grid.folds = 1;
        assert!(fit_grid(&x, &y, &grid, 1).is_err());
    }

    #[test]
    fn default_grid_matches_the_documented_candidates() {
        let g = GridParams::default();
        assert_eq!(g.n_trees, vec![50, 100]);
        assert_eq!(g.max_depth, vec![Some(8), Some(16), None]);
        assert_eq!(g.min_samples_leaf, vec![1, 5]);
        assert_eq!(g.folds, 3);
        assert_eq!(g.candidates().len(), 12);
    }
}
