//! The inverse-design estimators: spectra in, label images out.
//!
//! Eleven model kinds share one interface. Classifiers predict the three
//! material labels per pixel directly; regressors treat the labels as real
//! values (0, 1, 2) and predict continuous fields that a threshold rule
//! later converts back to labels. Every kind is specified by a [`ModelSpec`]
//! (kind, seed, hyperparameters), fits on a [`TrainingSet`], and yields a
//! [`TrainedModel`] that predicts per spectrum and serializes to JSON with
//! a format-version tag. Wall-clock fit time is observed on the trained
//! model but never persisted, so artifacts stay byte-stable across runs.

pub mod forest;
pub mod gridsearch;
pub mod knn;
pub mod linear;
pub mod svr;
pub mod tree;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::Path;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Sample;
use crate::linalg::{ByteMat, Mat};
use crate::scalar::{real, Real};

pub use forest::{FeatureMode, ForestParams};
pub use gridsearch::{FittedGrid, GridCandidate, GridParams, GridScore};
pub use knn::KnnParams;
pub use linear::{LinearParams, LinearVariant};
pub use svr::SvrParams;
pub use tree::TreeParams;

use forest::{fit_label_forest, fit_value_forest, predict_label_forest, predict_value_forest};
use gridsearch::fit_grid;
use knn::FittedKnn;
use linear::FittedLinear;
use svr::FittedSvr;
use tree::{build_tree, mean_values, vote_labels, DevianceScorer, FittedTree, GiniScorer};

/// On-disk format tag for persisted models.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("hyperparameters do not belong to model kind {kind}")]
    HyperMismatch { kind: ModelKind },
    #[error("invalid hyperparameters: {0}")]
    InvalidHyper(String),
    #[error("invalid training data: {0}")]
    InvalidData(String),
    #[error("fit failed: {0}")]
    Fit(String),
    #[error("feature count mismatch: model expects {expected}, got {got}")]
    FeatureCount { expected: usize, got: usize },
    #[error("unknown model code '{0}'")]
    UnknownCode(String),
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file encoding: {0}")]
    Encoding(#[from] serde_json::Error),
    #[error("unsupported model format version {found} (this build reads {supported})")]
    FormatVersion { found: u32, supported: u32 },
}

/// The eleven estimator kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Decision-tree classifier.
    Dtc,
    /// Decision-tree regressor.
    Dtr,
    /// Random-forest classifier.
    Rfc,
    /// Random-forest regressor.
    Rfr,
    /// k-nearest-neighbors classifier.
    Knc,
    /// Linear (least-squares) regression.
    Lir,
    /// Ridge regression.
    Rr,
    /// Lasso regression.
    Lr,
    /// Elastic-net regression.
    Er,
    /// Support-vector regressor.
    Svr,
    /// Grid-searched random-forest regressor.
    Gsr,
}

/// Every kind, in canonical order.
pub const ALL_MODELS: [ModelKind; 11] = [
    ModelKind::Dtc,
    ModelKind::Dtr,
    ModelKind::Rfc,
    ModelKind::Rfr,
    ModelKind::Knc,
    ModelKind::Lir,
    ModelKind::Rr,
    ModelKind::Lr,
    ModelKind::Er,
    ModelKind::Svr,
    ModelKind::Gsr,
];

impl ModelKind {
    /// Short code used on the command line and in file names.
    pub fn code(self) -> &'static str {
        match self {
            ModelKind::Dtc => "dtc",
            ModelKind::Dtr => "dtr",
            ModelKind::Rfc => "rfc",
            ModelKind::Rfr => "rfr",
            ModelKind::Knc => "knc",
            ModelKind::Lir => "lir",
            ModelKind::Rr => "rr",
            ModelKind::Lr => "lr",
            ModelKind::Er => "er",
            ModelKind::Svr => "svr",
            ModelKind::Gsr => "gsr",
        }
    }

    /// Human-readable name.
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Dtc => "decision-tree classifier",
            ModelKind::Dtr => "decision-tree regressor",
            ModelKind::Rfc => "random-forest classifier",
            ModelKind::Rfr => "random-forest regressor",
            ModelKind::Knc => "k-nearest-neighbors classifier",
            ModelKind::Lir => "linear regression",
            ModelKind::Rr => "ridge regression",
            ModelKind::Lr => "lasso regression",
            ModelKind::Er => "elastic-net regression",
            ModelKind::Svr => "support-vector regressor",
            ModelKind::Gsr => "grid-searched forest regressor",
        }
    }

    /// Classifiers emit labels; everything else emits real values.
    pub fn is_classifier(self) -> bool {
        matches!(self, ModelKind::Dtc | ModelKind::Rfc | ModelKind::Knc)
    }

    pub fn parse(code: &str) -> Result<Self, ModelError> {
        let lower = code.trim().to_ascii_lowercase();
        ALL_MODELS
            .into_iter()
            .find(|k| k.code() == lower)
            .ok_or_else(|| ModelError::UnknownCode(code.trim().to_string()))
    }

    /// Parse a comma-separated code list; `all` selects every kind. Order is
    /// preserved and duplicates collapse to the first occurrence.
    pub fn parse_list(list: &str) -> Result<Vec<Self>, ModelError> {
        if list.trim().eq_ignore_ascii_case("all") {
            return Ok(ALL_MODELS.to_vec());
        }
        let mut out = Vec::new();
        for code in list.split(',') {
            let kind = Self::parse(code)?;
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        if out.is_empty() {
            return Err(ModelError::UnknownCode(String::new()));
        }
        Ok(out)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.code().to_ascii_uppercase())
    }
}

/// Hyperparameters, tagged by estimator family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Hyper<T = f64> {
    Tree(TreeParams),
    Forest(ForestParams),
    Knn(KnnParams),
    Linear(LinearParams<T>),
    Svr(SvrParams<T>),
    Grid(GridParams),
}

impl<T: Real> Hyper<T> {
    fn validate(&self) -> Result<(), String> {
        match self {
            Hyper::Tree(p) => p.validate(),
            Hyper::Forest(p) => p.validate(),
            Hyper::Knn(p) => p.validate(),
            Hyper::Linear(p) => p.validate(),
            Hyper::Svr(p) => p.validate(),
            Hyper::Grid(p) => p.validate(),
        }
    }
}

/// Everything needed to reproduce a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec<T = f64> {
    pub kind: ModelKind,
    pub seed: u64,
    pub hyper: Hyper<T>,
}

impl<T: Real> ModelSpec<T> {
    /// The documented default hyperparameters for `kind`.
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        let hyper = match kind {
            ModelKind::Dtc | ModelKind::Dtr => Hyper::Tree(TreeParams::default()),
            ModelKind::Rfc => Hyper::Forest(ForestParams::classification_default()),
            ModelKind::Rfr => Hyper::Forest(ForestParams::regression_default()),
            ModelKind::Knc => Hyper::Knn(KnnParams::default()),
            ModelKind::Lir => Hyper::Linear(LinearParams::least_squares()),
            ModelKind::Rr => Hyper::Linear(LinearParams::ridge()),
            ModelKind::Lr => Hyper::Linear(LinearParams::lasso()),
            ModelKind::Er => Hyper::Linear(LinearParams::elastic_net()),
            ModelKind::Svr => Hyper::Svr(SvrParams::default()),
            ModelKind::Gsr => Hyper::Grid(GridParams::default()),
        };
        ModelSpec { kind, seed, hyper }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let family_ok = matches!(
            (self.kind, &self.hyper),
            (ModelKind::Dtc | ModelKind::Dtr, Hyper::Tree(_))
                | (ModelKind::Rfc | ModelKind::Rfr, Hyper::Forest(_))
                | (ModelKind::Knc, Hyper::Knn(_))
                | (
                    ModelKind::Lir | ModelKind::Rr | ModelKind::Lr | ModelKind::Er,
                    Hyper::Linear(_)
                )
                | (ModelKind::Svr, Hyper::Svr(_))
                | (ModelKind::Gsr, Hyper::Grid(_))
        );
        if !family_ok {
            return Err(ModelError::HyperMismatch { kind: self.kind });
        }
        self.hyper.validate().map_err(ModelError::InvalidHyper)
    }

    /// Fit this spec on `data`.
    pub fn fit(&self, data: &TrainingSet<T>) -> Result<TrainedModel<T>, ModelError> {
        fit_model(self, data)
    }
}

/// Training pairs: one spectrum row per sample, one label row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet<T = f64> {
    x: Mat<T>,
    labels: ByteMat,
}

impl<T: Real> TrainingSet<T> {
    pub fn new(x: Mat<T>, labels: ByteMat) -> Result<Self, ModelError> {
        if x.rows() == 0 || x.cols() == 0 {
            return Err(ModelError::InvalidData(
                "need at least one sample and one feature".to_string(),
            ));
        }
        if x.rows() != labels.rows() {
            return Err(ModelError::InvalidData(format!(
                "{} spectra vs {} label rows",
                x.rows(),
                labels.rows()
            )));
        }
        if labels.cols() == 0 {
            return Err(ModelError::InvalidData("label rows are empty".to_string()));
        }
        for r in 0..x.rows() {
            for (cidx, &v) in x.row(r).iter().enumerate() {
                if !(v >= T::zero() && v <= T::one()) {
                    return Err(ModelError::InvalidData(format!(
                        "absorption at sample {r}, frequency {cidx} is outside [0, 1]"
                    )));
                }
            }
        }
        if let Some(&bad) = labels.data().iter().find(|&&l| l > 2) {
            return Err(ModelError::InvalidData(format!(
                "label {bad} is outside the {{0, 1, 2}} alphabet"
            )));
        }
        Ok(TrainingSet { x, labels })
    }

    /// Assemble from dataset samples (spectra become features, images become
    /// label targets). All samples must share the grid and resolution.
    pub fn from_samples(samples: &[&Sample]) -> Result<Self, ModelError> {
        let first = samples
            .first()
            .ok_or_else(|| ModelError::InvalidData("no samples given".to_string()))?;
        let f = first.spectrum.len();
        let p = first.image.pixels().len();
        let mut x = Mat::zeros(samples.len(), f);
        let mut labels = Vec::with_capacity(samples.len() * p);
        for (r, s) in samples.iter().enumerate() {
            if s.spectrum.len() != f || s.image.pixels().len() != p {
                return Err(ModelError::InvalidData(format!(
                    "sample {} disagrees on spectrum length or image size",
                    s.id
                )));
            }
            for (dst, &v) in x.row_mut(r).iter_mut().zip(s.spectrum.values()) {
                *dst = real(v);
            }
            labels.extend_from_slice(s.image.pixels());
        }
        let labels = ByteMat::from_vec(samples.len(), p, labels)
            .ok_or_else(|| ModelError::InvalidData("label matrix shape".to_string()))?;
        Self::new(x, labels)
    }

    pub fn features(&self) -> &Mat<T> {
        &self.x
    }

    pub fn labels(&self) -> &ByteMat {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    /// Labels lifted to real values for the regressor families.
    pub fn lifted(&self) -> Mat<T> {
        lift_labels(&self.labels)
    }
}

pub(crate) fn lift_labels<T: Real>(labels: &ByteMat) -> Mat<T> {
    let mut out = Mat::zeros(labels.rows(), labels.cols());
    for r in 0..labels.rows() {
        for (dst, &l) in out.row_mut(r).iter_mut().zip(labels.row(r)) {
            *dst = T::from_u8(l).expect("labels fit scalar");
        }
    }
    out
}

/// Model output: labels from classifiers, real fields from regressors.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction<T = f64> {
    Labels(Vec<u8>),
    Values(Vec<T>),
}

impl<T: Real> Prediction<T> {
    pub fn labels(&self) -> Option<&[u8]> {
        match self {
            Prediction::Labels(l) => Some(l),
            Prediction::Values(_) => None,
        }
    }

    pub fn values(&self) -> Option<&[T]> {
        match self {
            Prediction::Values(v) => Some(v),
            Prediction::Labels(_) => None,
        }
    }

    /// View as real values, lifting labels when necessary.
    pub fn to_values(&self) -> Vec<T> {
        match self {
            Prediction::Values(v) => v.clone(),
            Prediction::Labels(l) => l
                .iter()
                .map(|&v| T::from_u8(v).expect("labels fit scalar"))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Prediction::Labels(l) => l.len(),
            Prediction::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fitted state per estimator family. Tree-shaped models keep their
/// training targets because leaves store member ids, not aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) enum FittedState<T> {
    LabelTree {
        tree: FittedTree<T>,
        labels: ByteMat,
    },
    ValueTree {
        tree: FittedTree<T>,
        values: Mat<T>,
    },
    LabelForest {
        trees: Vec<FittedTree<T>>,
        labels: ByteMat,
    },
    ValueForest {
        trees: Vec<FittedTree<T>>,
        values: Mat<T>,
    },
    Knn(FittedKnn<T>),
    Linear(FittedLinear<T>),
    Svr(FittedSvr<T>),
    Grid {
        grid: FittedGrid<T>,
        values: Mat<T>,
    },
}

/// A fitted model plus the spec that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel<T = f64> {
    pub spec: ModelSpec<T>,
    pub(crate) state: FittedState<T>,
    n_features: usize,
    n_outputs: usize,
    /// Wall-clock fit time; observational only, never serialized.
    #[serde(skip)]
    pub train_seconds: f64,
}

/// Fit `spec` on `data`.
pub fn fit_model<T: Real>(
    spec: &ModelSpec<T>,
    data: &TrainingSet<T>,
) -> Result<TrainedModel<T>, ModelError> {
    spec.validate()?;
    let x = data.features();
    let all_members: Vec<u32> = (0..x.rows() as u32).collect();
    let start = Instant::now();
    let state = match (spec.kind, &spec.hyper) {
        (ModelKind::Dtc, Hyper::Tree(p)) => {
            let mut scorer = GiniScorer::new(data.labels());
            let tree = build_tree(x, &mut scorer, p, all_members, x.cols(), &mut None);
            FittedState::LabelTree {
                tree,
                labels: data.labels().clone(),
            }
        }
        (ModelKind::Dtr, Hyper::Tree(p)) => {
            let values = data.lifted();
            let tree = {
                let mut scorer = DevianceScorer::new(&values);
                build_tree(x, &mut scorer, p, all_members, x.cols(), &mut None)
            };
            FittedState::ValueTree { tree, values }
        }
        (ModelKind::Rfc, Hyper::Forest(p)) => FittedState::LabelForest {
            trees: fit_label_forest(x, data.labels(), p, spec.seed),
            labels: data.labels().clone(),
        },
        (ModelKind::Rfr, Hyper::Forest(p)) => {
            let values = data.lifted();
            let trees = fit_value_forest(x, &values, p, spec.seed);
            FittedState::ValueForest { trees, values }
        }
        (ModelKind::Knc, Hyper::Knn(p)) => {
            FittedState::Knn(FittedKnn::fit(x, data.labels(), p).map_err(ModelError::Fit)?)
        }
        (ModelKind::Lir | ModelKind::Rr | ModelKind::Lr | ModelKind::Er, Hyper::Linear(p)) => {
            let values = data.lifted();
            FittedState::Linear(FittedLinear::fit(x, &values, p).map_err(ModelError::Fit)?)
        }
        (ModelKind::Svr, Hyper::Svr(p)) => {
            let values = data.lifted();
            FittedState::Svr(FittedSvr::fit(x, &values, p).map_err(ModelError::Fit)?)
        }
        (ModelKind::Gsr, Hyper::Grid(p)) => {
            let values = data.lifted();
            let grid = fit_grid(x, &values, p, spec.seed).map_err(ModelError::Fit)?;
            FittedState::Grid { grid, values }
        }
        _ => unreachable!("validate() already checked the kind/hyper pairing"),
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        state,
        n_features: x.cols(),
        n_outputs: data.labels().cols(),
        train_seconds: start.elapsed().as_secs_f64(),
    })
}

impl<T: Real> TrainedModel<T> {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    /// Predict one spectrum.
    pub fn predict(&self, features: &[T]) -> Result<Prediction<T>, ModelError> {
        if features.len() != self.n_features {
            return Err(ModelError::FeatureCount {
                expected: self.n_features,
                got: features.len(),
            });
        }
        Ok(match &self.state {
            FittedState::LabelTree { tree, labels } => {
                let mut out = vec![0u8; self.n_outputs];
                vote_labels(labels, tree.leaf_members(features), &mut out);
                Prediction::Labels(out)
            }
            FittedState::ValueTree { tree, values } => {
                let mut out = vec![T::zero(); self.n_outputs];
                mean_values(values, tree.leaf_members(features), &mut out);
                Prediction::Values(out)
            }
            FittedState::LabelForest { trees, labels } => {
                let mut out = vec![0u8; self.n_outputs];
                predict_label_forest(trees, labels, features, &mut out);
                Prediction::Labels(out)
            }
            FittedState::ValueForest { trees, values } => {
                let mut out = vec![T::zero(); self.n_outputs];
                predict_value_forest(trees, values, features, &mut out);
                Prediction::Values(out)
            }
            FittedState::Knn(knn) => {
                let mut out = vec![0u8; self.n_outputs];
                knn.predict(features, &mut out);
                Prediction::Labels(out)
            }
            FittedState::Linear(lin) => {
                let mut out = vec![T::zero(); self.n_outputs];
                lin.predict(features, &mut out);
                Prediction::Values(out)
            }
            FittedState::Svr(svr) => {
                let mut out = vec![T::zero(); self.n_outputs];
                svr.predict(features, &mut out);
                Prediction::Values(out)
            }
            FittedState::Grid { grid, values } => {
                let mut out = vec![T::zero(); self.n_outputs];
                predict_value_forest(&grid.trees, values, features, &mut out);
                Prediction::Values(out)
            }
        })
    }

    /// Predict every row of `x`.
    pub fn predict_batch(&self, x: &Mat<T>) -> Result<Vec<Prediction<T>>, ModelError> {
        (0..x.rows()).map(|r| self.predict(x.row(r))).collect()
    }

    /// The grid-search outcome, when this model is one.
    pub fn grid_outcome(&self) -> Option<&FittedGrid<T>> {
        match &self.state {
            FittedState::Grid { grid, .. } => Some(grid),
            _ => None,
        }
    }

    /// Write as JSON with a format-version tag.
    pub fn save(&self, path: &Path) -> Result<(), ModelError>
    where
        T: Serialize,
    {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(
            &mut w,
            &PersistedModel {
                format_version: MODEL_FORMAT_VERSION,
                model: self,
            },
        )?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    /// Read a model written by [`TrainedModel::save`].
    pub fn load(path: &Path) -> Result<Self, ModelError>
    where
        T: DeserializeOwned,
    {
        let r = BufReader::new(File::open(path)?);
        let persisted: PersistedOwned<T> = serde_json::from_reader(r)?;
        if persisted.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::FormatVersion {
                found: persisted.format_version,
                supported: MODEL_FORMAT_VERSION,
            });
        }
        Ok(persisted.model)
    }
}

#[derive(Serialize)]
struct PersistedModel<'a, T: Serialize> {
    format_version: u32,
    model: &'a TrainedModel<T>,
}

#[derive(Deserialize)]
#[serde(bound = "T: DeserializeOwned")]
struct PersistedOwned<T> {
    format_version: u32,
    model: TrainedModel<T>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    /// Eight distinguishable spectra over five frequencies, with 2x2 label
    /// images covering all three classes.
    fn toy_set() -> TrainingSet<f64> {
        let n = 8;
        let x = Mat::from_vec(
            n,
            5,
            (0..n * 5)
                .map(|k| ((k * 29 + 7) % 97) as f64 / 97.0)
                .collect(),
        )
        .unwrap();
        let labels =
            ByteMat::from_vec(n, 4, (0..n * 4).map(|k| ((k * 5 + 1) % 3) as u8).collect()).unwrap();
        TrainingSet::new(x, labels).unwrap()
    }

    #[test]
    fn codes_are_unique_and_parse_back() {
        for kind in ALL_MODELS {
            assert_eq!(ModelKind::parse(kind.code()).unwrap(), kind);
            assert_eq!(ModelKind::parse(&kind.code().to_uppercase()).unwrap(), kind);
        }
        let codes: std::collections::HashSet<_> = ALL_MODELS.iter().map(|k| k.code()).collect();
        assert_eq!(codes.len(), ALL_MODELS.len());
    }

    #[test]
    fn parse_list_handles_all_and_duplicates_and_errors() {
        assert_eq!(ModelKind::parse_list("all").unwrap(), ALL_MODELS.to_vec());
        assert_eq!(ModelKind::parse_list("ALL").unwrap().len(), 11);
        assert_eq!(
            ModelKind::parse_list("rfr, dtc,rfr").unwrap(),
            vec![ModelKind::Rfr, ModelKind::Dtc]
        );
        assert!(matches!(
            ModelKind::parse_list("dtc,bogus"),
            Err(ModelError::UnknownCode(c)) if c == "bogus"
        ));
    }

    #[test]
    fn every_kind_fits_and_predicts_the_right_shape() {
        let data = toy_set();
        for kind in ALL_MODELS {
            let mut spec = ModelSpec::<f64>::new(kind, 42);
            if let Hyper::Grid(g) = &mut spec.hyper {
                // Keep the search tractable for a unit test.
                g.n_trees = vec![3];
                g.max_depth = vec![None];
                g.min_samples_leaf = vec![1];
            }
            let model = spec
                .fit(&data)
                .unwrap_or_else(|e| panic!("{} failed to fit: {e}", kind.code()));
            assert_eq!(model.n_features(), 5);
            assert_eq!(model.n_outputs(), 4);
            assert!(model.train_seconds >= 0.0);
            let pred = model.predict(data.features().row(0)).unwrap();
            assert_eq!(pred.len(), 4);
            match (kind.is_classifier(), &pred) {
                (true, Prediction::Labels(l)) => assert!(l.iter().all(|&v| v <= 2)),
                (false, Prediction::Values(v)) => assert!(v.iter().all(|f| f.is_finite())),
                _ => panic!("{kind} produced the wrong prediction flavor"),
            }
        }
    }

    #[test]
    fn fully_grown_trees_memorize_training_rows() {
        let data = toy_set();
        let dtc = ModelSpec::<f64>::new(ModelKind::Dtc, 0).fit(&data).unwrap();
        let dtr = ModelSpec::<f64>::new(ModelKind::Dtr, 0).fit(&data).unwrap();
        for r in 0..data.len() {
            let row = data.features().row(r);
            assert_eq!(
                dtc.predict(row).unwrap().labels().unwrap(),
                data.labels().row(r)
            );
            let lifted: Vec<f64> = data.labels().row(r).iter().map(|&l| l as f64).collect();
            assert_eq!(dtr.predict(row).unwrap().values().unwrap(), &lifted[..]);
        }
    }

    #[test]
    fn degenerate_forest_equals_the_plain_tree() {
        // One tree, no bootstrap, all features: the ensemble consumes no
        // randomness and must reproduce the single decision tree exactly.
        let data = toy_set();
        let probe = [0.9, 0.05, 0.61, 0.33, 0.47];
        for (single, plain) in [
            (ModelKind::Rfc, ModelKind::Dtc),
            (ModelKind::Rfr, ModelKind::Dtr),
        ] {
            let mut spec = ModelSpec::<f64>::new(single, 3);
            spec.hyper = Hyper::Forest(ForestParams {
                n_trees: 1,
                bootstrap: false,
                feature_mode: FeatureMode::All,
                tree: TreeParams::default(),
            });
            let forest = spec.fit(&data).unwrap();
            let tree = ModelSpec::<f64>::new(plain, 99).fit(&data).unwrap();
            assert_eq!(
                forest.predict(&probe).unwrap(),
                tree.predict(&probe).unwrap()
            );
            for r in 0..data.len() {
                let row = data.features().row(r);
                assert_eq!(forest.predict(row).unwrap(), tree.predict(row).unwrap());
            }
        }
    }

    #[test]
    fn save_load_round_trip_preserves_predictions() {
        let data = toy_set();
        let dir = tempdir().unwrap();
        let probe = [0.2, 0.8, 0.5, 0.1, 0.9];
        for kind in [
            ModelKind::Dtc,
            ModelKind::Rfr,
            ModelKind::Knc,
            ModelKind::Rr,
            ModelKind::Svr,
        ] {
            let model = ModelSpec::<f64>::new(kind, 11).fit(&data).unwrap();
            let path = dir.path().join(format!("{}.json", kind.code()));
            model.save(&path).unwrap();
            let loaded = TrainedModel::<f64>::load(&path).unwrap();
            assert_eq!(loaded.train_seconds, 0.0, "timing must not persist");
            assert_eq!(
                model.predict(&probe).unwrap(),
                loaded.predict(&probe).unwrap()
            );
            assert_eq!(model.spec, loaded.spec);
        }
    }

    #[test]
    fn saved_bytes_are_identical_across_refits() {
        let data = toy_set();
        let dir = tempdir().unwrap();
        let a = dir.path().join("a.json");
        let b = dir.path().join("b.json");
        ModelSpec::<f64>::new(ModelKind::Rfc, 5)
            .fit(&data)
            .unwrap()
            .save(&a)
            .unwrap();
        ModelSpec::<f64>::new(ModelKind::Rfc, 5)
            .fit(&data)
            .unwrap()
            .save(&b)
            .unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn format_version_gate_rejects_other_versions() {
        let data = toy_set();
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.json");
        let model = ModelSpec::<f64>::new(ModelKind::Dtc, 1).fit(&data).unwrap();
        model.save(&path).unwrap();
        let doctored = std::fs::read_to_string(&path).unwrap().replacen(
            "\"format_version\":1",
            "\"format_version\":999",
            1,
        );
        std::fs::write(&path, doctored).unwrap();
        assert!(matches!(
            TrainedModel::<f64>::load(&path),
            Err(ModelError::FormatVersion { found: 999, .. })
        ));
    }

    #[test]
    fn mismatched_hyper_family_is_rejected() {
        let mut spec = ModelSpec::<f64>::new(ModelKind::Dtc, 0);
        spec.hyper = Hyper::Knn(KnnParams::default());
        assert!(matches!(
            spec.validate(),
            Err(ModelError::HyperMismatch {
                kind: ModelKind::Dtc
            })
        ));
    }

    #[test]
    fn training_set_validation_catches_bad_inputs() {
        let x = Mat::from_vec(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let labels = ByteMat::from_vec(2, 2, vec![0, 1, 2, 1]).unwrap();
        assert!(TrainingSet::new(x.clone(), labels.clone()).is_ok());

        let bad = Mat::from_vec(2, 2, vec![0.1, 1.5, 0.3, 0.4]).unwrap();
        assert!(TrainingSet::new(bad, labels.clone()).is_err());
        let nan = Mat::from_vec(2, 2, vec![0.1, f64::NAN, 0.3, 0.4]).unwrap();
        assert!(TrainingSet::new(nan, labels.clone()).is_err());
        let bad_labels = ByteMat::from_vec(2, 2, vec![0, 1, 3, 1]).unwrap();
        assert!(TrainingSet::new(x.clone(), bad_labels).is_err());
        let short = ByteMat::from_vec(1, 2, vec![0, 1]).unwrap();
        assert!(TrainingSet::new(x, short).is_err());
    }

    #[test]
    fn predict_rejects_wrong_feature_count() {
        let data = toy_set();
        let model = ModelSpec::<f64>::new(ModelKind::Knc, 0).fit(&data).unwrap();
        assert!(matches!(
            model.predict(&[0.1, 0.2]),
            Err(ModelError::FeatureCount {
                expected: 5,
                got: 2
            })
        ));
    }

    #[test]
    fn prediction_lifts_labels_to_values() {
        let p = Prediction::<f64>::Labels(vec![0, 2, 1]);
        assert_eq!(p.to_values(), vec![0.0, 2.0, 1.0]);
        let v = Prediction::Values(vec![0.5, 1.5]);
        assert_eq!(v.to_values(), vec![0.5, 1.5]);
    }
}
