//! Inverse design of Jerusalem-cross frequency-selective-surface absorbers.
//!
//! The pipeline runs in both directions:
//!
//! * **forward** — [`geometry`] rasterizes a parameterized unit cell into a
//!   three-label image (substrate / resistive film / conductor) and [`em`]
//!   evaluates its normal-incidence absorption spectrum through an
//!   equivalent-circuit transmission-line model;
//! * **inverse** — [`dataset`] sweeps the catalogued parameter grid into a
//!   reproducible training corpus, [`models`] fits spectrum → image
//!   estimators (trees, forests, nearest-neighbour, linear family, kernel
//!   regression, and a cross-validated forest search), and [`postprocess`]
//!   turns predicted images back into physical parameters.
//!
//! [`eval`] closes the loop: pooled metrics, a cross-model benchmark table,
//! and a roundtrip check that re-simulates extracted geometry against a ±5%
//! tolerance envelope of the true cell.
//!
//! Everything is deterministic for a fixed seed: random choices go through
//! seeded ChaCha streams, parallel reductions preserve index order, and
//! fitted models serialize to byte-stable JSON.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`). Type
//! defaults keep the common case quiet — `UnitCellParams` is
//! `UnitCellParams<f64>` — and `*32` aliases name the single-precision
//! variants.

// Validation code negates comparisons on purpose: `!(x > 0)` rejects NaN,
// which the "simplified" `x <= 0` would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod em;
pub mod eval;
pub mod geometry;
pub mod linalg;
pub mod models;
pub mod postprocess;
pub mod scalar;

pub use dataset::{Dataset, DatasetConfig, Sample};
pub use em::{absorption_spectrum, FrequencyGrid, LayerStack, Spectrum};
pub use eval::{benchmark, roundtrip_model, BenchmarkOptions, BenchmarkReport};
pub use geometry::{parameter_grid, rasterize, CellConfig, LabelImage, UnitCellParams};
pub use linalg::{ByteMat, Mat};
pub use models::{ModelKind, ModelSpec, TrainedModel, TrainingSet};
pub use postprocess::{extract_params, snap_to_grid, threshold, ThresholdCase};
pub use scalar::Real;

/// Single-precision unit-cell parameters.
pub type UnitCellParams32 = geometry::UnitCellParams<f32>;
/// Single-precision rasterization settings.
pub type CellConfig32 = geometry::CellConfig<f32>;
/// Single-precision substrate stack.
pub type LayerStack32 = em::LayerStack<f32>;
/// Single-precision frequency sweep.
pub type FrequencyGrid32 = em::FrequencyGrid<f32>;
/// Single-precision absorption spectrum.
pub type Spectrum32 = em::Spectrum<f32>;
/// Single-precision dense matrix.
pub type Mat32 = linalg::Mat<f32>;
/// Single-precision model specification.
pub type ModelSpec32 = models::ModelSpec<f32>;
/// Single-precision fitted model.
pub type TrainedModel32 = models::TrainedModel<f32>;
