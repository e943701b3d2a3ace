//! Metrics, cross-model benchmarking, and physics roundtrip checks.
//!
//! Three layers:
//! * scalar metrics — pooled R² (grand-mean baseline over every sample ×
//!   pixel), mean squared error, and exact-match pixel accuracy;
//! * [`benchmark`] — fits a list of model specs on the training split and
//!   tabulates train/test metrics with wall-clock fit times, capturing
//!   per-model failures instead of aborting;
//! * [`roundtrip_model`] / [`roundtrip_images`] — closes the loop physical
//!   parameters → spectrum → predicted image → extracted parameters →
//!   re-simulated spectrum, judged against a ±5% parameter tolerance
//!   envelope around the true cell.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, Sample};
use crate::em::{absorption_spectrum, EmError, FrequencyGrid, LayerStack, Spectrum};
use crate::geometry::{rasterize, CellConfig, LabelImage, UnitCellParams};
use crate::linalg::{ByteMat, Mat};
use crate::models::{ModelKind, ModelSpec, Prediction, TrainedModel, TrainingSet};
use crate::postprocess::{extract_params, threshold, ExtractedParams, ThresholdCase};
use crate::scalar::{real, Real};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("shape mismatch: {a_rows}x{a_cols} vs {b_rows}x{b_cols}")]
    Shape {
        a_rows: usize,
        a_cols: usize,
        b_rows: usize,
        b_cols: usize,
    },
    #[error("need at least {need} entries, got {got}")]
    TooFew { need: usize, got: usize },
    #[error("truth values have zero total variance; R² is undefined")]
    ZeroVariance,
    #[error("tolerance corner ({corner}) is not simulable: {source}")]
    InvalidCorner { corner: String, source: EmError },
    #[error("forward simulation failed: {0}")]
    Simulation(#[from] EmError),
    #[error("{0}")]
    Invalid(String),
}

/// Pooled coefficient of determination: `1 − Σ(y−ŷ)² / Σ(y−ȳ)²` over every
/// entry, with `ȳ` the grand mean of the truth.
pub fn r2<T: Real>(y_true: &Mat<T>, y_pred: &Mat<T>) -> Result<T, EvalError> {
    check_shapes(y_true, y_pred)?;
    let total = y_true.rows() * y_true.cols();
    if total < 2 {
        return Err(EvalError::TooFew {
            need: 2,
            got: total,
        });
    }
    let n = T::from_usize(total).expect("entry count fits scalar");
    let mean = y_true.data().iter().fold(T::zero(), |a, &v| a + v) / n;
    let mut ss_res = T::zero();
    let mut ss_tot = T::zero();
    for (&t, &p) in y_true.data().iter().zip(y_pred.data()) {
        ss_res += (t - p) * (t - p);
        ss_tot += (t - mean) * (t - mean);
    }
    if !(ss_tot > T::zero()) {
        return Err(EvalError::ZeroVariance);
    }
    Ok(T::one() - ss_res / ss_tot)
}

/// Mean squared difference over every entry.
pub fn mse<T: Real>(y_true: &Mat<T>, y_pred: &Mat<T>) -> Result<T, EvalError> {
    check_shapes(y_true, y_pred)?;
    let total = y_true.rows() * y_true.cols();
    if total == 0 {
        return Err(EvalError::TooFew { need: 1, got: 0 });
    }
    let n = T::from_usize(total).expect("entry count fits scalar");
    let mut acc = T::zero();
    for (&t, &p) in y_true.data().iter().zip(y_pred.data()) {
        acc += (t - p) * (t - p);
    }
    Ok(acc / n)
}

/// Fraction of exactly matching labels.
pub fn pixel_accuracy(y_true: &ByteMat, y_pred: &ByteMat) -> Result<f64, EvalError> {
    if y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols() {
        return Err(EvalError::Shape {
            a_rows: y_true.rows(),
            a_cols: y_true.cols(),
            b_rows: y_pred.rows(),
            b_cols: y_pred.cols(),
        });
    }
    let total = y_true.rows() * y_true.cols();
    if total == 0 {
        return Err(EvalError::TooFew { need: 1, got: 0 });
    }
    let hits = y_true
        .data()
        .iter()
        .zip(y_pred.data())
        .filter(|(a, b)| a == b)
        .count();
    Ok(hits as f64 / total as f64)
}

fn check_shapes<T: Real>(a: &Mat<T>, b: &Mat<T>) -> Result<(), EvalError> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(EvalError::Shape {
            a_rows: a.rows(),
            a_cols: a.cols(),
            b_rows: b.rows(),
            b_cols: b.cols(),
        });
    }
    Ok(())
}

/// Benchmark knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkOptions {
    /// Retrain the support-vector row against images re-rasterized at this
    /// side (its dense kernel × pixel sweep is the one quadratic-cost model;
    /// `None` keeps the native resolution).
    pub svr_output_side: Option<usize>,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            svr_output_side: Some(32),
        }
    }
}

/// One benchmark line: metrics on both splits plus fit time. `metric` is
/// pixel accuracy for classifiers and pooled R² for regressors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub kind: ModelKind,
    /// Image side the model was trained against.
    pub output_side: usize,
    pub train_metric: Option<f64>,
    pub test_metric: Option<f64>,
    pub train_mse: Option<f64>,
    pub test_mse: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Rows sorted by test metric, best first; failed rows trail.
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkReport {
    /// Machine-readable form. Error text is flattened to keep one row per
    /// line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "model,output_side,train_metric,test_metric,train_mse,test_mse,seconds,error\n",
        );
        for row in &self.rows {
            let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let error = row.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                row.kind,
                row.output_side,
                fmt(row.train_metric),
                fmt(row.test_metric),
                fmt(row.train_mse),
                fmt(row.test_mse),
                row.seconds,
                error
            ));
        }
        out
    }

    /// Fixed-width text table; failures are footnoted below the table.
    pub fn to_table(&self) -> String {
        let headers = [
            "Model",
            "Train Accuracy",
            "Test Accuracy",
            "Train MSE",
            "Test MSE",
            "Execution Time (s)",
        ];
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
        let mut grid: Vec<[String; 6]> = vec![headers.map(String::from)];
        for row in &self.rows {
            grid.push([
                row.kind.to_string(),
                fmt(row.train_metric),
                fmt(row.test_metric),
                fmt(row.train_mse),
                fmt(row.test_mse),
                format!("{:.3}", row.seconds),
            ]);
        }
        let widths: Vec<usize> = (0..6)
            .map(|c| grid.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (i, row) in grid.iter().enumerate() {
            let line: Vec<String> = row
                .iter()
                .zip(&widths)
                .map(|(cell, &w)| format!("{cell:<w$}"))
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
            if i == 0 {
                let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
                out.push_str(&rule.join("  "));
                out.push('\n');
            }
        }
        for row in &self.rows {
            if let Some(err) = &row.error {
                out.push_str(&format!("note: {} failed: {err}\n", row.kind));
            }
        }
        out
    }
}

/// Fit every spec on the training split and score both splits.
pub fn benchmark(
    specs: &[ModelSpec<f64>],
    dataset: &Dataset,
    options: &BenchmarkOptions,
) -> Result<BenchmarkReport, EvalError> {
    let train = dataset.train_samples();
    let test = dataset.test_samples();
    let native = TrainingPair::build(&train, &test, None)?;
    let native_side = dataset
        .samples
        .first()
        .map(|s| s.image.side())
        .ok_or_else(|| EvalError::Invalid("dataset has no samples".into()))?;

    // The reduced-raster pair is built once, only if an SVR row wants it.
    let reduced = match options.svr_output_side {
        Some(side) if side != native_side && specs.iter().any(|s| s.kind == ModelKind::Svr) => {
            let cell = CellConfig {
                n: side,
                ..dataset.manifest.config.cell
            };
            Some((side, TrainingPair::build(&train, &test, Some(&cell))?))
        }
        _ => None,
    };

    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let (pair, side) = match (&reduced, spec.kind) {
            (Some((side, pair)), ModelKind::Svr) => (pair, *side),
            _ => (&native, native_side),
        };
        rows.push(score_one(spec, pair, side));
    }

    rows.sort_by(|a, b| {
        let key = |r: &BenchmarkRow| r.test_metric.unwrap_or(f64::NEG_INFINITY);
        key(b).partial_cmp(&key(a)).expect("metrics are finite")
    });
    Ok(BenchmarkReport { rows })
}

/// Train/test design matrices at one raster resolution.
struct TrainingPair {
    train: TrainingSet<f64>,
    test: TrainingSet<f64>,
}

impl TrainingPair {
    fn build(
        train: &[&Sample],
        test: &[&Sample],
        reraster: Option<&CellConfig<f64>>,
    ) -> Result<Self, EvalError> {
        let assemble = |samples: &[&Sample]| -> Result<TrainingSet<f64>, EvalError> {
            match reraster {
                None => TrainingSet::from_samples(samples)
                    .map_err(|e| EvalError::Invalid(e.to_string())),
                Some(cell) => {
                    let f = samples.first().map_or(0, |s| s.spectrum.len());
                    let mut x = Mat::zeros(samples.len(), f);
                    let mut labels = Vec::new();
                    for (r, s) in samples.iter().enumerate() {
                        x.row_mut(r).copy_from_slice(s.spectrum.values());
                        let image = rasterize(&s.params, cell)
                            .map_err(|e| EvalError::Invalid(e.to_string()))?;
                        labels.extend_from_slice(image.pixels());
                    }
                    let p = cell.n * cell.n;
                    let labels = ByteMat::from_vec(samples.len(), p, labels)
                        .ok_or_else(|| EvalError::Invalid("label shape".into()))?;
                    TrainingSet::new(x, labels).map_err(|e| EvalError::Invalid(e.to_string()))
                }
            }
        };
        Ok(TrainingPair {
            train: assemble(train)?,
            test: assemble(test)?,
        })
    }
}

fn score_one(spec: &ModelSpec<f64>, pair: &TrainingPair, side: usize) -> BenchmarkRow {
    let mut row = BenchmarkRow {
        kind: spec.kind,
        output_side: side,
        train_metric: None,
        test_metric: None,
        train_mse: None,
        test_mse: None,
        seconds: 0.0,
        error: None,
    };
    let started = std::time::Instant::now();
    let model = match spec.fit(&pair.train) {
        Ok(m) => m,
        Err(e) => {
            row.seconds = started.elapsed().as_secs_f64();
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.seconds = model.train_seconds;

    let eval_split = |set: &TrainingSet<f64>| -> Result<(f64, f64), EvalError> {
        let preds = model
            .predict_batch(set.features())
            .map_err(|e| EvalError::Invalid(e.to_string()))?;
        if spec.kind.is_classifier() {
            let mut data = Vec::with_capacity(set.len() * model.n_outputs());
            for p in &preds {
                data.extend_from_slice(p.labels().expect("classifier emits labels"));
            }
            let pred =
                ByteMat::from_vec(set.len(), model.n_outputs(), data).expect("prediction shape");
            let acc = pixel_accuracy(set.labels(), &pred)?;
            let m = mse(
                &crate::models::lift_labels::<f64>(set.labels()),
                &lift(&pred),
            )?;
            Ok((acc, m))
        } else {
            let mut pred = Mat::zeros(set.len(), model.n_outputs());
            for (r, p) in preds.iter().enumerate() {
                pred.row_mut(r)
                    .copy_from_slice(p.values().expect("regressor emits values"));
            }
            let truth = set.lifted();
            let score = r2(&truth, &pred)?;
            let m = mse(&truth, &pred)?;
            Ok((score, m))
        }
    };

    match eval_split(&pair.train) {
        Ok((metric, m)) => {
            row.train_metric = Some(metric);
            row.train_mse = Some(m);
        }
        Err(e) => {
            row.error = Some(format!("train evaluation: {e}"));
            return row;
        }
    }
    match eval_split(&pair.test) {
        Ok((metric, m)) => {
            row.test_metric = Some(metric);
            row.test_mse = Some(m);
        }
        Err(e) => row.error = Some(format!("test evaluation: {e}")),
    }
    row
}

fn lift(labels: &ByteMat) -> Mat<f64> {
    crate::models::lift_labels(labels)
}

/// Per-frequency absorption bounds from the ±5% parameter corner sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceEnvelope<T = f64> {
    pub freq_ghz: Vec<T>,
    pub env_min: Vec<T>,
    pub env_max: Vec<T>,
    /// Spectrum of the unperturbed parameters.
    pub nominal: Vec<T>,
}

impl<T: Real> ToleranceEnvelope<T> {
    /// Fraction of frequencies at which `spectrum` stays inside the band
    /// (bounds inclusive).
    pub fn inside_fraction(&self, spectrum: &[T]) -> T {
        let hits = self
            .env_min
            .iter()
            .zip(&self.env_max)
            .zip(spectrum)
            .filter(|((lo, hi), v)| **v >= **lo && **v <= **hi)
            .count();
        T::from_usize(hits).expect("count fits scalar")
            / T::from_usize(self.freq_ghz.len()).expect("count fits scalar")
    }
}

/// Sweep all 16 sign corners of ±5% on (b, c, d, e) plus the nominal cell
/// and take per-frequency extrema.
pub fn tolerance_envelope<T: Real>(
    params: &UnitCellParams<T>,
    stack: &LayerStack<T>,
    config: &CellConfig<T>,
    grid: &FrequencyGrid<T>,
) -> Result<ToleranceEnvelope<T>, EvalError> {
    let scales: [T; 2] = [real(0.95), real(1.05)];
    let mut variants: Vec<(String, UnitCellParams<T>)> = vec![("nominal".to_string(), *params)];
    for &sb in &scales {
        for &sc in &scales {
            for &sd in &scales {
                for &se in &scales {
                    variants.push((
                        format!("b*{sb:.2} c*{sc:.2} d*{sd:.2} e*{se:.2}"),
                        UnitCellParams::new(
                            params.b * sb,
                            params.c * sc,
                            params.d * sd,
                            params.e * se,
                        ),
                    ));
                }
            }
        }
    }

    let freq_ghz: Vec<T> = grid.iter().collect();
    let mut env_min = vec![T::infinity(); freq_ghz.len()];
    let mut env_max = vec![T::neg_infinity(); freq_ghz.len()];
    let mut nominal = Vec::new();
    for (corner, cell) in &variants {
        let spectrum = absorption_spectrum(cell, stack, config, grid).map_err(|source| {
            EvalError::InvalidCorner {
                corner: corner.clone(),
                source,
            }
        })?;
        for (i, &a) in spectrum.values().iter().enumerate() {
            env_min[i] = env_min[i].min(a);
            env_max[i] = env_max[i].max(a);
        }
        if nominal.is_empty() {
            nominal = spectrum.values().to_vec();
        }
    }
    Ok(ToleranceEnvelope {
        freq_ghz,
        env_min,
        env_max,
        nominal,
    })
}

/// Envelope plot data: `f_GHz,env_min,env_max,A_true,A_pred` per line.
pub fn envelope_csv<T: Real>(
    env: &ToleranceEnvelope<T>,
    a_pred: &[T],
) -> Result<String, EvalError> {
    if a_pred.len() != env.freq_ghz.len() {
        return Err(EvalError::Invalid(format!(
            "{} predicted points for {} frequencies",
            a_pred.len(),
            env.freq_ghz.len()
        )));
    }
    let mut out = String::from("f_GHz,env_min,env_max,A_true,A_pred\n");
    for (i, f) in env.freq_ghz.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            f, env.env_min[i], env.env_max[i], env.nominal[i], a_pred[i]
        ));
    }
    Ok(out)
}

/// Outcome of one sample's image → geometry → spectrum roundtrip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripRow {
    pub id: usize,
    pub extracted: Option<ExtractedParams<f64>>,
    /// Largest |A_true − A_resimulated| over the grid.
    pub max_abs_err: Option<f64>,
    /// Fraction of frequencies where the re-simulated spectrum stays inside
    /// the true cell's ±5% envelope.
    pub in_envelope_fraction: Option<f64>,
    /// The ±5% envelope around the true parameters.
    pub envelope: Option<ToleranceEnvelope<f64>>,
    /// Re-simulated spectrum from the extracted parameters.
    pub resimulated: Option<Spectrum<f64>>,
    pub error: Option<String>,
}

/// Roundtrip a model's predictions over `samples`. Regressor outputs pass
/// through `case` quantization; failures are recorded per sample.
pub fn roundtrip_model(
    model: &TrainedModel<f64>,
    samples: &[&Sample],
    case: ThresholdCase,
    config: &CellConfig<f64>,
    stack: &LayerStack<f64>,
    grid: &FrequencyGrid<f64>,
) -> Vec<RoundtripRow> {
    let side = (model.n_outputs() as f64).sqrt().round() as usize;
    samples
        .iter()
        .map(|sample| {
            if side * side != model.n_outputs() {
                return failed_row(sample.id, "model outputs are not a square image");
            }
            let image = match model.predict(sample.spectrum.values()) {
                Err(e) => return failed_row(sample.id, &e.to_string()),
                Ok(Prediction::Labels(labels)) => match LabelImage::new(side, labels) {
                    Ok(img) => img,
                    Err(e) => return failed_row(sample.id, &e.to_string()),
                },
                Ok(Prediction::Values(values)) => match threshold(&values, side, case) {
                    Ok(img) => img,
                    Err(e) => return failed_row(sample.id, &e.to_string()),
                },
            };
            roundtrip_one(sample, &image, config, stack, grid)
        })
        .collect()
}

/// Roundtrip already-available label images (e.g. the true rasters, as an
/// oracle baseline) against their samples.
pub fn roundtrip_images(
    images: &[LabelImage],
    samples: &[&Sample],
    config: &CellConfig<f64>,
    stack: &LayerStack<f64>,
    grid: &FrequencyGrid<f64>,
) -> Result<Vec<RoundtripRow>, EvalError> {
    if images.len() != samples.len() {
        return Err(EvalError::Invalid(format!(
            "{} images for {} samples",
            images.len(),
            samples.len()
        )));
    }
    Ok(images
        .iter()
        .zip(samples)
        .map(|(image, sample)| roundtrip_one(sample, image, config, stack, grid))
        .collect())
}

fn failed_row(id: usize, error: &str) -> RoundtripRow {
    RoundtripRow {
        id,
        extracted: None,
        max_abs_err: None,
        in_envelope_fraction: None,
        envelope: None,
        resimulated: None,
        error: Some(error.to_string()),
    }
}

fn roundtrip_one(
    sample: &Sample,
    image: &LabelImage,
    config: &CellConfig<f64>,
    stack: &LayerStack<f64>,
    grid: &FrequencyGrid<f64>,
) -> RoundtripRow {
    let envelope = match tolerance_envelope(&sample.params, stack, config, grid) {
        Ok(env) => env,
        Err(e) => return failed_row(sample.id, &e.to_string()),
    };
    let image_config = CellConfig {
        n: image.side(),
        ..*config
    };
    let extracted = match extract_params(image, &image_config) {
        Ok(x) => x,
        Err(e) => {
            let mut row = failed_row(sample.id, &e.to_string());
            row.envelope = Some(envelope);
            return row;
        }
    };
    let resim = match absorption_spectrum(&extracted.params, stack, config, grid) {
        Ok(s) => s,
        Err(e) => {
            let mut row = failed_row(sample.id, &e.to_string());
            row.extracted = Some(extracted);
            row.envelope = Some(envelope);
            return row;
        }
    };
    let max_abs_err = envelope
        .nominal
        .iter()
        .zip(resim.values())
        .map(|(t, p)| (t - p).abs())
        .fold(0.0f64, f64::max);
    let fraction = envelope.inside_fraction(resim.values());
    RoundtripRow {
        id: sample.id,
        extracted: Some(extracted),
        max_abs_err: Some(max_abs_err),
        in_envelope_fraction: Some(fraction),
        envelope: Some(envelope),
        resimulated: Some(resim),
        error: None,
    }
}

/// Per-sample roundtrip results as CSV.
pub fn roundtrip_csv(rows: &[RoundtripRow]) -> String {
    let mut out = String::from("id,b,c,d,e,merged,max_abs_err,in_envelope_fraction,error\n");
    for row in rows {
        let (b, c, d, e, merged) = match &row.extracted {
            Some(x) => (
                x.params.b.to_string(),
                x.params.c.to_string(),
                x.params.d.to_string(),
                x.params.e.to_string(),
                x.merged.to_string(),
            ),
            None => Default::default(),
        };
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let error = row.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.id,
            b,
            c,
            d,
            e,
            merged,
            fmt(row.max_abs_err),
            fmt(row.in_envelope_fraction),
            error
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Mat<f64> {
        Mat::from_vec(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn r2_reference_points() {
        let y = m(3, 1, &[0.0, 1.0, 2.0]);
        assert_eq!(r2(&y, &y).unwrap(), 1.0);

        let mean = m(3, 1, &[1.0, 1.0, 1.0]);
        assert_eq!(r2(&y, &mean).unwrap(), 0.0);

        let half = m(3, 1, &[0.0, 1.0, 1.0]);
        assert_abs_diff_eq!(r2(&y, &half).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn r2_rejects_degenerate_inputs() {
        let y = m(2, 1, &[1.0, 1.0]);
        assert!(matches!(r2(&y, &y), Err(EvalError::ZeroVariance)));

        let one = m(1, 1, &[1.0]);
        assert!(matches!(r2(&one, &one), Err(EvalError::TooFew { .. })));

        let y = m(2, 1, &[0.0, 1.0]);
        let wide = m(1, 2, &[0.0, 1.0]);
        assert!(matches!(r2(&y, &wide), Err(EvalError::Shape { .. })));
    }

    #[test]
    fn mse_and_accuracy_reference_points() {
        let y = m(3, 1, &[0.0, 1.0, 2.0]);
        let p = m(3, 1, &[0.0, 1.0, 1.0]);
        assert_abs_diff_eq!(mse(&y, &p).unwrap(), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(mse(&y, &y).unwrap(), 0.0);

        let yt = ByteMat::from_vec(3, 1, vec![0, 1, 2]).unwrap();
        let yp = ByteMat::from_vec(3, 1, vec![0, 1, 1]).unwrap();
        assert_abs_diff_eq!(
            pixel_accuracy(&yt, &yp).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-15
        );
        assert_eq!(pixel_accuracy(&yt, &yt).unwrap(), 1.0);

        let wrong = ByteMat::from_vec(1, 1, vec![2]).unwrap();
        let truth = ByteMat::from_vec(1, 1, vec![0]).unwrap();
        assert_eq!(pixel_accuracy(&truth, &wrong).unwrap(), 0.0);
    }

    #[test]
    fn exactness_links_accuracy_and_mse() {
        let yt = ByteMat::from_vec(2, 2, vec![0, 1, 2, 1]).unwrap();
        let yp = ByteMat::from_vec(2, 2, vec![0, 1, 2, 2]).unwrap();
        let acc = pixel_accuracy(&yt, &yp).unwrap();
        let err = mse(&lift(&yt), &lift(&yp)).unwrap();
        assert!(acc < 1.0 && err > 0.0);
        assert_eq!(pixel_accuracy(&yt, &yt).unwrap(), 1.0);
        assert_eq!(mse(&lift(&yt), &lift(&yt)).unwrap(), 0.0);
    }

    fn mid_cell() -> UnitCellParams<f64> {
        UnitCellParams::new(1.75, 0.55, 1.25, 0.55)
    }

    #[test]
    fn envelope_bounds_the_nominal_spectrum() {
        let config = CellConfig::<f64>::default();
        let stack = LayerStack::<f64>::default();
        let grid = FrequencyGrid::<f64>::default();
        let env = tolerance_envelope(&mid_cell(), &stack, &config, &grid).unwrap();
        assert_eq!(env.freq_ghz.len(), grid.len());
        let mut some_width = false;
        for i in 0..env.freq_ghz.len() {
            assert!(env.env_min[i] <= env.nominal[i]);
            assert!(env.nominal[i] <= env.env_max[i]);
            some_width |= env.env_max[i] > env.env_min[i];
        }
        assert!(some_width, "perturbations must move the spectrum somewhere");
        assert_eq!(env.inside_fraction(&env.nominal), 1.0);
    }

    #[test]
    fn envelope_names_the_violating_corner() {
        // Valid nominal geometry whose +5% d-scaling breaks the reach limit.
        let tight = UnitCellParams::new(0.85, 0.25, 2.35, 0.25);
        let config = CellConfig::<f64>::default();
        let stack = LayerStack::<f64>::default();
        let grid = FrequencyGrid::<f64>::default();
        assert!(tight.validate(&config).is_ok());
        let err = tolerance_envelope(&tight, &stack, &config, &grid).unwrap_err();
        match err {
            EvalError::InvalidCorner { corner, .. } => {
                assert!(corner.contains("d*1.05"), "corner was: {corner}");
            }
            other => panic!("expected InvalidCorner, got {other}"),
        }
    }

    #[test]
    fn oracle_images_roundtrip_inside_the_envelope() {
        let config = CellConfig::<f64>::with_resolution(400);
        let stack = LayerStack::<f64>::default();
        let grid = FrequencyGrid::<f64>::default();
        let cells = [mid_cell(), UnitCellParams::new(0.85, 0.25, 0.65, 0.25)];
        let samples: Vec<Sample> = cells
            .iter()
            .enumerate()
            .map(|(id, p)| Sample {
                id,
                params: *p,
                caps_merged: p.caps_merged(),
                spectrum: absorption_spectrum(p, &stack, &config, &grid).unwrap(),
                image: rasterize(p, &config).unwrap(),
            })
            .collect();
        let refs: Vec<&Sample> = samples.iter().collect();
        let images: Vec<LabelImage> = samples.iter().map(|s| s.image.clone()).collect();
        let rows = roundtrip_images(&images, &refs, &config, &stack, &grid).unwrap();
        for row in &rows {
            assert!(row.error.is_none(), "{:?}", row.error);
            assert_eq!(row.in_envelope_fraction, Some(1.0));
            assert!(row.max_abs_err.unwrap() < 1e-9);
            assert!(!row.extracted.unwrap().merged);
        }
        let csv = roundtrip_csv(&rows);
        assert_eq!(csv.lines().count(), 1 + rows.len());
        assert!(csv.starts_with("id,b,c,d,e,merged,"));
    }

    #[test]
    fn all_substrate_prediction_is_recorded_not_fatal() {
        let config = CellConfig::<f64>::default();
        let stack = LayerStack::<f64>::default();
        let grid = FrequencyGrid::<f64>::default();
        let cell = mid_cell();
        let sample = Sample {
            id: 7,
            params: cell,
            caps_merged: false,
            spectrum: absorption_spectrum(&cell, &stack, &config, &grid).unwrap(),
            image: rasterize(&cell, &config).unwrap(),
        };
        let blank = LabelImage::new(config.n, vec![0; config.n * config.n]).unwrap();
        let rows = roundtrip_images(&[blank], &[&sample], &config, &stack, &grid).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].error.is_some());
        assert!(rows[0].extracted.is_none());
    }

    #[test]
    fn envelope_csv_has_the_plot_columns() {
        let config = CellConfig::<f64>::default();
        let stack = LayerStack::<f64>::default();
        let grid = FrequencyGrid::<f64>::default();
        let env = tolerance_envelope(&mid_cell(), &stack, &config, &grid).unwrap();
        let csv = envelope_csv(&env, &env.nominal).unwrap();
        assert!(csv.starts_with("f_GHz,env_min,env_max,A_true,A_pred\n"));
        assert_eq!(csv.lines().count(), 1 + grid.len());
        assert!(envelope_csv(&env, &env.nominal[1..]).is_err());
    }
}
