//! From predicted images back to unit-cell parameters.
//!
//! Regressors emit real-valued pixel fields; [`threshold`] quantizes them to
//! the three material labels under one of three boundary cases.
//! [`extract_params`] then measures a Jerusalem-cross geometry from any
//! label image, and [`snap_to_grid`] maps the measurement onto the
//! catalogued parameter values.
//!
//! Extraction convention (the cross is centered and four-fold symmetric, so
//! one half-axis carries all the information): treat every non-substrate
//! pixel as metal, measure per-column metal extents on the +x half, take
//! the shaft width as the smallest metalized column extent, classify cap
//! columns as those strictly wider than the shaft, and read `e`, `b`, `d`
//! off the rightmost contiguous cap-column group. `c` is re-measured as the
//! thinnest run strictly between the center and the cap group, the window
//! where only the shaft crosses the center band.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    pixel_coordinate, CellConfig, LabelImage, UnitCellParams, GRID_B, GRID_C, GRID_D, GRID_E,
};
use crate::scalar::{real, Real};

#[derive(Debug, Error, PartialEq)]
pub enum PostprocessError {
    #[error("pixel ({row}, {col}) is not finite")]
    NonFinite { row: usize, col: usize },
    #[error("{got} values do not form a {side}x{side} image")]
    Shape { got: usize, side: usize },
    #[error("image side {image_side} does not match the configured resolution {config_n}")]
    ResolutionMismatch { image_side: usize, config_n: usize },
    #[error("no metalized pixels on the center row; nothing to extract")]
    NoMetal,
    #[error("no cap columns wider than the shaft; geometry too degenerate to extract")]
    NoCapGroup,
}

/// The three quantization boundary pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ThresholdCase {
    /// Bounds (0.4, 1.6).
    Case1,
    /// Bounds (0.5, 1.5); the pipeline default.
    #[default]
    Case2,
    /// Bounds (0.6, 1.4).
    Case3,
}

impl ThresholdCase {
    pub fn id(self) -> u8 {
        match self {
            ThresholdCase::Case1 => 1,
            ThresholdCase::Case2 => 2,
            ThresholdCase::Case3 => 3,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(ThresholdCase::Case1),
            2 => Some(ThresholdCase::Case2),
            3 => Some(ThresholdCase::Case3),
            _ => None,
        }
    }

    /// `(lower, upper)` label boundaries.
    pub fn bounds<T: Real>(self) -> (T, T) {
        match self {
            ThresholdCase::Case1 => (real(0.4), real(1.6)),
            ThresholdCase::Case2 => (real(0.5), real(1.5)),
            ThresholdCase::Case3 => (real(0.6), real(1.4)),
        }
    }
}

impl std::fmt::Display for ThresholdCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "case-{}", self.id())
    }
}

/// Quantize a row-major real-valued image to labels: `v < lower → 0`,
/// `lower ≤ v ≤ upper → 1`, `v > upper → 2` (both boundaries belong to
/// class 1).
pub fn threshold<T: Real>(
    values: &[T],
    side: usize,
    case: ThresholdCase,
) -> Result<LabelImage, PostprocessError> {
    if values.len() != side * side {
        return Err(PostprocessError::Shape {
            got: values.len(),
            side,
        });
    }
    let (lower, upper) = case.bounds::<T>();
    let mut labels = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(PostprocessError::NonFinite {
                row: i / side,
                col: i % side,
            });
        }
        labels.push(if v < lower {
            0
        } else if v <= upper {
            1
        } else {
            2
        });
    }
    Ok(LabelImage::new(side, labels).expect("labels are constructed in range"))
}

/// A measured geometry: parameter estimates, the per-parameter uncertainty
/// (one pixel pitch), and whether the estimate has merged caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractedParams<T = f64> {
    pub params: UnitCellParams<T>,
    /// One pixel pitch, in mm; applies to each of b, c, d, e.
    pub uncertainty: T,
    pub merged: bool,
}

/// Measure unit-cell parameters from a label image (any label ≠ 0 counts as
/// metal). See the module docs for the convention.
pub fn extract_params<T: Real>(
    image: &LabelImage,
    config: &CellConfig<T>,
) -> Result<ExtractedParams<T>, PostprocessError> {
    let side = image.side();
    if side != config.n {
        return Err(PostprocessError::ResolutionMismatch {
            image_side: side,
            config_n: config.n,
        });
    }
    let pitch = config.pitch();
    let coord = |k: usize| pixel_coordinate::<T>(k, side, config.p);

    // Half-span: furthest metalized pixel center on the center row.
    let center_row = side / 2;
    let mut half_span: Option<T> = None;
    for col in 0..side {
        if image.get(center_row, col) != 0 {
            let x = coord(col);
            half_span = Some(half_span.map_or(x, |s: T| s.max(x)));
        }
    }
    let half_span = half_span.ok_or(PostprocessError::NoMetal)?;

    // Per-column vertical extent: the contiguous metal run through the
    // center row (pixel count × pitch). Segments detached from the center
    // band — the caps of the vertical arm — must not count here, or they
    // would inflate every column within b/2 of the axis.
    let run_length = |col: usize| -> usize {
        if image.get(center_row, col) == 0 {
            return 0;
        }
        let mut lo = center_row;
        while lo > 0 && image.get(lo - 1, col) != 0 {
            lo -= 1;
        }
        let mut hi = center_row;
        while hi + 1 < side && image.get(hi + 1, col) != 0 {
            hi += 1;
        }
        hi - lo + 1
    };
    let runs: Vec<usize> = (0..side).map(run_length).collect();
    let extent = |col: usize| T::from_usize(runs[col]).expect("count fits scalar") * pitch;

    // Shaft width: thinnest metalized column between the center and the
    // half-span.
    let mut shaft: Option<T> = None;
    for (col, &run) in runs.iter().enumerate() {
        let x = coord(col);
        if x > T::zero() && x <= half_span && run > 0 {
            let v = extent(col);
            shaft = Some(shaft.map_or(v, |s: T| s.min(v)));
        }
    }
    let shaft = shaft.ok_or(PostprocessError::NoMetal)?;

    // Cap columns: strictly wider than the shaft, right of the shaft zone.
    // Keep the rightmost contiguous group.
    let two = T::one() + T::one();
    let is_cap = |col: usize| {
        let x = coord(col);
        x > shaft / two && runs[col] > 0 && extent(col) > shaft
    };
    let mut group: Option<(usize, usize)> = None; // inclusive column range
    let mut col = side;
    while col > 0 {
        col -= 1;
        if is_cap(col) {
            let hi = col;
            let mut lo = col;
            while lo > 0 && is_cap(lo - 1) {
                lo -= 1;
            }
            group = Some((lo, hi));
            break;
        }
    }
    let (lo, hi) = group.ok_or(PostprocessError::NoCapGroup)?;

    let e = T::from_usize(hi - lo + 1).expect("count fits scalar") * pitch;
    let b = (lo..=hi).map(extent).fold(T::zero(), |m, v| m.max(v));
    let d = (coord(lo) + coord(hi)) / two;

    // Re-measure the shaft strictly between the center and the cap group's
    // inner edge: in that window only the shaft crosses the center band, so
    // the thinnest run there is the arm width even when the crossing arm or
    // its caps are wider than the probe at any fixed fraction of `d` would
    // tolerate. On rasters too coarse to leave a column in the window, fall
    // back to the global minimum.
    let inner_edge = coord(lo);
    let mut narrow: Option<T> = None;
    for (col, &run) in runs.iter().enumerate() {
        let x = coord(col);
        if x > T::zero() && x < inner_edge && run > 0 {
            let v = extent(col);
            narrow = Some(narrow.map_or(v, |s: T| s.min(v)));
        }
    }
    let c = narrow.unwrap_or(shaft);

    let params = UnitCellParams::new(b, c, d, e);
    let merged = params.caps_merged();
    Ok(ExtractedParams {
        params,
        uncertainty: pitch,
        merged,
    })
}

/// Replace each parameter with the nearest catalogued value; equidistant
/// ties choose the smaller value.
///
/// Distances within 1e-6 mm count as equal, so decimal-equidistant inputs
/// (e.g. 1.00 between 0.85 and 1.15) tie downward instead of being decided
/// by rounding noise.
pub fn snap_to_grid<T: Real>(params: &UnitCellParams<T>) -> UnitCellParams<T> {
    fn nearest<T: Real>(v: T, grid: &[f64]) -> T {
        let tie = real::<T>(1e-6);
        let mut best = real::<T>(grid[0]);
        let mut best_dist = (v - best).abs();
        for &g in &grid[1..] {
            let g = real::<T>(g);
            let dist = (v - g).abs();
            if dist + tie < best_dist {
                best = g;
                best_dist = dist;
            }
        }
        best
    }
    UnitCellParams::new(
        nearest(params.b, &GRID_B),
        nearest(params.c, &GRID_C),
        nearest(params.d, &GRID_D),
        nearest(params.e, &GRID_E),
    )
}
