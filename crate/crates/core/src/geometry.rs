//! Unit-cell geometry: parameter validation, rasterization, and the PGM
//! image format used for label maps.
//!
//! The cell is a Jerusalem cross: four arms of width `c` reaching `d` from
//! the center, each ending in a perpendicular cap of length `b` and width
//! `e`, with a resistive strip of fixed length embedded halfway along each
//! arm. All lengths are millimetres.
//!
//! Rasterization samples pixel centers on a lattice chosen so that the
//! coordinates of mirrored pixels are exact negations of each other; the
//! produced label maps are therefore invariant under quarter-turn rotation
//! and axis mirroring bit for bit, not merely within tolerance.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{real, Real};

/// Background / dielectric pixels.
pub const LABEL_SUBSTRATE: u8 = 0;
/// Resistive-strip pixels.
pub const LABEL_RESISTIVE: u8 = 1;
/// Metal pixels (arms and caps).
pub const LABEL_CONDUCTOR: u8 = 2;

/// Catalogued cap lengths `b` (mm) of the design sweep.
pub const GRID_B: [f64; 7] = [0.85, 1.15, 1.45, 1.75, 2.05, 2.35, 2.55];
/// Catalogued arm widths `c` (mm) of the design sweep.
pub const GRID_C: [f64; 3] = [0.25, 0.55, 0.75];
/// Catalogued arm half-lengths `d` (mm) of the design sweep.
pub const GRID_D: [f64; 6] = [0.65, 0.95, 1.25, 1.55, 1.85, 1.95];
/// Catalogued cap widths `e` (mm) of the design sweep.
pub const GRID_E: [f64; 3] = [0.25, 0.55, 0.75];

/// Errors from parameter validation, rasterization, or PGM handling.
#[derive(Debug, Error)]
pub enum GeometryError {
    /// A cell parameter violates one of the documented constraints.
    #[error("invalid cell parameters: constraint `{constraint}` violated ({detail})")]
    InvalidParams {
        constraint: &'static str,
        detail: String,
    },
    /// The raster configuration itself is unusable.
    #[error("invalid cell config: {0}")]
    InvalidConfig(String),
    /// A PGM document failed to parse or describes an unsupported image.
    #[error("malformed PGM: {0}")]
    Pgm(String),
    /// Raw label data with impossible shape or label values.
    #[error("invalid label image: {0}")]
    InvalidImage(String),
}

/// Geometric parameters of one Jerusalem-cross cell, in millimetres.
///
/// * `b` — cap length (extent across the arm direction)
/// * `c` — arm width
/// * `d` — arm half-length (center of cell to cap center line)
/// * `e` — cap width (extent along the arm direction)
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCellParams<T = f64> {
    pub b: T,
    pub c: T,
    pub d: T,
    pub e: T,
}

impl<T: Real> UnitCellParams<T> {
    pub fn new(b: T, c: T, d: T, e: T) -> Self {
        UnitCellParams { b, c, d, e }
    }

    /// Check the geometric constraints against a cell configuration.
    ///
    /// All four lengths must be positive, the cross must fit inside the
    /// period (`2 * (d + e/2) < p`), and a cap may not exceed the period
    /// (`b <= p`).
    pub fn validate(&self, config: &CellConfig<T>) -> Result<(), GeometryError> {
        let checks: [(&'static str, bool); 4] = [
            ("b > 0", self.b > T::zero()),
            ("c > 0", self.c > T::zero()),
            ("d > 0", self.d > T::zero()),
            ("e > 0", self.e > T::zero()),
        ];
        for (constraint, ok) in checks {
            if !ok {
                return Err(GeometryError::InvalidParams {
                    constraint,
                    detail: format!("{self:?}"),
                });
            }
        }
        let two = real::<T>(2.0);
        let reach = two * (self.d + self.e / two);
        if !(reach < config.p) {
            return Err(GeometryError::InvalidParams {
                constraint: "2 * (d + e/2) < p",
                detail: format!("reach {reach} mm vs period {} mm", config.p),
            });
        }
        if !(self.b <= config.p) {
            return Err(GeometryError::InvalidParams {
                constraint: "b <= p",
                detail: format!("b {} mm vs period {} mm", self.b, config.p),
            });
        }
        Ok(())
    }

    /// Whether neighbouring caps touch or overlap (`b >= 2d - e`).
    ///
    /// When true, the four caps fuse into a closed loop and the gap the cap
    /// capacitance formula models no longer exists between them.
    pub fn caps_merged(&self) -> bool {
        self.b >= real::<T>(2.0) * self.d - self.e
    }
}

/// Raster and fixed-geometry configuration for a unit cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellConfig<T = f64> {
    /// Cell period (mm).
    pub p: T,
    /// Raster resolution; the label map is `n x n`.
    pub n: usize,
    /// Resistive-strip length along the arm (mm).
    pub l_r: T,
}

impl<T: Real> Default for CellConfig<T> {
    fn default() -> Self {
        CellConfig {
            p: real(5.0),
            n: 64,
            l_r: real(0.4),
        }
    }
}

impl<T: Real> CellConfig<T> {
    pub fn with_resolution(n: usize) -> Self {
        CellConfig {
            n,
            ..CellConfig::default()
        }
    }

    /// Check the raster constraints: `p > 0`, even `n >= 16`, and
    /// `0 < l_r < 0.65`.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.p > T::zero()) {
            return Err(GeometryError::InvalidConfig(format!(
                "period must be positive, got {} mm",
                self.p
            )));
        }
        if self.n < 16 || !self.n.is_multiple_of(2) {
            return Err(GeometryError::InvalidConfig(format!(
                "resolution must be an even integer >= 16, got {}",
                self.n
            )));
        }
        if !(self.l_r > T::zero() && self.l_r < real(0.65)) {
            return Err(GeometryError::InvalidConfig(format!(
                "strip length must lie in (0, 0.65) mm, got {} mm",
                self.l_r
            )));
        }
        Ok(())
    }

    /// Pixel pitch `p / n` (mm per pixel).
    pub fn pitch(&self) -> T {
        self.p / T::from_usize(self.n).expect("resolution fits scalar")
    }
}

/// Physical coordinate of a pixel center along one axis.
///
/// Index `k` of `side` pixels covering `[-period/2, period/2]` maps to
/// `(2k + 1 - side) * period / (2 * side)`. The numerator is an exact odd
/// integer, so the coordinates of `k` and `side - 1 - k` are exact IEEE
/// negations of one another — the property the bit-exact symmetry of the
/// rasterizer rests on.
#[inline]
pub fn pixel_coordinate<T: Real>(k: usize, side: usize, period: T) -> T {
    let m = 2 * k as i64 + 1 - side as i64;
    let m = T::from_i64(m).expect("pixel index fits scalar");
    let denom = T::from_usize(2 * side).expect("resolution fits scalar");
    m * period / denom
}

/// An `n x n` map of labels 0/1/2, row 0 at the top (+y).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelImage {
    side: usize,
    data: Vec<u8>,
}

impl LabelImage {
    /// Wrap raw labels; the length must be `side * side` and every value one
    /// of the three labels.
    pub fn new(side: usize, data: Vec<u8>) -> Result<Self, GeometryError> {
        if data.len() != side * side {
            return Err(GeometryError::InvalidImage(format!(
                "expected {} pixels for side {}, got {}",
                side * side,
                side,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().position(|&v| v > LABEL_CONDUCTOR) {
            return Err(GeometryError::InvalidImage(format!(
                "pixel {} has label {}, expected 0..=2",
                bad, data[bad]
            )));
        }
        Ok(LabelImage { side, data })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.side + col]
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> {
        self.data.chunks(self.side)
    }

    /// Quarter-turn rotation (clockwise).
    pub fn rotated_90(&self) -> Self {
        let n = self.side;
        let mut out = vec![0u8; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = self.data[(n - 1 - j) * n + i];
            }
        }
        LabelImage { side: n, data: out }
    }

    /// Half-turn rotation.
    pub fn rotated_180(&self) -> Self {
        let mut out = self.data.clone();
        out.reverse();
        LabelImage {
            side: self.side,
            data: out,
        }
    }

    /// Mirror about the vertical axis (left-right flip).
    pub fn mirrored_x(&self) -> Self {
        let n = self.side;
        let mut out = self.data.clone();
        for row in out.chunks_mut(n) {
            row.reverse();
        }
        LabelImage { side: n, data: out }
    }

    /// Mirror about the horizontal axis (top-bottom flip).
    pub fn mirrored_y(&self) -> Self {
        let n = self.side;
        let mut out = vec![0u8; n * n];
        for i in 0..n {
            out[i * n..(i + 1) * n].copy_from_slice(&self.data[(n - 1 - i) * n..(n - i) * n]);
        }
        LabelImage { side: n, data: out }
    }

    /// Fraction of pixels carrying a given label.
    pub fn label_fraction(&self, label: u8) -> f64 {
        let hits = self.data.iter().filter(|&&v| v == label).count();
        hits as f64 / self.data.len() as f64
    }

    /// Serialize as plain-text PGM (`P2`), maxval 2, one image row per line.
    pub fn to_pgm(&self) -> String {
        let mut s = String::with_capacity(self.data.len() * 2 + 32);
        s.push_str("P2\n");
        s.push_str(&format!("{} {}\n2\n", self.side, self.side));
        for row in self.rows() {
            let mut first = true;
            for &v in row {
                if !first {
                    s.push(' ');
                }
                s.push((b'0' + v) as char);
                first = false;
            }
            s.push('\n');
        }
        s
    }

    /// Parse a plain-text PGM produced by [`LabelImage::to_pgm`].
    ///
    /// Accepts any whitespace layout permitted for `P2`, requires a square
    /// image with maxval 2, and rejects trailing junk.
    pub fn from_pgm(text: &str) -> Result<Self, GeometryError> {
        let mut tokens = text.split_whitespace();
        let magic = tokens
            .next()
            .ok_or_else(|| GeometryError::Pgm("empty document".into()))?;
        if magic != "P2" {
            return Err(GeometryError::Pgm(format!(
                "expected magic `P2`, got `{magic}`"
            )));
        }
        let mut next_usize = |what: &str| -> Result<usize, GeometryError> {
            let tok = tokens
                .next()
                .ok_or_else(|| GeometryError::Pgm(format!("missing {what}")))?;
            tok.parse::<usize>()
                .map_err(|_| GeometryError::Pgm(format!("bad {what}: `{tok}`")))
        };
        let width = next_usize("width")?;
        let height = next_usize("height")?;
        let maxval = next_usize("maxval")?;
        if width != height {
            return Err(GeometryError::Pgm(format!(
                "expected square image, got {width}x{height}"
            )));
        }
        if maxval != 2 {
            return Err(GeometryError::Pgm(format!(
                "expected maxval 2, got {maxval}"
            )));
        }
        let mut data = Vec::with_capacity(width * height);
        for tok in tokens {
            let v: u8 = tok
                .parse()
                .map_err(|_| GeometryError::Pgm(format!("bad pixel `{tok}`")))?;
            if v > 2 {
                return Err(GeometryError::Pgm(format!(
                    "pixel value {v} exceeds maxval 2"
                )));
            }
            data.push(v);
        }
        if data.len() != width * height {
            return Err(GeometryError::Pgm(format!(
                "expected {} pixels, got {}",
                width * height,
                data.len()
            )));
        }
        LabelImage::new(width, data)
    }
}

/// Rasterize a unit cell into an `n x n` label map.
///
/// Pixel `(row, col)` samples the label at its center:
/// `x = pixel_coordinate(col)`, `y = -pixel_coordinate(row)` (row 0 on top).
/// A pixel is resistive when its center lies in a strip rectangle and not
/// under a cap, conductor when it lies in the cross (the strips replace the
/// arm metal along their span; caps take precedence over strips), and
/// substrate otherwise. Boundary points (centers exactly on a rectangle
/// edge) count as inside.
pub fn rasterize<T: Real>(
    params: &UnitCellParams<T>,
    config: &CellConfig<T>,
) -> Result<LabelImage, GeometryError> {
    config.validate()?;
    params.validate(config)?;

    let n = config.n;
    let two = real::<T>(2.0);
    let half_b = params.b / two;
    let half_c = params.c / two;
    let half_e = params.e / two;
    let half_d = params.d / two;
    let half_lr = config.l_r / two;
    let d = params.d;

    let coords: Vec<T> = (0..n).map(|k| pixel_coordinate(k, n, config.p)).collect();

    let mut data = vec![0u8; n * n];
    for i in 0..n {
        let y = -coords[i];
        let ay = y.abs();
        for j in 0..n {
            let x = coords[j];
            let ax = x.abs();

            let in_arm = (ax <= d && ay <= half_c) || (ay <= d && ax <= half_c);
            let in_cap = ((x - d).abs() <= half_e && ay <= half_b)
                || ((x + d).abs() <= half_e && ay <= half_b)
                || ((y - d).abs() <= half_e && ax <= half_b)
                || ((y + d).abs() <= half_e && ax <= half_b);
            let in_strip = ((x - half_d).abs() <= half_lr && ay <= half_c)
                || ((x + half_d).abs() <= half_lr && ay <= half_c)
                || ((y - half_d).abs() <= half_lr && ax <= half_c)
                || ((y + half_d).abs() <= half_lr && ax <= half_c);

            data[i * n + j] = if in_strip && !in_cap {
                LABEL_RESISTIVE
            } else if in_cap || in_arm {
                LABEL_CONDUCTOR
            } else {
                LABEL_SUBSTRATE
            };
        }
    }
    Ok(LabelImage { side: n, data })
}

/// The full catalogued parameter sweep, lexicographic in `(b, c, d, e)`.
///
/// Combinations whose cross would not fit the period are skipped, leaving
/// 378 valid cells for the default 5 mm period.
pub fn parameter_grid() -> Vec<UnitCellParams<f64>> {
    let config = CellConfig::<f64>::default();
    let mut out = Vec::new();
    for &b in &GRID_B {
        for &c in &GRID_C {
            for &d in &GRID_D {
                for &e in &GRID_E {
                    let p = UnitCellParams::new(b, c, d, e);
                    if p.validate(&config).is_ok() {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}
