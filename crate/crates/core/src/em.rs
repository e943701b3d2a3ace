//! Equivalent-circuit forward solver for the grounded two-layer absorber.
//!
//! The patterned sheet is modelled as a series RLC whose elements follow
//! from the cell geometry; the sheet sits between a front dielectric slab
//! and a grounded back slab. Absorption is computed from the input
//! impedance of the ABCD cascade terminated in the ground plane.
//!
//! The absorption is evaluated in a rearranged form that is provably inside
//! `[0, 1]` in floating-point arithmetic, so no clamping is applied anywhere:
//! with `Z_in = B / D`,
//!
//! ```text
//! A = 1 - |Γ|²,  Γ = (Z_in - Z0) / (Z_in + Z0)
//!   = 4·Z0·Re(B·conj(D)) / (|B - Z0·D|² + 4·Z0·Re(B·conj(D)))
//! ```
//!
//! Both terms of the denominator are nonnegative for a passive network, so
//! the quotient cannot leave the unit interval, and a lossless stack yields
//! exactly zero because the cascade keeps `B` purely imaginary and `D`
//! purely real.

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CellConfig, GeometryError, UnitCellParams};
use crate::scalar::{real, Real};

/// Free-space wave impedance (ohm).
pub const Z0_OHM: f64 = 376.730313;
/// Speed of light in vacuum (m/s).
pub const C0_M_PER_S: f64 = 299_792_458.0;
/// Vacuum permittivity (F/m).
pub const EPS0_F_PER_M: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability (H/m).
pub const MU0_H_PER_M: f64 = 1.256_637_062_12e-6;

/// Errors from the circuit solver.
#[derive(Debug, Error)]
pub enum EmError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid layer stack: {0}")]
    InvalidStack(String),
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("frequency must be positive, got {0} GHz")]
    NonPositiveFrequency(f64),
    /// The inductance formula needs the arm narrower than the period.
    #[error("arm width must be below the period for the circuit model (c = {c} mm, p = {p} mm)")]
    ArmTooWide { c: f64, p: f64 },
    /// An absorption value left the unit interval — a solver defect, since
    /// the evaluation order is supposed to make this impossible.
    #[error("absorption {value} outside [0, 1] at spectrum entry {index}")]
    NonPassive { index: usize, value: f64 },
    /// Error attributable to one entry of a batch.
    #[error("sample {index}: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<EmError>,
    },
}

/// Dielectric stack and sheet-material description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerStack<T = f64> {
    /// Front slab thickness (mm), sheet side facing the incident wave.
    pub t1: T,
    /// Back slab thickness (mm), between sheet and ground plane.
    pub t3: T,
    /// Relative permittivity of both slabs.
    pub eps_r: T,
    /// Dielectric loss tangent.
    pub tan_d: T,
    /// Sheet resistance of the resistive strips (ohm per square).
    pub rs: T,
    /// Multiplier applied to the gap capacitance in the sheet impedance.
    pub kappa_c: T,
}

impl<T: Real> Default for LayerStack<T> {
    fn default() -> Self {
        LayerStack {
            t1: real(0.5),
            t3: real(1.5),
            eps_r: real(4.4),
            tan_d: real(0.02),
            rs: real(100.0),
            kappa_c: real(10.0),
        }
    }
}

impl<T: Real> LayerStack<T> {
    /// Check stack constraints: positive thicknesses summing to the fixed
    /// 2.0 mm substrate, `eps_r >= 1`, nonnegative losses, positive
    /// capacitance multiplier.
    pub fn validate(&self) -> Result<(), EmError> {
        if !(self.t1 > T::zero() && self.t3 > T::zero()) {
            return Err(EmError::InvalidStack(format!(
                "slab thicknesses must be positive, got t1 = {} mm, t3 = {} mm",
                self.t1, self.t3
            )));
        }
        let total = self.t1 + self.t3;
        if (total - real::<T>(2.0)).abs() > real::<T>(1e-9) {
            return Err(EmError::InvalidStack(format!(
                "t1 + t3 must equal 2.0 mm, got {total} mm"
            )));
        }
        if !(self.eps_r >= T::one()) {
            return Err(EmError::InvalidStack(format!(
                "relative permittivity must be >= 1, got {}",
                self.eps_r
            )));
        }
        if !(self.tan_d >= T::zero()) {
            return Err(EmError::InvalidStack(format!(
                "loss tangent must be >= 0, got {}",
                self.tan_d
            )));
        }
        if !(self.rs >= T::zero()) {
            return Err(EmError::InvalidStack(format!(
                "sheet resistance must be >= 0, got {} ohm/sq",
                self.rs
            )));
        }
        if !(self.kappa_c > T::zero()) {
            return Err(EmError::InvalidStack(format!(
                "capacitance multiplier must be positive, got {}",
                self.kappa_c
            )));
        }
        Ok(())
    }
}

/// Uniform frequency grid in GHz, inclusive of both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid<T = f64> {
    f_min: T,
    f_max: T,
    count: usize,
}

impl<T: Real> Default for FrequencyGrid<T> {
    /// 30 points from 1 to 30 GHz — consecutive points exactly 1 GHz apart.
    fn default() -> Self {
        FrequencyGrid {
            f_min: real(1.0),
            f_max: real(30.0),
            count: 30,
        }
    }
}

impl<T: Real> FrequencyGrid<T> {
    /// Build a grid; requires `1 <= f_min < f_max <= 30` and `count >= 2`.
    pub fn new(f_min: T, f_max: T, count: usize) -> Result<Self, EmError> {
        if count < 2 {
            return Err(EmError::InvalidGrid(format!(
                "need at least 2 frequency points, got {count}"
            )));
        }
        if !(f_min >= T::one()) {
            return Err(EmError::InvalidGrid(format!(
                "lower edge must be >= 1 GHz, got {f_min} GHz"
            )));
        }
        if !(f_max <= real::<T>(30.0)) {
            return Err(EmError::InvalidGrid(format!(
                "upper edge must be <= 30 GHz, got {f_max} GHz"
            )));
        }
        if !(f_min < f_max) {
            return Err(EmError::InvalidGrid(format!(
                "edges must be ordered, got [{f_min}, {f_max}] GHz"
            )));
        }
        Ok(FrequencyGrid {
            f_min,
            f_max,
            count,
        })
    }

    pub fn f_min(&self) -> T {
        self.f_min
    }

    pub fn f_max(&self) -> T {
        self.f_max
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Frequency of grid point `i`; endpoints are reproduced exactly.
    pub fn freq_ghz(&self, i: usize) -> T {
        debug_assert!(i < self.count);
        let idx = T::from_usize(i).expect("grid index fits scalar");
        let last = T::from_usize(self.count - 1).expect("grid size fits scalar");
        self.f_min + (self.f_max - self.f_min) * idx / last
    }

    pub fn iter(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.count).map(move |i| self.freq_ghz(i))
    }
}

/// Absorption values on a frequency grid, each guaranteed inside `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum<T = f64> {
    values: Vec<T>,
}

// Serialized as a bare list; deserialization re-runs the range check so the
// invariant survives a trip through JSON.
impl<T: Real + Serialize> Serialize for Spectrum<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.values.serialize(serializer)
    }
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for Spectrum<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let values = Vec::<T>::deserialize(deserializer)?;
        Spectrum::new(values).map_err(serde::de::Error::custom)
    }
}

impl<T: Real> Spectrum<T> {
    /// Wrap values, rejecting anything outside `[0, 1]` (NaN included).
    pub fn new(values: Vec<T>) -> Result<Self, EmError> {
        for (index, &v) in values.iter().enumerate() {
            if !(v >= T::zero() && v <= T::one()) {
                return Err(EmError::NonPassive {
                    index,
                    value: v.to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        Ok(Spectrum { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Series-RLC element values of the patterned sheet.
///
/// `c` is the bare gap capacitance; the sheet impedance scales it by the
/// stack's `kappa_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SheetRlc<T = f64> {
    /// Series resistance (ohm).
    pub r: T,
    /// Series inductance (H).
    pub l: T,
    /// Gap capacitance before the `kappa_c` scaling (F).
    pub c: T,
}

/// Compute the sheet RLC elements from the cell geometry.
///
/// With lengths converted to metres, `g = p - 2d - e` the cap-to-cap gap and
/// `eps_eff = (eps_r + 1) / 2` the air-dielectric average:
///
/// ```text
/// C = eps0 · eps_eff · (2b/π) · ln(1 / sin(πg / 2p))
/// L = (mu0 / 2π) · 2d · ln(1 / sin(πc / 2p))
/// R = Rs · l_r / c
/// ```
pub fn sheet_rlc<T: Real>(
    params: &UnitCellParams<T>,
    stack: &LayerStack<T>,
    config: &CellConfig<T>,
) -> Result<SheetRlc<T>, EmError> {
    config.validate()?;
    params.validate(config)?;
    stack.validate()?;
    if !(params.c < config.p) {
        return Err(EmError::ArmTooWide {
            c: params.c.to_f64().unwrap_or(f64::NAN),
            p: config.p.to_f64().unwrap_or(f64::NAN),
        });
    }

    let mm = real::<T>(1e-3);
    let two = real::<T>(2.0);
    let pi = T::PI();
    let p = config.p * mm;
    let b = params.b * mm;
    let c = params.c * mm;
    let d = params.d * mm;
    let e = params.e * mm;
    let l_r = config.l_r * mm;

    // Cap-to-cap gap along the arm axis; positive because validation
    // enforces 2d + e < p.
    let g = p - two * d - e;
    let eps_eff = (stack.eps_r + T::one()) / two;
    let cap = real::<T>(EPS0_F_PER_M)
        * eps_eff
        * (two * b / pi)
        * (T::one() / (pi * g / (two * p)).sin()).ln();
    let ind = real::<T>(MU0_H_PER_M) / (two * pi)
        * (two * d)
        * (T::one() / (pi * c / (two * p)).sin()).ln();
    let res = stack.rs * l_r / c;
    Ok(SheetRlc {
        r: res,
        l: ind,
        c: cap,
    })
}

/// Series resonance (GHz) of the sheet with the capacitance scaled by
/// `kappa_c`: `f0 = 1 / (2π sqrt(L · kappa_c · C))`.
pub fn resonance_ghz<T: Real>(rlc: &SheetRlc<T>, kappa_c: T) -> T {
    let two_pi = real::<T>(2.0) * T::PI();
    T::one() / (two_pi * (rlc.l * kappa_c * rlc.c).sqrt()) / real::<T>(1e9)
}

/// Sheet impedance at `f_ghz`: `Zs = R + jωL + 1 / (jω · kappa_c · C)`.
pub fn sheet_impedance<T: Real>(
    rlc: &SheetRlc<T>,
    kappa_c: T,
    f_ghz: T,
) -> Result<Complex<T>, EmError> {
    if !(f_ghz > T::zero()) {
        return Err(EmError::NonPositiveFrequency(
            f_ghz.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let w = real::<T>(2.0) * T::PI() * f_ghz * real::<T>(1e9);
    let reactance = w * rlc.l - T::one() / (w * kappa_c * rlc.c);
    Ok(Complex::new(rlc.r, reactance))
}

/// ABCD matrix of a two-port, complex entries.
#[derive(Debug, Clone, Copy)]
struct Abcd<T> {
    a: Complex<T>,
    b: Complex<T>,
    c: Complex<T>,
    d: Complex<T>,
}

/// Transmission matrix of a dielectric slab of thickness `t_mm` at `f_ghz`.
fn slab_abcd<T: Real>(stack: &LayerStack<T>, t_mm: T, f_ghz: T) -> Abcd<T> {
    let w = real::<T>(2.0) * T::PI() * f_ghz * real::<T>(1e9);
    // Complex permittivity with the e^{+jωt} convention: losses subtract.
    let eps_c = Complex::new(stack.eps_r, -stack.eps_r * stack.tan_d);
    let n_c = eps_c.sqrt();
    let zc = Complex::new(real::<T>(Z0_OHM), T::zero()) / n_c;
    let t_m = t_mm * real::<T>(1e-3);
    let theta = n_c * Complex::new(w / real::<T>(C0_M_PER_S) * t_m, T::zero());
    let cos = theta.cos();
    let sin = theta.sin();
    let j = Complex::new(T::zero(), T::one());
    Abcd {
        a: cos,
        b: j * zc * sin,
        c: j * sin / zc,
        d: cos,
    }
}

/// `B` and `D` of the cascade front-slab · sheet · back-slab.
///
/// `sheet` carries the sheet impedance; `None` removes the sheet entirely
/// (the study-support configuration without the patterned layer), and an
/// exactly-zero impedance short-circuits the cascade at the sheet plane.
fn cascade_bd<T: Real>(
    stack: &LayerStack<T>,
    sheet: Option<Complex<T>>,
    f_ghz: T,
) -> (Complex<T>, Complex<T>) {
    let front = slab_abcd(stack, stack.t1, f_ghz);
    if let Some(zs) = sheet {
        if zs.re.is_zero() && zs.im.is_zero() {
            // Ideal short at the sheet plane: the back slab and ground are
            // invisible, and the input impedance is that of the shorted
            // front slab.
            return (front.b, front.d);
        }
    }
    let back = slab_abcd(stack, stack.t3, f_ghz);
    let (mid_a, mid_b, mid_c, mid_d) = match sheet {
        Some(zs) => {
            let y = zs.inv();
            (
                front.a + front.b * y,
                front.b,
                front.c + front.d * y,
                front.d,
            )
        }
        None => (front.a, front.b, front.c, front.d),
    };
    let b = mid_a * back.b + mid_b * back.d;
    let d = mid_c * back.b + mid_d * back.d;
    (b, d)
}

/// Absorption from the cascade `B`, `D` with a ground-plane termination.
fn absorption_from_bd<T: Real>(b: Complex<T>, d: Complex<T>) -> T {
    let z0 = real::<T>(Z0_OHM);
    // 4·Z0·Re(Z_in)·|D|² — nonnegative for a passive network.
    let num = real::<T>(4.0) * z0 * (b * d.conj()).re;
    let diff = b - d * z0;
    let den = diff.norm_sqr() + num;
    num / den
}

fn spectrum_with_sheet<T: Real>(
    rlc: Option<&SheetRlc<T>>,
    stack: &LayerStack<T>,
    grid: &FrequencyGrid<T>,
) -> Result<Spectrum<T>, EmError> {
    let mut values = Vec::with_capacity(grid.len());
    for f in grid.iter() {
        let sheet = match rlc {
            Some(rlc) => Some(sheet_impedance(rlc, stack.kappa_c, f)?),
            None => None,
        };
        let (b, d) = cascade_bd(stack, sheet, f);
        values.push(absorption_from_bd(b, d));
    }
    Spectrum::new(values)
}

/// Absorption spectrum of a patterned cell on the given grid.
pub fn absorption_spectrum<T: Real>(
    params: &UnitCellParams<T>,
    stack: &LayerStack<T>,
    config: &CellConfig<T>,
    grid: &FrequencyGrid<T>,
) -> Result<Spectrum<T>, EmError> {
    let rlc = sheet_rlc(params, stack, config)?;
    spectrum_with_sheet(Some(&rlc), stack, grid)
}

/// Absorption at a single frequency.
pub fn absorption_at<T: Real>(
    params: &UnitCellParams<T>,
    stack: &LayerStack<T>,
    config: &CellConfig<T>,
    f_ghz: T,
) -> Result<T, EmError> {
    let rlc = sheet_rlc(params, stack, config)?;
    let zs = sheet_impedance(&rlc, stack.kappa_c, f_ghz)?;
    let (b, d) = cascade_bd(stack, Some(zs), f_ghz);
    let a = absorption_from_bd(b, d);
    Spectrum::new(vec![a])?;
    Ok(a)
}

/// Absorption spectrum of the bare grounded stack, sheet removed.
pub fn ground_stack_spectrum<T: Real>(
    stack: &LayerStack<T>,
    grid: &FrequencyGrid<T>,
) -> Result<Spectrum<T>, EmError> {
    stack.validate()?;
    spectrum_with_sheet(None, stack, grid)
}

/// Absorption spectra for a batch of cells, in input order.
///
/// The per-cell work is independent and runs on the global thread pool;
/// the first failing cell (by index) is reported.
pub fn absorption_batch<T: Real>(
    params: &[UnitCellParams<T>],
    stack: &LayerStack<T>,
    config: &CellConfig<T>,
    grid: &FrequencyGrid<T>,
) -> Result<Vec<Spectrum<T>>, EmError> {
    use rayon::prelude::*;
    let results: Vec<Result<Spectrum<T>, EmError>> = params
        .par_iter()
        .map(|p| absorption_spectrum(p, stack, config, grid))
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| EmError::Sample {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn mid_params() -> UnitCellParams<f64> {
        UnitCellParams::new(1.75, 0.55, 1.25, 0.55)
    }

    fn defaults() -> (LayerStack<f64>, CellConfig<f64>, FrequencyGrid<f64>) {
        (
            LayerStack::default(),
            CellConfig::default(),
            FrequencyGrid::default(),
        )
    }

    #[test]
    fn rlc_matches_hand_computed_values() {
        // Oracle: the three element formulas evaluated independently at the
        // mid-grid cell (b, c, d, e) = (1.75, 0.55, 1.25, 0.55) mm.
        let (stack, config, _) = defaults();
        let rlc = sheet_rlc(&mid_params(), &stack, &config).unwrap();
        assert_relative_eq!(rlc.r, 72.72727272727272, max_relative = 1e-12);
        assert_relative_eq!(rlc.l, 8.80336547892971e-10, max_relative = 1e-12);
        assert_relative_eq!(rlc.c, 1.4738424712884123e-14, max_relative = 1e-12);
        assert_relative_eq!(
            resonance_ghz(&rlc, stack.kappa_c),
            13.97237496201339,
            max_relative = 1e-12
        );
    }

    #[test]
    fn rlc_matches_hand_computed_values_second_cell() {
        // Same oracle at the first catalogued cell (0.85, 0.25, 0.65, 0.25).
        let (stack, config, _) = defaults();
        let p = UnitCellParams::new(0.85, 0.25, 0.65, 0.25);
        let rlc = sheet_rlc(&p, &stack, &config).unwrap();
        assert_relative_eq!(rlc.r, 160.0, max_relative = 1e-12);
        assert_relative_eq!(rlc.l, 6.617462448781433e-10, max_relative = 1e-12);
        assert_relative_eq!(rlc.c, 1.5984582877942795e-15, max_relative = 1e-12);
    }

    #[test]
    fn sheet_reactance_vanishes_at_resonance() {
        let (stack, config, _) = defaults();
        let rlc = sheet_rlc(&mid_params(), &stack, &config).unwrap();
        let f0 = resonance_ghz(&rlc, stack.kappa_c);
        let zs = sheet_impedance(&rlc, stack.kappa_c, f0).unwrap();
        assert_eq!(zs.re, rlc.r);
        // The reactance terms are each ~77 ohm at resonance; their
        // cancellation is exact up to rounding.
        assert_abs_diff_eq!(zs.im, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn interior_peak_sits_at_parallel_resonance() {
        // With the ground-plane inductance mu0·t3 in parallel, the absorbing
        // peak of the loaded stack sits at
        //   f_p = 1 / (2π sqrt((L + mu0·t3)·kappa_c·C)),
        // hand-evaluated to 7.8836 GHz for the mid-grid cell. Locate the
        // interior maximum on a fine grid and compare.
        let (stack, config, _) = defaults();
        let rlc = sheet_rlc(&mid_params(), &stack, &config).unwrap();
        let l_ground = MU0_H_PER_M * stack.t3 * 1e-3;
        let fp = 1.0
            / (2.0 * std::f64::consts::PI * ((rlc.l + l_ground) * stack.kappa_c * rlc.c).sqrt())
            / 1e9;
        assert_relative_eq!(fp, 7.8835910592550364, max_relative = 1e-12);

        let mut best_f = 0.0;
        let mut best_a = -1.0;
        let steps = 1200;
        for i in 0..=steps {
            let f = 2.0 + 12.0 * i as f64 / steps as f64;
            let a = absorption_at(&mid_params(), &stack, &config, f).unwrap();
            if a > best_a {
                best_a = a;
                best_f = f;
            }
        }
        // Genuine interior maximum, not a window edge.
        assert!(best_f > 2.5 && best_f < 13.5);
        assert!(
            best_a > 0.5,
            "peak absorption should be strong, got {best_a}"
        );
        assert_abs_diff_eq!(best_f, fp, epsilon = 2.0);
    }

    #[test]
    fn default_grid_is_thirty_integer_points() {
        let grid = FrequencyGrid::<f64>::default();
        assert_eq!(grid.len(), 30);
        let freqs: Vec<f64> = grid.iter().collect();
        for (i, f) in freqs.iter().enumerate() {
            assert_eq!(*f, (i + 1) as f64, "grid point {i} must be exact");
        }
    }

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(FrequencyGrid::new(0.5, 30.0, 30).is_err());
        assert!(FrequencyGrid::new(1.0, 31.0, 30).is_err());
        assert!(FrequencyGrid::new(10.0, 10.0, 30).is_err());
        assert!(FrequencyGrid::new(10.0, 5.0, 30).is_err());
        assert!(FrequencyGrid::new(1.0, 30.0, 1).is_err());
        assert!(FrequencyGrid::new(1.0, 30.0, 2).is_ok());
    }

    #[test]
    fn stack_validation_bounds() {
        let base = LayerStack::<f64>::default();
        assert!(base.validate().is_ok());
        // t1 alone drifts the total thickness off 2.0.
        assert!(LayerStack { t1: 0.6, ..base }.validate().is_err());
        // Rebalanced so t1 + t3 still sums to 2.0.
        let rebalanced = LayerStack {
            t1: 0.75,
            t3: 1.25,
            ..base
        };
        assert!(rebalanced.validate().is_ok());
        assert!(LayerStack { eps_r: 0.9, ..base }.validate().is_err());
        assert!(LayerStack {
            tan_d: -0.01,
            ..base
        }
        .validate()
        .is_err());
        assert!(LayerStack { rs: -1.0, ..base }.validate().is_err());
        assert!(LayerStack {
            kappa_c: 0.0,
            ..base
        }
        .validate()
        .is_err());
    }

    #[test]
    fn absorption_stays_passive_across_grid_cells() {
        let (stack, config, grid) = defaults();
        for p in crate::geometry::parameter_grid().iter().step_by(17) {
            let spec = absorption_spectrum(p, &stack, &config, &grid).unwrap();
            for &a in spec.values() {
                assert!((0.0..=1.0).contains(&a));
            }
        }
    }

    #[test]
    fn lossless_stack_absorbs_exactly_nothing() {
        let (mut stack, config, grid) = defaults();
        stack.tan_d = 0.0;
        stack.rs = 0.0;
        let spec = absorption_spectrum(&mid_params(), &stack, &config, &grid).unwrap();
        for &a in spec.values() {
            assert_eq!(a, 0.0, "lossless absorption must be exactly zero");
        }
        let bare = ground_stack_spectrum(&stack, &grid).unwrap();
        for &a in bare.values() {
            assert_eq!(a, 0.0);
        }
    }

    #[test]
    fn sheet_removal_changes_the_spectrum() {
        let (stack, config, grid) = defaults();
        let with = absorption_spectrum(&mid_params(), &stack, &config, &grid).unwrap();
        let without = ground_stack_spectrum(&stack, &grid).unwrap();
        assert_eq!(with.len(), without.len());
        let max_diff = with
            .values()
            .iter()
            .zip(without.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(max_diff > 0.1, "sheet must matter, max diff {max_diff}");
        // The bare lossy stack still absorbs a little, and stays passive.
        for &a in without.values() {
            assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn absorption_is_continuous_in_parameters() {
        let (stack, config, grid) = defaults();
        let base = absorption_spectrum(&mid_params(), &stack, &config, &grid).unwrap();
        let mut bumped = mid_params();
        bumped.b *= 1.001;
        bumped.d *= 0.999;
        let moved = absorption_spectrum(&bumped, &stack, &config, &grid).unwrap();
        let max_diff = base
            .values()
            .iter()
            .zip(moved.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(
            max_diff < 0.05,
            "0.1% geometry change moved A by {max_diff}"
        );
    }

    #[test]
    fn doubling_sheet_resistance_doubles_r() {
        let (mut stack, config, _) = defaults();
        let r1 = sheet_rlc(&mid_params(), &stack, &config).unwrap().r;
        stack.rs *= 2.0;
        let r2 = sheet_rlc(&mid_params(), &stack, &config).unwrap().r;
        assert_relative_eq!(r2, 2.0 * r1, max_relative = 1e-15);
    }

    #[test]
    fn batch_matches_individual_and_reports_index() {
        let (stack, config, grid) = defaults();
        let cells = [
            mid_params(),
            UnitCellParams::new(0.85, 0.25, 0.65, 0.25),
            UnitCellParams::new(2.55, 0.75, 1.95, 0.75),
        ];
        let batch = absorption_batch(&cells, &stack, &config, &grid).unwrap();
        for (p, s) in cells.iter().zip(&batch) {
            let single = absorption_spectrum(p, &stack, &config, &grid).unwrap();
            assert_eq!(s, &single);
        }

        let bad = [mid_params(), UnitCellParams::new(-1.0, 0.25, 0.65, 0.25)];
        let err = absorption_batch(&bad, &stack, &config, &grid).unwrap_err();
        match err {
            EmError::Sample { index, .. } => assert_eq!(index, 1),
            other => panic!("expected Sample error, got {other}"),
        }
    }

    #[test]
    fn single_precision_tracks_double() {
        let stack32 = LayerStack::<f32>::default();
        let config32 = CellConfig::<f32>::default();
        let grid32 = FrequencyGrid::<f32>::default();
        let p32 = UnitCellParams::<f32>::new(1.75, 0.55, 1.25, 0.55);
        let s32 = absorption_spectrum(&p32, &stack32, &config32, &grid32).unwrap();

        let (stack, config, grid) = defaults();
        let s64 = absorption_spectrum(&mid_params(), &stack, &config, &grid).unwrap();
        for (a32, a64) in s32.values().iter().zip(s64.values()) {
            assert_abs_diff_eq!(*a32 as f64, *a64, epsilon = 2e-3);
        }
    }

    #[test]
    fn spectrum_rejects_out_of_range() {
        assert!(Spectrum::new(vec![0.0, 0.5, 1.0]).is_ok());
        assert!(Spectrum::new(vec![-0.001]).is_err());
        assert!(Spectrum::new(vec![1.001]).is_err());
        assert!(Spectrum::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn zero_impedance_sheet_shorts_the_cascade() {
        // A zero sheet impedance must reflect everything except front-slab
        // dielectric loss; with a lossless front slab nothing is absorbed.
        let (mut stack, _, grid) = defaults();
        stack.tan_d = 0.0;
        for f in grid.iter() {
            let (b, d) = cascade_bd(&stack, Some(Complex::new(0.0, 0.0)), f);
            let a = absorption_from_bd(b, d);
            assert_eq!(a, 0.0);
        }
    }
}
