//! Support-vector regression with an RBF kernel, fit independently per
//! output pixel over one shared kernel matrix.
//!
//! Each output solves the ε-insensitive problem in β-form (β_i is the net
//! dual coefficient of sample i, bounded by ±C; targets are centered per
//! output so no bias term is carried in the expansion):
//!
//! ```text
//!   minimize  ½·β'Kβ − β'yc + ε·||β||₁   subject to  |β_i| ≤ C
//! ```
//!
//! Cyclic coordinate descent updates one β_i at a time; a cached vector
//! `f = K·β` makes each update O(n). A sweep that changes nothing is an
//! exact fixpoint; otherwise the loop stops after ten consecutive sweeps
//! without meaningful progress or at the hard sweep cap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Mat;
use crate::scalar::{real, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvrParams<T = f64> {
    /// Box constraint on the dual coefficients.
    pub c: T,
    /// Half-width of the insensitive tube.
    pub epsilon: T,
    /// RBF width; `None` defaults to 1/F at fit time.
    pub gamma: Option<T>,
    /// Progress threshold on the largest coefficient change per sweep.
    pub tol: T,
    /// Hard cap on coordinate-descent sweeps per output.
    pub max_sweeps: usize,
    /// Consecutive low-progress sweeps tolerated before stopping.
    pub patience: usize,
}

impl<T: Real> Default for SvrParams<T> {
    fn default() -> Self {
        SvrParams {
            c: T::one(),
            epsilon: real(0.1),
            gamma: None,
            tol: real(1e-8),
            max_sweeps: 1000,
            patience: 10,
        }
    }
}

impl<T: Real> SvrParams<T> {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.c > T::zero()) {
            return Err(format!("c must be positive, got {}", self.c));
        }
        if !(self.epsilon >= T::zero()) {
            return Err(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if let Some(g) = self.gamma {
            if !(g > T::zero()) {
                return Err(format!("gamma must be positive, got {}", g));
            }
        }
        if !(self.tol > T::zero()) {
            return Err(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_sweeps == 0 || self.patience == 0 {
            return Err("max_sweeps and patience must be >= 1".to_string());
        }
        Ok(())
    }
}

/// Fitted state: training inputs, dual coefficients, and per-output means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSvr<T> {
    pub(crate) params: SvrParams<T>,
    pub(crate) gamma: T,
    /// Training feature matrix (`n x F`); every sample is kept.
    pub(crate) x: Mat<T>,
    /// Dual coefficients, `n x P`.
    pub(crate) beta: Mat<T>,
    /// Per-output target means removed before the dual solve.
    pub(crate) y_mean: Vec<T>,
}

impl<T: Real> FittedSvr<T> {
    pub(crate) fn fit(x: &Mat<T>, y: &Mat<T>, params: &SvrParams<T>) -> Result<Self, String> {
        params.validate()?;
        let n = x.rows();
        if n == 0 {
            return Err("cannot fit on an empty training set".to_string());
        }
        let gamma = params
            .gamma
            .unwrap_or_else(|| T::one() / T::from_usize(x.cols().max(1)).expect("fits scalar"));

        let kernel = rbf_kernel(x, x, gamma);
        let y_mean = y.col_means();
        let p = y.cols();

        let columns: Vec<Vec<T>> = (0..p)
            .into_par_iter()
            .map(|o| {
                let yc: Vec<T> = (0..n).map(|r| y.at(r, o) - y_mean[o]).collect();
                solve_output(&kernel, &yc, params)
            })
            .collect();

        let mut beta = Mat::zeros(n, p);
        for (o, col) in columns.iter().enumerate() {
            for (i, &b) in col.iter().enumerate() {
                beta.set(i, o, b);
            }
        }

        Ok(FittedSvr {
            params: *params,
            gamma,
            x: x.clone(),
            beta,
            y_mean: y_mean.to_vec(),
        })
    }

    pub(crate) fn predict(&self, features: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.y_mean);
        for i in 0..self.x.rows() {
            let k = rbf(self.x.row(i), features, self.gamma);
            if k.is_zero() {
                continue;
            }
            for (acc, &b) in out.iter_mut().zip(self.beta.row(i)) {
                *acc += k * b;
            }
        }
    }

    /// Largest absolute dual coefficient across all outputs.
    pub fn max_abs_beta(&self) -> T {
        self.beta
            .data()
            .iter()
            .fold(T::zero(), |m, &b| m.max(b.abs()))
    }
}

/// Coordinate descent for one output; returns the dual coefficients.
fn solve_output<T: Real>(kernel: &Mat<T>, yc: &[T], params: &SvrParams<T>) -> Vec<T> {
    let n = yc.len();
    let mut beta = vec![T::zero(); n];
    let mut f = vec![T::zero(); n]; // f = K·β
    let mut stalled = 0usize;
    for _sweep in 0..params.max_sweeps {
        let mut max_change = T::zero();
        let mut touched = false;
        for i in 0..n {
            let k_ii = kernel.at(i, i);
            if k_ii.is_zero() {
                continue;
            }
            let g = f[i] - yc[i];
            let raw = soft_threshold(k_ii * beta[i] - g, params.epsilon) / k_ii;
            let clipped = raw.max(-params.c).min(params.c);
            let delta = clipped - beta[i];
            if !delta.is_zero() {
                touched = true;
                beta[i] = clipped;
                for (fk, kk) in f.iter_mut().zip(kernel.row(i)) {
                    *fk += delta * *kk;
                }
                max_change = max_change.max(delta.abs());
            }
        }
        if !touched {
            break; // exact fixpoint
        }
        if max_change <= params.tol {
            stalled += 1;
            if stalled >= params.patience {
                break;
            }
        } else {
            stalled = 0;
        }
    }
    beta
}

#[inline]
fn soft_threshold<T: Real>(z: T, t: T) -> T {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        T::zero()
    }
}

#[inline]
fn rbf<T: Real>(a: &[T], b: &[T], gamma: T) -> T {
    let mut sq = T::zero();
    for (&ai, &bi) in a.iter().zip(b) {
        let d = ai - bi;
        sq += d * d;
    }
    (-gamma * sq).exp()
}

/// Dense kernel block between the rows of `a` and the rows of `b`.
fn rbf_kernel<T: Real>(a: &Mat<T>, b: &Mat<T>, gamma: T) -> Mat<T> {
    let mut k = Mat::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            k.set(i, j, rbf(a.row(i), b.row(j), gamma));
        }
    }
    k
}
