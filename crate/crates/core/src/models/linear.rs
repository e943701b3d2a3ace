//! Linear estimators: least squares, ridge, lasso, and elastic net.
//!
//! All four share one preparation: center features and targets, form the
//! Gram matrix `G = Xc'Xc` and cross products `B = Xc'Yc` once, and recover
//! the unpenalized intercept as `ȳ - x̄·W` afterwards.
//!
//! * Least squares and ridge solve `(G + n·λ·I) W = B` per output via one
//!   Cholesky factorization (least squares uses a tiny λ as a numerical
//!   stabilizer).
//! * Lasso and elastic net run cyclic coordinate descent on the objective
//!   `(1/2n)·||yc - Xc·w||² + λρ·||w||₁ + λ(1-ρ)/2·||w||²`, keeping the
//!   gradient cache `q = G·w` so one coordinate update costs O(F). Lasso is
//!   the ρ = 1 endpoint of the same loop, so the two coincide bitwise.
//!
//! A feature that is constant in training (zero centered variance) gets
//! weight exactly 0 in the descent path.

use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky_solve, Mat};
use crate::scalar::{real, Real};

/// Which penalty the estimator applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinearVariant {
    /// Ordinary least squares (λ acts only as a stabilizer).
    LeastSquares,
    /// Squared-norm penalty, closed form.
    Ridge,
    /// Absolute-norm penalty, coordinate descent.
    Lasso,
    /// Mixed penalty with mixing weight ρ, coordinate descent.
    ElasticNet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams<T = f64> {
    pub variant: LinearVariant,
    /// Penalty strength λ.
    pub lambda: T,
    /// L1 share ρ for the elastic net (lasso behaves as ρ = 1).
    pub rho: T,
    /// Convergence threshold on the largest coefficient change per sweep.
    pub tol: T,
    /// Hard cap on coordinate-descent sweeps.
    pub max_sweeps: usize,
}

impl<T: Real> LinearParams<T> {
    pub fn least_squares() -> Self {
        LinearParams {
            variant: LinearVariant::LeastSquares,
            lambda: real(1e-8),
            rho: real(0.0),
            tol: real(1e-6),
            max_sweeps: 1000,
        }
    }

    pub fn ridge() -> Self {
        LinearParams {
            variant: LinearVariant::Ridge,
            lambda: real(1.0),
            ..Self::least_squares()
        }
    }

    pub fn lasso() -> Self {
        LinearParams {
            variant: LinearVariant::Lasso,
            lambda: real(0.01),
            rho: real(1.0),
            ..Self::least_squares()
        }
    }

    pub fn elastic_net() -> Self {
        LinearParams {
            variant: LinearVariant::ElasticNet,
            lambda: real(0.01),
            rho: real(0.5),
            ..Self::least_squares()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.lambda >= T::zero()) || !self.lambda.is_finite() {
            return Err(format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            ));
        }
        if !(self.rho >= T::zero() && self.rho <= T::one()) {
            return Err(format!("rho must lie in [0, 1], got {}", self.rho));
        }
        if !(self.tol > T::zero()) {
            return Err(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_sweeps == 0 {
            return Err("max_sweeps must be >= 1".to_string());
        }
        Ok(())
    }
}

/// Fitted weights: one column of `weights` per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedLinear<T> {
    /// `F x P` weight matrix.
    pub(crate) weights: Mat<T>,
    /// Per-output intercepts.
    pub(crate) intercept: Vec<T>,
}

impl<T: Real> FittedLinear<T> {
    pub(crate) fn fit(x: &Mat<T>, y: &Mat<T>, params: &LinearParams<T>) -> Result<Self, String> {
        params.validate()?;
        let n = x.rows();
        let f = x.cols();
        let p = y.cols();
        let x_mean = x.col_means();
        let y_mean = y.col_means();

        let mut xc = x.clone();
        for r in 0..n {
            for (v, &m) in xc.row_mut(r).iter_mut().zip(&x_mean) {
                *v -= m;
            }
        }
        let mut yc = y.clone();
        for r in 0..n {
            for (v, &m) in yc.row_mut(r).iter_mut().zip(&y_mean) {
                *v -= m;
            }
        }

        let gram = xc.t_mul(&xc);
        let cross = xc.t_mul(&yc);

        let weights = match params.variant {
            LinearVariant::LeastSquares | LinearVariant::Ridge => {
                let n_t = T::from_usize(n).expect("sample count fits scalar");
                let mut lhs = gram;
                for j in 0..f {
                    let v = lhs.at(j, j) + n_t * params.lambda;
                    lhs.set(j, j, v);
                }
                cholesky_solve(&lhs, &cross).ok_or_else(|| {
                    "normal equations not positive definite; increase lambda".to_string()
                })?
            }
            LinearVariant::Lasso | LinearVariant::ElasticNet => {
                let rho = if params.variant == LinearVariant::Lasso {
                    T::one()
                } else {
                    params.rho
                };
                coordinate_descent(&gram, &cross, n, params, rho)
            }
        };

        let mut intercept = Vec::with_capacity(p);
        for (o, &ym) in y_mean.iter().enumerate() {
            let mut dot = T::zero();
            for (j, &xm) in x_mean.iter().enumerate() {
                dot += xm * weights.at(j, o);
            }
            intercept.push(ym - dot);
        }
        Ok(FittedLinear { weights, intercept })
    }

    pub(crate) fn predict(&self, features: &[T], out: &mut [T]) {
        out.copy_from_slice(&self.intercept);
        for (j, &v) in features.iter().enumerate() {
            for (acc, &w) in out.iter_mut().zip(self.weights.row(j)) {
                *acc += v * w;
            }
        }
    }

    /// Largest absolute slope, across all outputs.
    pub fn max_abs_weight(&self) -> T {
        self.weights
            .data()
            .iter()
            .fold(T::zero(), |m, &w| m.max(w.abs()))
    }
}

/// Cyclic coordinate descent on the centered elastic-net objective, run
/// independently per output over the shared Gram matrix.
fn coordinate_descent<T: Real>(
    gram: &Mat<T>,
    cross: &Mat<T>,
    n: usize,
    params: &LinearParams<T>,
    rho: T,
) -> Mat<T> {
    let f = gram.rows();
    let p = cross.cols();
    let n_t = T::from_usize(n).expect("sample count fits scalar");
    let l1 = params.lambda * rho;
    let l2 = params.lambda * (T::one() - rho);
    // Per-coordinate curvature of the smooth part: G_jj / n.
    let curvature: Vec<T> = (0..f).map(|j| gram.at(j, j) / n_t).collect();

    let mut weights = Mat::zeros(f, p);
    let mut w = vec![T::zero(); f];
    let mut q = vec![T::zero(); f];
    for o in 0..p {
        w.fill(T::zero());
        q.fill(T::zero()); // q = G·w, starting from w = 0
        for _sweep in 0..params.max_sweeps {
            let mut max_change = T::zero();
            for j in 0..f {
                let s = curvature[j];
                let new_w = if s.is_zero() {
                    // Constant feature: no signal, keep the slope at zero.
                    T::zero()
                } else {
                    // Partial residual correlation at coordinate j.
                    let z = (cross.at(j, o) - q[j]) / n_t + s * w[j];
                    soft_threshold(z, l1) / (s + l2)
                };
                let delta = new_w - w[j];
                if !delta.is_zero() {
                    for (qk, gk) in q.iter_mut().zip(gram.row(j)) {
                        *qk += delta * *gk;
                    }
                    w[j] = new_w;
                    max_change = max_change.max(delta.abs());
                }
            }
            if max_change < params.tol {
                break;
            }
        }
        for (j, &wj) in w.iter().enumerate() {
            weights.set(j, o, wj);
        }
    }
    weights
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
