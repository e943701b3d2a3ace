//! k-nearest-neighbour classification over stored spectra.
//!
//! Fitting memorizes the training matrix; prediction ranks training rows by
//! squared Euclidean distance (ties broken by sample id) and takes a
//! per-output majority vote among the `k` closest, ties again resolved
//! toward the smallest class.

use serde::{Deserialize, Serialize};

use crate::linalg::{ByteMat, Mat};
use crate::scalar::Real;

use super::tree::N_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 5 }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be >= 1".to_string());
        }
        Ok(())
    }
}

/// Memorized training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedKnn<T> {
    pub(crate) k: usize,
    pub(crate) x: Mat<T>,
    pub(crate) labels: ByteMat,
}

impl<T: Real> FittedKnn<T> {
    pub(crate) fn fit(x: &Mat<T>, labels: &ByteMat, params: &KnnParams) -> Result<Self, String> {
        params.validate()?;
        if params.k > x.rows() {
            return Err(format!(
                "k = {} exceeds the {} training samples",
                params.k,
                x.rows()
            ));
        }
        Ok(FittedKnn {
            k: params.k,
            x: x.clone(),
            labels: labels.clone(),
        })
    }

    pub(crate) fn predict(&self, features: &[T], out: &mut [u8]) {
        let n = self.x.rows();
        let mut ranked: Vec<(T, u32)> = (0..n)
            .map(|s| {
                let row = self.x.row(s);
                let mut dist = T::zero();
                for (&a, &b) in row.iter().zip(features) {
                    let diff = a - b;
                    dist += diff * diff;
                }
                (dist, s as u32)
            })
            .collect();
        ranked.sort_unstable_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .expect("distances are finite")
                .then(a.1.cmp(&b.1))
        });
        ranked.truncate(self.k);

        if self.k == 1 {
            out.copy_from_slice(self.labels.row(ranked[0].1 as usize));
            return;
        }
        let p = self.labels.cols();
        let mut counts = vec![0u32; p * N_CLASSES];
        for &(_, s) in &ranked {
            for (o, &lab) in self.labels.row(s as usize).iter().enumerate() {
                counts[o * N_CLASSES + lab as usize] += 1;
            }
        }
        for o in 0..p {
            let slot = &counts[o * N_CLASSES..(o + 1) * N_CLASSES];
            let mut best = 0usize;
            for c in 1..N_CLASSES {
                if slot[c] > slot[best] {
                    best = c;
                }
            }
            out[o] = best as u8;
        }
    }
}
