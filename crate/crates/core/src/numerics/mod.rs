//! Dense kernels shared by the clustering and autoencoder code.

mod distance;
mod eigen;
mod rng;

pub use distance::{euclidean, pairwise_euclidean, DistanceMatrix};
pub use eigen::{symmetric_eigen, EigenDecomposition, DEFAULT_EIGEN_TOL};
pub use rng::{derive_seed, SeededStream};

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Returns the first non-finite entry as an error.
pub(crate) fn check_finite(m: ArrayView2<'_, f64>) -> Result<()> {
    for ((row, col), v) in m.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Largest absolute row sum.
pub fn inf_norm(m: &Array2<f64>) -> f64 {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
