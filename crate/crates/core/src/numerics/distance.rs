use std::ops::Deref;

use ndarray::{Array2, ArrayView1, ArrayView2};

use super::check_finite;
use crate::error::{Error, Result};

/// Symmetric N×N matrix of pairwise distances with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix(Array2<f64>);

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[[i, j]]
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Wraps a precomputed matrix after checking shape, symmetry and diagonal.
    pub fn from_matrix(m: Array2<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "distance matrix is {}x{}",
                n,
                m.ncols()
            )));
        }
        check_finite(m.view())?;
        for i in 0..n {
            if m[[i, i]] != 0.0 {
                return Err(Error::InvalidParam(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                if m[[i, j]] != m[[j, i]] || m[[i, j]] < 0.0 {
                    return Err(Error::Asymmetric {
                        max_dev: (m[[i, j]] - m[[j, i]]).abs(),
                    });
                }
            }
        }
        Ok(DistanceMatrix(m))
    }
}

impl Deref for DistanceMatrix {
    type Target = Array2<f64>;

    fn deref(&self) -> &Array2<f64> {
        &self.0
    }
}

/// Euclidean distance between two equal-length vectors.
pub fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let t = x - y;
        acc += t * t;
    }
    acc.sqrt()
}

/// Euclidean distances between all rows of `points`.
///
/// Sums squared coordinate differences directly, so identical rows get
/// exactly zero and the result is never negative.
pub fn pairwise_euclidean(points: ArrayView2<'_, f64>) -> Result<DistanceMatrix> {
    let (n, f) = points.dim();
    if f == 0 {
        return Err(Error::InvalidParam("points need at least one column".into()));
    }
    check_finite(points)?;
    let mut d = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        let xi = points.row(i);
        for j in (i + 1)..n {
            let v = euclidean(xi, points.row(j));
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    Ok(DistanceMatrix(d))
}
