use std::ops::Deref;

use ndarray::{s, Array2, ArrayView2};

use super::{check_k, kmeans, Algorithm, ClusterAssignment};
use crate::error::{Error, Result};
use crate::numerics::{pairwise_euclidean, symmetric_eigen, EigenDecomposition, DEFAULT_EIGEN_TOL};

/// Symmetric similarity matrix with entries in [0, 1] and a unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(Array2<f64>);

impl AffinityMatrix {
    pub fn from_matrix(m: Array2<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch(format!("affinity is {}x{}", n, m.ncols())));
        }
        for i in 0..n {
            if m[[i, i]] != 1.0 {
                return Err(Error::InvalidParam(format!("affinity diagonal at {i} is not 1")));
            }
            for j in 0..n {
                let v = m[[i, j]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParam(format!("affinity entry ({i},{j}) = {v} outside [0,1]")));
                }
                if v != m[[j, i]] {
                    return Err(Error::Asymmetric {
                        max_dev: (v - m[[j, i]]).abs(),
                    });
                }
            }
        }
        Ok(AffinityMatrix(m))
    }
}

impl Deref for AffinityMatrix {
    type Target = Array2<f64>;

    fn deref(&self) -> &Array2<f64> {
        &self.0
    }
}

/// Self-tuning affinity `exp(-d²/(σ_i σ_j))`, with σ_i the distance from
/// point i to its `n_neighbors`-th nearest neighbour.
///
/// Coincident points get affinity 1. A pair at positive distance where one
/// σ is zero gets 0.
pub fn local_scaling_affinity(points: ArrayView2<'_, f64>, n_neighbors: usize) -> Result<AffinityMatrix> {
    let n = points.nrows();
    if n_neighbors == 0 || n_neighbors >= n {
        return Err(Error::InvalidParam(format!(
            "n_neighbors must be in [1, {}), got {n_neighbors}",
            n
        )));
    }
    let d = pairwise_euclidean(points)?;
    let sigma: Vec<f64> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d.get(i, j)).collect();
            row.sort_by(f64::total_cmp);
            row[n_neighbors - 1]
        })
        .collect();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        a[[i, i]] = 1.0;
        for j in (i + 1)..n {
            let dij = d.get(i, j);
            let scale = sigma[i] * sigma[j];
            let v = if dij == 0.0 {
                1.0
            } else if scale == 0.0 {
                0.0
            } else {
                (-dij * dij / scale).exp()
            };
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    Ok(AffinityMatrix(a))
}

/// `I − D^{-1/2} A D^{-1/2}` with D the row sums of A.
pub fn normalized_laplacian(a: &AffinityMatrix) -> Array2<f64> {
    let n = a.nrows();
    let inv_sqrt: Vec<f64> = a
        .rows()
        .into_iter()
        .map(|r| {
            let deg: f64 = r.sum();
            if deg > 0.0 {
                1.0 / deg.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let off = inv_sqrt[i] * a[[i, j]] * inv_sqrt[j];
            l[[i, j]] = if i == j { 1.0 - off } else { -off };
        }
    }
    // Exact symmetry for the eigensolver.
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (l[[i, j]] + l[[j, i]]);
            l[[i, j]] = v;
            l[[j, i]] = v;
        }
    }
    l
}

/// k in `[2, k_max]` maximizing `λ_{k+1} − λ_k` (1-based, ascending values);
/// ties go to the smaller k.
pub fn eigengap_select(eigenvalues: &[f64], k_max: usize) -> Result<usize> {
    let count = eigenvalues.len();
    if count < 3 {
        return Err(Error::InvalidParam(format!("eigengap needs at least 3 eigenvalues, got {count}")));
    }
    if k_max < 2 || k_max >= count {
        return Err(Error::InvalidParam(format!("k_max must be in [2, {count}), got {k_max}")));
    }
    let mut best_k = 2;
    let mut best_gap = f64::NEG_INFINITY;
    for k in 2..=k_max {
        let gap = eigenvalues[k] - eigenvalues[k - 1];
        if gap > best_gap + 1e-12 {
            best_gap = gap;
            best_k = k;
        }
    }
    Ok(best_k)
}

/// Eigendecomposition of the normalized Laplacian, reusable across k.
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub eigen: EigenDecomposition,
}

impl SpectralEmbedding {
    pub fn new(a: &AffinityMatrix) -> Result<Self> {
        let l = normalized_laplacian(a);
        Ok(SpectralEmbedding {
            eigen: symmetric_eigen(&l, DEFAULT_EIGEN_TOL)?,
        })
    }

    /// First `k` eigenvectors as columns, each row scaled to unit norm
    /// (all-zero rows stay zero).
    pub fn embedding(&self, k: usize) -> Array2<f64> {
        let mut e = self.eigen.vectors.slice(s![.., ..k]).to_owned();
        for mut row in e.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|v| v / norm);
            }
        }
        e
    }

    pub fn cluster(&self, k: usize, seed: u64) -> Result<ClusterAssignment> {
        let n = self.eigen.values.len();
        if k < 2 {
            return Err(Error::InvalidK { k, n });
        }
        check_k(k, n)?;
        let km = kmeans(self.embedding(k).view(), k, seed, 300, 10)?;
        let mut out = ClusterAssignment::new(km.labels, k, Algorithm::Spectral).with_param("seed", seed);
        out.inertia = None;
        Ok(out)
    }
}

/// Normalized spectral clustering: k smallest Laplacian eigenvectors,
/// row-normalized, then k-means.
pub fn spectral(a: &AffinityMatrix, k: usize, seed: u64) -> Result<ClusterAssignment> {
    SpectralEmbedding::new(a)?.cluster(k, seed)
}
