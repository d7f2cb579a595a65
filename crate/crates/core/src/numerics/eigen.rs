use ndarray::{Array1, Array2};

use super::check_finite;
use crate::error::{Error, Result};

pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-9;

/// Eigenpairs of a real symmetric matrix, eigenvalues ascending.
/// Column `i` of `vectors` pairs with `values[i]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Array1<f64>,
    pub vectors: Array2<f64>,
}

/// Cyclic Jacobi eigensolver.
///
/// Sweeps over every upper-triangle pair (p, q), annihilating `a[p][q]` with
/// a plane rotation and accumulating the rotations into the eigenvector
/// matrix. Stops once the off-diagonal Frobenius norm drops below
/// `tol * max(1, ‖A‖_F)` or after 100 sweeps.
pub fn symmetric_eigen(a: &Array2<f64>, tol: f64) -> Result<EigenDecomposition> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "eigen input is {}x{}",
            n,
            a.ncols()
        )));
    }
    check_finite(a.view())?;
    let mut max_dev = 0.0f64;
    for i in 0..n {
        for j in 0..i {
            max_dev = max_dev.max((a[[i, j]] - a[[j, i]]).abs());
        }
    }
    if max_dev >= SYMMETRY_TOL {
        return Err(Error::Asymmetric { max_dev });
    }

    // Work on the symmetrized matrix in a flat row-major buffer.
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let frob = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let threshold = tol * frob.max(1.0);
    let off_norm = |m: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += m[i * n + j] * m[i * n + j];
                }
            }
        }
        s.sqrt()
    };

    let mut residual = off_norm(&m);
    let mut sweeps = 0;
    while residual >= threshold {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence { sweeps, residual });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // Columns p and q.
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                // Rows p and q.
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
        sweeps += 1;
        residual = off_norm(&m);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].total_cmp(&m[j * n + j]).then(i.cmp(&j)));
    let values = Array1::from_iter(order.iter().map(|&i| m[i * n + i]));
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, dst]] = v[k * n + src];
        }
    }
    Ok(EigenDecomposition { values, vectors })
}
