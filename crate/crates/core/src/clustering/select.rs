use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    eigengap_select, kmeans_fit, linkage_tree, local_scaling_affinity, silhouette, Algorithm, ClusterAssignment,
    KMeansParams, Linkage, SpectralEmbedding,
};
use crate::error::{Error, Result};
use crate::numerics::{derive_seed, pairwise_euclidean};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterParams {
    pub seed: u64,
    pub max_iter: usize,
    pub n_init: usize,
    pub linkage: Linkage,
    pub n_neighbors: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            seed: 0,
            max_iter: 300,
            n_init: 10,
            linkage: Linkage::Ward,
            n_neighbors: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub k: usize,
    pub silhouette: f64,
    pub inertia: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub best: ClusterAssignment,
    pub table: Vec<SelectionRow>,
    /// k-means only: knee of the inertia curve over the candidates.
    pub elbow_k: Option<usize>,
    /// Spectral only: eigengap suggestion up to the largest candidate.
    pub eigengap_k: Option<usize>,
}

/// Knee of an inertia curve: the interior point farthest from the chord
/// joining the first and last points, after min-max scaling both axes to
/// [0, 1]. Ties go to the smaller k.
pub fn elbow_select(curve: &[(usize, f64)]) -> Result<usize> {
    if curve.len() < 3 {
        return Err(Error::InvalidParam(format!("elbow needs at least 3 points, got {}", curve.len())));
    }
    let mut pts = curve.to_vec();
    pts.sort_by_key(|p| p.0);
    if pts.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::InvalidParam("elbow curve has repeated k".into()));
    }
    if pts.windows(2).any(|w| w[1].1 > w[0].1) {
        log::warn!("inertia curve is not non-increasing in k");
    }
    let (k0, k1) = (pts[0].0 as f64, pts[pts.len() - 1].0 as f64);
    let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let norm = |p: &(usize, f64)| {
        let x = (p.0 as f64 - k0) / (k1 - k0);
        let y = if hi > lo { (p.1 - lo) / (hi - lo) } else { 0.0 };
        (x, y)
    };
    let (x0, y0) = norm(&pts[0]);
    let (x1, y1) = norm(&pts[pts.len() - 1]);
    let len = ((x1 - x0).powi(2) + (y1 - y0).powi(2)).sqrt();
    let mut best = (f64::NEG_INFINITY, pts[1].0);
    for p in &pts[1..pts.len() - 1] {
        let (x, y) = norm(p);
        let dist = ((x1 - x0) * (y0 - y) - (x0 - x) * (y1 - y0)).abs() / len;
        if dist > best.0 + 1e-12 {
            best = (dist, p.0);
        }
    }
    Ok(best.1)
}

/// Runs `algorithm` at every candidate k and keeps the highest silhouette
/// (ties to the smaller k). Silhouettes use Euclidean distances between the
/// input points. Per-k runs execute in parallel with seeds derived from
/// `(params.seed, k)` and are reported in ascending k.
pub fn select_best(
    points: ArrayView2<'_, f64>,
    algorithm: Algorithm,
    candidate_ks: &[usize],
    params: &ClusterParams,
) -> Result<Selection> {
    if candidate_ks.is_empty() {
        return Err(Error::InvalidParam("no candidate k values".into()));
    }
    let mut ks = candidate_ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let dist = pairwise_euclidean(points)?;

    let mut eigengap_k = None;
    let runs: Vec<ClusterAssignment> = match algorithm {
        Algorithm::KMeans => ks
            .par_iter()
            .map(|&k| {
                let p = KMeansParams {
                    k,
                    seed: derive_seed(params.seed, k as u64),
                    max_iter: params.max_iter,
                    n_init: params.n_init,
                };
                kmeans_fit(points, &p).map(|f| f.assignment)
            })
            .collect::<Result<_>>()?,
        Algorithm::Agglomerative => {
            let tree = linkage_tree(points, params.linkage)?;
            ks.iter()
                .map(|&k| {
                    let labels = tree.cut(k)?;
                    Ok(ClusterAssignment::new(labels, k, Algorithm::Agglomerative)
                        .with_param("linkage", params.linkage.name()))
                })
                .collect::<Result<_>>()?
        }
        Algorithm::Spectral => {
            let affinity = local_scaling_affinity(points, params.n_neighbors)?;
            let emb = SpectralEmbedding::new(&affinity)?;
            let n = points.nrows();
            let k_max = ks[ks.len() - 1].min(n.saturating_sub(1));
            if k_max >= 2 && n >= 3 {
                eigengap_k = Some(eigengap_select(emb.eigen.values.as_slice().expect("contiguous"), k_max)?);
            }
            ks.par_iter()
                .map(|&k| {
                    emb.cluster(k, derive_seed(params.seed, k as u64))
                        .map(|a| a.with_param("n_neighbors", params.n_neighbors))
                })
                .collect::<Result<_>>()?
        }
    };

    let mut table = Vec::with_capacity(runs.len());
    let mut best: Option<ClusterAssignment> = None;
    for mut run in runs {
        let s = silhouette(&dist, &run.labels)?;
        run.silhouette = Some(s);
        table.push(SelectionRow {
            k: run.k,
            silhouette: s,
            inertia: run.inertia,
        });
        if best.as_ref().is_none_or(|b| s > b.silhouette.unwrap_or(f64::NEG_INFINITY)) {
            best = Some(run);
        }
    }
    let elbow_k = if algorithm == Algorithm::KMeans && table.len() >= 3 {
        let curve: Vec<(usize, f64)> = table.iter().map(|r| (r.k, r.inertia.unwrap_or(0.0))).collect();
        Some(elbow_select(&curve)?)
    } else {
        None
    };
    Ok(Selection {
        best: best.expect("at least one candidate"),
        table,
        elbow_k,
        eigengap_k,
    })
}
