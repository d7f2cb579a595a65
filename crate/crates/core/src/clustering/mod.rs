//! K-means, agglomerative and spectral clustering plus the model-selection
//! heuristics (silhouette, elbow, eigengap) shared by both tiers.

mod agglomerative;
mod kmeans;
mod metrics;
mod select;
mod silhouette;
mod spectral;

pub use agglomerative::{agglomerative, linkage_tree, Dendrogram, Linkage, Merge};
pub use kmeans::{kmeans, kmeans_fit, KMeansFit, KMeansParams};
pub use metrics::adjusted_rand_index;
pub use select::{elbow_select, select_best, ClusterParams, Selection, SelectionRow};
pub use silhouette::{silhouette, silhouette_samples};
pub use spectral::{
    eigengap_select, local_scaling_affinity, normalized_laplacian, spectral, AffinityMatrix, SpectralEmbedding,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    KMeans,
    Agglomerative,
    Spectral,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Agglomerative => "agglomerative",
            Algorithm::Spectral => "spectral",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "kmeans" | "k-means" => Ok(Algorithm::KMeans),
            "agglomerative" | "hierarchical" => Ok(Algorithm::Agglomerative),
            "spectral" => Ok(Algorithm::Spectral),
            other => Err(Error::InvalidParam(format!("unknown algorithm '{other}'"))),
        }
    }
}

/// Cluster labels for N points, each label in `0..k` and every cluster
/// non-empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
    pub algorithm: Algorithm,
    pub params: BTreeMap<String, String>,
    pub inertia: Option<f64>,
    pub silhouette: Option<f64>,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize, algorithm: Algorithm) -> Self {
        debug_assert!(is_valid_labeling(&labels, k));
        ClusterAssignment {
            labels,
            k,
            algorithm,
            params: BTreeMap::new(),
            inertia: None,
            silhouette: None,
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Member indices per cluster id.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }
}

pub(crate) fn is_valid_labeling(labels: &[usize], k: usize) -> bool {
    let mut seen = vec![false; k];
    for &l in labels {
        if l >= k {
            return false;
        }
        seen[l] = true;
    }
    seen.into_iter().all(|s| s)
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        Err(Error::InvalidK { k, n })
    } else {
        Ok(())
    }
}
