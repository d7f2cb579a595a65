use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::numerics::DistanceMatrix;

/// Per-point silhouette `(b − a) / max(a, b)`; members of singleton clusters
/// score 0.
pub fn silhouette_samples(dist: &DistanceMatrix, labels: &[usize]) -> Result<Vec<f64>> {
    let n = dist.len();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!("{} labels for {} points", labels.len(), n)));
    }
    // Compact labels to 0..k.
    let mut remap = HashMap::new();
    let compact: Vec<usize> = labels
        .iter()
        .map(|l| {
            let next = remap.len();
            *remap.entry(*l).or_insert(next)
        })
        .collect();
    let k = remap.len();
    if k < 2 || k >= n {
        return Err(Error::SilhouetteUndefined { k, n });
    }
    let mut sizes = vec![0usize; k];
    for &c in &compact {
        sizes[c] += 1;
    }
    let mut sums = vec![0.0; k];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for j in 0..n {
            sums[compact[j]] += dist.get(i, j);
        }
        let own = compact[i];
        if sizes[own] == 1 {
            out.push(0.0);
            continue;
        }
        let a = sums[own] / (sizes[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own)
            .map(|c| sums[c] / sizes[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        out.push(if m > 0.0 { (b - a) / m } else { 0.0 });
    }
    Ok(out)
}

/// Mean silhouette over all points, in [-1, 1].
pub fn silhouette(dist: &DistanceMatrix, labels: &[usize]) -> Result<f64> {
    let s = silhouette_samples(dist, labels)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}
