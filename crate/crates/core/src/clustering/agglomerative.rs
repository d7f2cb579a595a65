use std::fmt::Write as _;
use std::str::FromStr;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{check_k, Algorithm, ClusterAssignment};
use crate::error::{Error, Result};
use crate::numerics::pairwise_euclidean;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Linkage {
    #[default]
    Ward,
    Single,
    Complete,
    Average,
}

impl FromStr for Linkage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "ward" => Ok(Linkage::Ward),
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            other => Err(Error::InvalidParam(format!("unknown linkage '{other}'"))),
        }
    }
}

impl Linkage {
    pub fn name(self) -> &'static str {
        match self {
            Linkage::Ward => "ward",
            Linkage::Single => "single",
            Linkage::Complete => "complete",
            Linkage::Average => "average",
        }
    }

    /// Lance–Williams distance from the union of clusters i and j (sizes
    /// `ni`, `nj`, separated by `dij`) to cluster k.
    fn update(self, dik: f64, djk: f64, dij: f64, ni: f64, nj: f64, nk: f64) -> f64 {
        match self {
            Linkage::Single => dik.min(djk),
            Linkage::Complete => dik.max(djk),
            Linkage::Average => (ni * dik + nj * djk) / (ni + nj),
            Linkage::Ward => {
                let num = (ni + nk) * dik * dik + (nj + nk) * djk * djk - nk * dij * dij;
                (num / (ni + nj + nk)).max(0.0).sqrt()
            }
        }
    }
}

/// One merge step. Singletons carry ids `0..n`; the cluster created by merge
/// `s` gets id `n + s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub a: usize,
    pub b: usize,
    pub height: f64,
    pub new_id: usize,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub n: usize,
    pub linkage: Linkage,
    pub merges: Vec<Merge>,
}

impl Dendrogram {
    /// Labels after replaying the first `n - k` merges, numbered by first
    /// appearance in point order.
    pub fn cut(&self, k: usize) -> Result<Vec<usize>> {
        check_k(k, self.n)?;
        let steps = self.n - k;
        if steps > self.merges.len() {
            return Err(Error::InvalidK { k, n: self.n });
        }
        let mut parent: Vec<usize> = (0..self.n + steps).collect();
        fn root(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for m in &self.merges[..steps] {
            parent[m.a] = m.new_id;
            parent[m.b] = m.new_id;
        }
        let mut label_of = std::collections::HashMap::new();
        let mut labels = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let r = root(&mut parent, i);
            let next = label_of.len();
            labels.push(*label_of.entry(r).or_insert(next));
        }
        Ok(labels)
    }

    /// One line per merge: `height cluster_a cluster_b new_id`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for m in &self.merges {
            let _ = writeln!(out, "{} {} {} {}", m.height, m.a, m.b, m.new_id);
        }
        out
    }
}

/// Full agglomerative merge tree over Euclidean distances.
///
/// Each step scans every active pair and merges the closest; equal heights
/// resolve to the lexicographically smallest (id_a, id_b) pair.
pub fn linkage_tree(points: ArrayView2<'_, f64>, linkage: Linkage) -> Result<Dendrogram> {
    let n = points.nrows();
    if n == 0 {
        return Err(Error::InvalidK { k: 1, n });
    }
    let mut d = pairwise_euclidean(points)?.into_inner();
    let mut active: Vec<usize> = (0..n).collect();
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<usize> = vec![1; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));

    while active.len() > 1 {
        let mut best: Option<(f64, (usize, usize), usize, usize)> = None;
        for (ai, &i) in active.iter().enumerate() {
            for &j in &active[ai + 1..] {
                let h = d[[i, j]];
                let key = (ids[i].min(ids[j]), ids[i].max(ids[j]));
                let better = match &best {
                    None => true,
                    Some((bh, bkey, _, _)) => h < *bh || (h == *bh && key < *bkey),
                };
                if better {
                    best = Some((h, key, i, j));
                }
            }
        }
        let (height, (a, b), i, j) = best.expect("at least two active clusters");
        let (ni, nj) = (sizes[i] as f64, sizes[j] as f64);
        for &k in &active {
            if k == i || k == j {
                continue;
            }
            let v = linkage.update(d[[i, k]], d[[j, k]], height, ni, nj, sizes[k] as f64);
            d[[i, k]] = v;
            d[[k, i]] = v;
        }
        let new_id = n + merges.len();
        sizes[i] += sizes[j];
        ids[i] = new_id;
        active.retain(|&x| x != j);
        merges.push(Merge {
            a,
            b,
            height,
            new_id,
            size: sizes[i],
        });
    }
    Ok(Dendrogram { n, linkage, merges })
}

/// Merges until `k` clusters remain; the returned history holds `n - k` steps.
pub fn agglomerative(
    points: ArrayView2<'_, f64>,
    k: usize,
    linkage: Linkage,
) -> Result<(ClusterAssignment, Dendrogram)> {
    check_k(k, points.nrows())?;
    let mut tree = linkage_tree(points, linkage)?;
    let labels = tree.cut(k)?;
    tree.merges.truncate(tree.n - k);
    let assignment = ClusterAssignment::new(labels, k, Algorithm::Agglomerative).with_param("linkage", linkage.name());
    Ok((assignment, tree))
}
