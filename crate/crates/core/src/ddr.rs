//! Drug–drug relationship (co-membership) graphs built from tier-1 clusters.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterAssignment;
use crate::error::{Error, Result};

/// Symmetric 0/1 adjacency over a fixed id order, zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DdrMatrix {
    pub ids: Vec<String>,
    pub data: Array2<u8>,
}

impl DdrMatrix {
    pub fn empty(ids: Vec<String>) -> Self {
        let n = ids.len();
        DdrMatrix {
            ids,
            data: Array2::zeros((n, n)),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of 1 entries (each undirected edge counted twice).
    pub fn nnz(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Upper-triangle edges as index pairs, row-major.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if self.data[[i, j]] == 1 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.data
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|&v| v as usize).sum())
            .collect()
    }

    /// `id_a,id_b` per upper-triangle edge, with a header line.
    pub fn to_edge_csv(&self) -> String {
        let mut out = String::from("id_a,id_b\n");
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{},{}", self.ids[i], self.ids[j]);
        }
        out
    }

    /// Rebuilds a matrix over `ids` from an edge-list CSV.
    pub fn from_edge_csv(ids: Vec<String>, text: &str) -> Result<Self> {
        let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        let mut data = Array2::zeros((ids.len(), ids.len()));
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        for row in reader.records() {
            let row = row?;
            let (a, b) = (row.get(0).unwrap_or(""), row.get(1).unwrap_or(""));
            let i = *pos.get(a).ok_or_else(|| Error::UnknownId(a.to_string()))?;
            let j = *pos.get(b).ok_or_else(|| Error::UnknownId(b.to_string()))?;
            if i == j {
                return Err(Error::Malformed {
                    what: "edge list".into(),
                    reason: format!("self-loop on {a}"),
                });
            }
            data[[i, j]] = 1;
            data[[j, i]] = 1;
        }
        Ok(DdrMatrix { ids, data })
    }
}

/// Co-membership matrix over `full_ids`: 1 where two distinct member drugs
/// share a cluster label. Drugs outside `member_ids` are isolated.
pub fn comembership(assign: &ClusterAssignment, member_ids: &[String], full_ids: &[String]) -> Result<DdrMatrix> {
    if assign.labels.len() != member_ids.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} member ids",
            assign.labels.len(),
            member_ids.len()
        )));
    }
    let pos: HashMap<&str, usize> = full_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut by_cluster: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (id, &label) in member_ids.iter().zip(&assign.labels) {
        let p = *pos.get(id.as_str()).ok_or_else(|| Error::UnknownId(id.clone()))?;
        by_cluster.entry(label).or_default().push(p);
    }
    let mut m = DdrMatrix::empty(full_ids.to_vec());
    for members in by_cluster.values() {
        for &i in members {
            for &j in members {
                if i != j {
                    m.data[[i, j]] = 1;
                }
            }
        }
    }
    Ok(m)
}

/// Elementwise logical OR of matrices sharing one id order.
pub fn fuse_or(matrices: &[DdrMatrix]) -> Result<DdrMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::InvalidParam("fuse_or needs at least one matrix".into()))?;
    let mut out = first.clone();
    for m in &matrices[1..] {
        if m.ids != out.ids {
            return Err(Error::IdMismatch);
        }
        out.data.zip_mut_with(&m.data, |a, &b| *a |= b);
    }
    Ok(out)
}

/// Fraction of zero cells among all N² cells.
pub fn sparsity(m: &DdrMatrix) -> f64 {
    let cells = m.data.len();
    if cells == 0 {
        return 1.0;
    }
    (cells - m.nnz()) as f64 / cells as f64
}

fn dot_quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Undirected DOT graph: node declarations then upper-triangle edges, both
/// sorted by id. Nodes missing from `labels` are labeled with their id.
pub fn export_dot(m: &DdrMatrix, labels: &BTreeMap<String, String>) -> String {
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| m.ids[a].cmp(&m.ids[b]));
    let mut out = String::from("graph ddr {\n");
    for &i in &order {
        let id = &m.ids[i];
        let label = labels.get(id).unwrap_or(id);
        let _ = writeln!(out, "  {} [label={}];", dot_quote(id), dot_quote(label));
    }
    let mut edges: Vec<(&str, &str)> = m
        .edges()
        .into_iter()
        .map(|(i, j)| {
            let (a, b) = (m.ids[i].as_str(), m.ids[j].as_str());
            if a <= b {
                (a, b)
            } else {
                (b, a)
            }
        })
        .collect();
    edges.sort_unstable();
    for (a, b) in edges {
        let _ = writeln!(out, "  {} -- {};", dot_quote(a), dot_quote(b));
    }
    out.push_str("}\n");
    out
}
