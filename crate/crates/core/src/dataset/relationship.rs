use std::collections::BTreeSet;

use ndarray::Array2;
use serde::Serialize;

use super::{DrugTable, FeatureKind};
use crate::error::{Error, Result};

/// Binary drug × feature-value incidence matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RelationshipMatrix {
    pub kind: FeatureKind,
    /// Drugs with a non-empty set for `kind`, in table order.
    pub rows: Vec<String>,
    /// Sorted union of feature values.
    pub cols: Vec<String>,
    pub data: Array2<u8>,
}

impl RelationshipMatrix {
    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    /// Rows as real-valued points for the clustering routines.
    pub fn to_points(&self) -> Array2<f64> {
        self.data.mapv(f64::from)
    }
}

pub fn build_relationship_matrix(table: &DrugTable, kind: FeatureKind) -> Result<RelationshipMatrix> {
    let members: Vec<_> = table
        .records()
        .iter()
        .filter(|r| !r.features(kind).is_empty())
        .collect();
    if members.is_empty() {
        return Err(Error::NoFeatureData(kind.to_string()));
    }
    let cols: Vec<String> = members
        .iter()
        .flat_map(|r| r.features(kind).iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut data = Array2::<u8>::zeros((members.len(), cols.len()));
    for (i, r) in members.iter().enumerate() {
        for v in r.features(kind) {
            let j = cols.binary_search(v).expect("value drawn from the union");
            data[[i, j]] = 1;
        }
    }
    Ok(RelationshipMatrix {
        kind,
        rows: members.iter().map(|r| r.id.clone()).collect(),
        cols,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Category, DrugRecord};
    use ndarray::array;

    fn with_targets(id: &str, targets: &[&str]) -> DrugRecord {
        let mut r = DrugRecord::new(id, Category::B, None);
        r.target = targets.iter().map(|s| s.to_string()).collect();
        r
    }

    #[test]
    fn definitional_example() {
        let t = DrugTable::new(vec![with_targets("d1", &["T1", "T2"]), with_targets("d2", &["T2"])], vec![]).unwrap();
        let m = build_relationship_matrix(&t, FeatureKind::Target).unwrap();
        assert_eq!(m.rows, vec!["d1", "d2"]);
        assert_eq!(m.cols, vec!["T1", "T2"]);
        assert_eq!(m.data, array![[1, 1], [0, 1]]);
    }

    #[test]
    fn drugs_without_feature_excluded() {
        let t = DrugTable::new(
            vec![with_targets("d1", &["a"]), with_targets("d2", &[]), with_targets("d3", &["b"])],
            vec![],
        )
        .unwrap();
        let m = build_relationship_matrix(&t, FeatureKind::Target).unwrap();
        assert_eq!(m.rows, vec!["d1", "d3"]);
        for row in m.data.rows() {
            assert!(row.iter().any(|&v| v == 1));
        }
        for col in m.data.columns() {
            assert!(col.iter().any(|&v| v == 1));
        }
    }

    #[test]
    fn no_data_is_error() {
        let t = DrugTable::new(vec![with_targets("d1", &["a"])], vec![]).unwrap();
        let err = build_relationship_matrix(&t, FeatureKind::Pathway).unwrap_err();
        assert_eq!(err.to_string(), "no data for feature kind pathway");
    }
}
