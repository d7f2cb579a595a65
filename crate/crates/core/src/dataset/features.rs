use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::DrugTable;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImputePolicy {
    /// Columns whose missing fraction exceeds this are dropped.
    pub max_missing_fraction: f64,
}

impl Default for ImputePolicy {
    fn default() -> Self {
        ImputePolicy {
            max_missing_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub name: String,
    /// Value substituted for missing cells.
    pub median: f64,
    pub mean: f64,
    /// Population standard deviation after imputation.
    pub std: f64,
}

/// Standardized numeric node features, rows in table order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub columns: Vec<ColumnStats>,
    pub dropped: Vec<String>,
    pub data: Array2<f64>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Median-imputes and z-scores every numeric column.
///
/// Columns with too many missing cells are dropped and listed. Zero-variance
/// columns come out as all zeros.
pub fn build_feature_matrix(table: &DrugTable, policy: &ImputePolicy) -> Result<FeatureMatrix> {
    let n = table.len();
    let names = table.numeric_names();
    if names.is_empty() || n == 0 {
        return Err(Error::NoUsableFeatures);
    }
    let mut kept: Vec<(ColumnStats, Vec<f64>)> = Vec::new();
    let mut dropped = Vec::new();
    for (c, name) in names.iter().enumerate() {
        let raw: Vec<Option<f64>> = table.records().iter().map(|r| r.numeric[c]).collect();
        let mut present: Vec<f64> = raw.iter().flatten().copied().collect();
        let missing = (n - present.len()) as f64 / n as f64;
        if present.is_empty() || missing > policy.max_missing_fraction {
            dropped.push(name.clone());
            continue;
        }
        present.sort_by(f64::total_cmp);
        let med = median(&present);
        let filled: Vec<f64> = raw.iter().map(|v| v.unwrap_or(med)).collect();
        let mean = filled.iter().sum::<f64>() / n as f64;
        let var = filled.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        let scaled = if std <= 1e-12 * mean.abs().max(1.0) {
            vec![0.0; n]
        } else {
            filled.iter().map(|x| (x - mean) / std).collect()
        };
        kept.push((
            ColumnStats {
                name: name.clone(),
                median: med,
                mean,
                std,
            },
            scaled,
        ));
    }
    if kept.is_empty() {
        return Err(Error::NoUsableFeatures);
    }
    let mut data = Array2::zeros((n, kept.len()));
    for (j, (_, col)) in kept.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            data[[i, j]] = *v;
        }
    }
    Ok(FeatureMatrix {
        ids: table.ids(),
        columns: kept.into_iter().map(|(s, _)| s).collect(),
        dropped,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Category, DrugRecord};
    use proptest::prelude::*;

    fn table(cols: &[Vec<Option<f64>>]) -> DrugTable {
        let n = cols[0].len();
        let names: Vec<String> = (0..cols.len()).map(|c| format!("num_{c}")).collect();
        let recs = (0..n)
            .map(|i| {
                let mut r = DrugRecord::new(format!("d{i}"), Category::B, None);
                r.numeric = cols.iter().map(|c| c[i]).collect();
                r
            })
            .collect();
        DrugTable::new(recs, names).unwrap()
    }

    #[test]
    fn median_impute_then_zscore() {
        let t = table(&[vec![Some(1.0), Some(2.0), None, Some(3.0)]]);
        let fm = build_feature_matrix(&t, &ImputePolicy::default()).unwrap();
        let s = &fm.columns[0];
        assert_eq!(s.median, 2.0);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 0.5f64.sqrt()).abs() < 1e-15);
        let z: Vec<f64> = fm.data.column(0).to_vec();
        let r2 = 2f64.sqrt();
        for (a, b) in z.iter().zip([-r2, 0.0, 0.0, r2]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_is_zero() {
        let t = table(&[vec![Some(5.0); 3], vec![Some(1.0), Some(2.0), Some(4.0)]]);
        let fm = build_feature_matrix(&t, &ImputePolicy::default()).unwrap();
        assert!(fm.data.column(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mostly_missing_column_dropped() {
        let t = table(&[
            vec![Some(1.0), None, None, None, Some(2.0)],
            vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0), Some(5.0)],
        ]);
        let fm = build_feature_matrix(&t, &ImputePolicy::default()).unwrap();
        assert_eq!(fm.dropped, vec!["num_0"]);
        assert_eq!(fm.data.ncols(), 1);
    }

    #[test]
    fn exactly_half_missing_kept() {
        let t = table(&[vec![Some(1.0), None, Some(3.0), None]]);
        let fm = build_feature_matrix(&t, &ImputePolicy::default()).unwrap();
        assert!(fm.dropped.is_empty());
    }

    #[test]
    fn all_dropped_is_error() {
        let t = table(&[vec![None, None, Some(1.0)]]);
        let err = build_feature_matrix(&t, &ImputePolicy::default()).unwrap_err();
        assert_eq!(err.to_string(), "no usable numeric features");
    }

    proptest! {
        #[test]
        fn standardized_moments(col in prop::collection::vec(prop::option::weighted(0.8, -1e3f64..1e3), 4..40)) {
            prop_assume!(col.iter().filter(|v| v.is_some()).count() * 2 >= col.len());
            let fm = build_feature_matrix(&table(&[col]), &ImputePolicy::default()).unwrap();
            let c = fm.data.column(0);
            let n = c.len() as f64;
            let mean = c.sum() / n;
            let std = (c.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!(std == 0.0 || (std - 1.0).abs() < 1e-9);
        }
    }
}
