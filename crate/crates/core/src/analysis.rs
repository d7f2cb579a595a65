//! Post-clustering analysis: trial-rich clusters, phase-prioritized candidate
//! ranking and feature-value frequencies.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterAssignment;
use crate::dataset::{Category, DrugTable, FeatureKind, Phase};
use crate::error::{Error, Result};
use crate::numerics::euclidean;

pub const DEFAULT_INTEREST_THRESHOLD: f64 = 0.55;
pub const DEFAULT_TOP_N: usize = 15;

const FRACTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub cluster_id: usize,
    pub members: Vec<String>,
    pub count_a: usize,
    pub count_b: usize,
    pub fraction_a: f64,
    pub of_interest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub rank: usize,
    pub drug_id: String,
    pub name: String,
    pub cluster_id: usize,
    pub nearest_trial_id: String,
    pub nearest_phase: Phase,
    pub distance: f64,
}

fn check_aligned(assign: &ClusterAssignment, table: &DrugTable) -> Result<()> {
    if assign.labels.len() != table.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} drugs",
            assign.labels.len(),
            table.len()
        )));
    }
    Ok(())
}

/// One report per non-empty cluster, ordered by cluster id. A cluster is of
/// interest when its trial-drug fraction is at least `threshold`.
pub fn clusters_of_interest(
    assign: &ClusterAssignment,
    table: &DrugTable,
    threshold: f64,
) -> Result<Vec<ClusterReport>> {
    check_aligned(assign, table)?;
    let mut by_label: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in assign.labels.iter().enumerate() {
        by_label.entry(l).or_default().push(i);
    }
    Ok(by_label
        .into_iter()
        .map(|(cluster_id, rows)| {
            let records = table.records();
            let count_a = rows.iter().filter(|&&i| records[i].category == Category::A).count();
            let count_b = rows.len() - count_a;
            let fraction_a = count_a as f64 / rows.len() as f64;
            ClusterReport {
                cluster_id,
                members: rows.iter().map(|&i| records[i].id.clone()).collect(),
                count_a,
                count_b,
                fraction_a,
                of_interest: fraction_a >= threshold - FRACTION_TOL,
            }
        })
        .collect())
}

fn candidate_order(a: &RankedCandidate, b: &RankedCandidate) -> Ordering {
    a.nearest_phase
        .cmp(&b.nearest_phase)
        .then(a.distance.total_cmp(&b.distance))
        .then_with(|| a.drug_id.cmp(&b.drug_id))
}

/// Ranks category-B drugs in clusters of interest by the phase of their
/// nearest same-cluster trial drug, then by that distance, then by id.
///
/// `z` rows are aligned with `table`. Distances are Euclidean in `z`.
pub fn rank_candidates(
    z: ArrayView2<'_, f64>,
    assign: &ClusterAssignment,
    table: &DrugTable,
    reports: &[ClusterReport],
    top_n: usize,
) -> Result<Vec<RankedCandidate>> {
    check_aligned(assign, table)?;
    if z.nrows() != table.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} embedding rows for {} drugs",
            z.nrows(),
            table.len()
        )));
    }
    let records = table.records();
    let mut out = Vec::new();
    for report in reports.iter().filter(|r| r.of_interest) {
        let rows: Vec<usize> = report
            .members
            .iter()
            .map(|id| table.position(id).ok_or_else(|| Error::UnknownId(id.clone())))
            .collect::<Result<_>>()?;
        let trials: Vec<usize> = rows.iter().copied().filter(|&i| records[i].category == Category::A).collect();
        assert!(!trials.is_empty(), "cluster of interest {} has no trial drugs", report.cluster_id);
        for &i in rows.iter().filter(|&&i| records[i].category == Category::B) {
            let (j, distance) = trials
                .iter()
                .map(|&j| (j, euclidean(z.row(i), z.row(j))))
                .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| records[a.0].id.cmp(&records[b.0].id)))
                .expect("non-empty");
            out.push(RankedCandidate {
                rank: 0,
                drug_id: records[i].id.clone(),
                name: records[i].name.clone(),
                cluster_id: report.cluster_id,
                nearest_trial_id: records[j].id.clone(),
                nearest_phase: records[j].phase.expect("trial drugs carry a phase"),
                distance,
            });
        }
    }
    out.sort_by(candidate_order);
    out.truncate(top_n);
    for (r, c) in out.iter_mut().enumerate() {
        c.rank = r + 1;
    }
    Ok(out)
}

/// Counts feature values across `member_ids`, most frequent first with ties
/// broken alphabetically.
pub fn property_frequency(
    table: &DrugTable,
    member_ids: &[String],
    kind: FeatureKind,
    top_n: usize,
) -> Result<Vec<(String, usize)>> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for id in member_ids {
        let rec = table.get(id).ok_or_else(|| Error::UnknownId(id.clone()))?;
        for v in rec.features(kind) {
            *counts.entry(v.as_str()).or_default() += 1;
        }
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().map(|(v, c)| (v.to_owned(), c)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out.truncate(top_n);
    Ok(out)
}

/// CSV with columns `rank,name,phase,distance`, distances to two decimals.
pub fn ranking_csv(ranking: &[RankedCandidate]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "name", "phase", "distance"])?;
    for c in ranking {
        w.write_record([
            c.rank.to_string(),
            c.name.clone(),
            c.nearest_phase.label().to_owned(),
            format!("{:.2}", c.distance),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Markdown table of cluster compositions.
pub fn composition_table(reports: &[ClusterReport]) -> String {
    let mut s = String::from("| cluster | A | B | fraction A | of interest |\n|---|---|---|---|---|\n");
    for r in reports {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.3} | {} |",
            r.cluster_id,
            r.count_a,
            r.count_b,
            r.fraction_a,
            if r.of_interest { "yes" } else { "no" }
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::Algorithm;
    use crate::dataset::DrugRecord;
    use ndarray::{array, Array2};
    use proptest::prelude::*;

    fn assignment(labels: Vec<usize>) -> ClusterAssignment {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        ClusterAssignment::new(labels, k, Algorithm::KMeans)
    }

    fn table(spec: &[(&str, Option<Phase>)]) -> DrugTable {
        let recs = spec
            .iter()
            .map(|&(id, phase)| {
                let cat = if phase.is_some() { Category::A } else { Category::B };
                let mut r = DrugRecord::new(id, cat, phase);
                r.name = id.to_uppercase();
                r
            })
            .collect();
        DrugTable::new(recs, vec![]).unwrap()
    }

    fn composition(a: usize, b: usize) -> ClusterReport {
        let mut spec: Vec<(String, Option<Phase>)> = (0..a).map(|i| (format!("a{i}"), Some(Phase::Phase4))).collect();
        spec.extend((0..b).map(|i| (format!("b{i}"), None)));
        let spec: Vec<(&str, Option<Phase>)> = spec.iter().map(|(s, p)| (s.as_str(), *p)).collect();
        let t = table(&spec);
        clusters_of_interest(&assignment(vec![0; a + b]), &t, DEFAULT_INTEREST_THRESHOLD).unwrap().remove(0)
    }

    #[test]
    fn threshold_rule_and_boundary() {
        let r = composition(6, 4);
        assert!((r.fraction_a - 0.6).abs() < 1e-15 && r.of_interest);
        assert!(!composition(5, 5).of_interest);
        assert!(composition(11, 9).of_interest);
        // 549/1000 sits just under the boundary.
        assert!(!composition(549, 451).of_interest);
        assert!(composition(550, 450).of_interest);
    }

    #[test]
    fn phase_dominates_distance() {
        let t = table(&[("p3", Some(Phase::Phase3)), ("p4", Some(Phase::Phase4)), ("x", None), ("y", None)]);
        let z = array![[0.0], [100.0], [1.0], [91.0]];
        let a = assignment(vec![0, 0, 0, 0]);
        let reps = clusters_of_interest(&a, &t, 0.5).unwrap();
        let ranked = rank_candidates(z.view(), &a, &t, &reps, 15).unwrap();
        let ids: Vec<&str> = ranked.iter().map(|c| c.drug_id.as_str()).collect();
        assert_eq!(ids, ["y", "x"]);
        assert_eq!(ranked[0].nearest_phase, Phase::Phase4);
        assert_eq!(ranked[0].distance, 9.0);
        assert_eq!(ranked[1].distance, 1.0);
        assert_eq!(ranked.iter().map(|c| c.rank).collect::<Vec<_>>(), [1, 2]);
    }

    #[test]
    fn within_group_by_distance_then_id() {
        let t = table(&[("p4", Some(Phase::Phase4)), ("c", None), ("b", None), ("a", None)]);
        let z = array![[0.0], [3.0], [2.0], [-3.0]];
        let a = assignment(vec![0; 4]);
        let reps = clusters_of_interest(&a, &t, 0.0).unwrap();
        let ranked = rank_candidates(z.view(), &a, &t, &reps, 15).unwrap();
        let ids: Vec<&str> = ranked.iter().map(|c| c.drug_id.as_str()).collect();
        assert_eq!(ids, ["b", "a", "c"]);
    }

    #[test]
    fn only_clusters_of_interest_and_top_n() {
        let t = table(&[
            ("a1", Some(Phase::Phase1)),
            ("b1", None),
            ("a2", Some(Phase::Phase2)),
            ("b2", None),
            ("b3", None),
        ]);
        let z = Array2::from_shape_fn((5, 2), |(i, j)| (i * 2 + j) as f64);
        let a = assignment(vec![0, 0, 1, 1, 1]);
        let reps = clusters_of_interest(&a, &t, 0.5).unwrap();
        assert_eq!(reps.iter().map(|r| r.of_interest).collect::<Vec<_>>(), [true, false]);
        let ranked = rank_candidates(z.view(), &a, &t, &reps, 15).unwrap();
        assert_eq!(ranked.len(), 1);
        assert_eq!(ranked[0].nearest_trial_id, "a1");
        let none = rank_candidates(z.view(), &a, &t, &reps, 0).unwrap();
        assert!(none.is_empty());
    }

    #[test]
    fn frequency_examples() {
        let mut recs = vec![];
        for (id, ps) in [("d1", vec!["p1", "p2"]), ("d2", vec!["p1"]), ("d3", vec!["p3"])] {
            let mut r = DrugRecord::new(id, Category::B, None);
            r.pathway = ps.into_iter().map(String::from).collect();
            recs.push(r);
        }
        let t = DrugTable::new(recs, vec![]).unwrap();
        let ids = t.ids();
        let f = property_frequency(&t, &ids, FeatureKind::Pathway, 10).unwrap();
        assert_eq!(f, [("p1".into(), 2), ("p2".into(), 1), ("p3".into(), 1)]);
        assert!(property_frequency(&t, &[], FeatureKind::Pathway, 10).unwrap().is_empty());
        assert!(matches!(
            property_frequency(&t, &["zz".into()], FeatureKind::Pathway, 10),
            Err(Error::UnknownId(_))
        ));
    }

    #[test]
    fn csv_two_decimals() {
        let c = RankedCandidate {
            rank: 1,
            drug_id: "d".into(),
            name: "Deflazacort".into(),
            cluster_id: 0,
            nearest_trial_id: "t".into(),
            nearest_phase: Phase::Phase4,
            distance: 1.996,
        };
        assert_eq!(ranking_csv(&[c]).unwrap(), "rank,name,phase,distance\n1,Deflazacort,Phase-4,2.00\n");
    }

    fn random_case(seed: u64, n: usize) -> (DrugTable, Array2<f64>, ClusterAssignment) {
        let mut s = crate::numerics::SeededStream::new(seed);
        let spec: Vec<(String, Option<Phase>)> = (0..n)
            .map(|i| {
                let p = if s.bernoulli(0.6) { Some(Phase::ALL[s.below(5)]) } else { None };
                (format!("d{i:03}"), p)
            })
            .collect();
        let spec: Vec<(&str, Option<Phase>)> = spec.iter().map(|(a, p)| (a.as_str(), *p)).collect();
        let z = Array2::from_shape_fn((n, 3), |_| s.gaussian());
        let labels = (0..n).map(|_| s.below(3)).collect();
        (table(&spec), z, assignment(labels))
    }

    proptest! {
        #[test]
        fn ranking_permutation_and_scale_invariant(seed in 0u64..1000, c in 0.1f64..10.0) {
            let n = 24;
            let (t, z, a) = random_case(seed, n);
            let reps = clusters_of_interest(&a, &t, 0.5).unwrap();
            let base = rank_candidates(z.view(), &a, &t, &reps, n).unwrap();

            let scaled = rank_candidates((&z * c).view(), &a, &t, &reps, n).unwrap();
            let ids = |r: &[RankedCandidate]| r.iter().map(|c| c.drug_id.clone()).collect::<Vec<_>>();
            prop_assert_eq!(ids(&base), ids(&scaled));

            let mut perm: Vec<usize> = (0..n).collect();
            crate::numerics::SeededStream::new(seed ^ 0xff).shuffle(&mut perm);
            let t2 = DrugTable::new(perm.iter().map(|&i| t.records()[i].clone()).collect(), vec![]).unwrap();
            let z2 = Array2::from_shape_fn((n, 3), |(i, j)| z[[perm[i], j]]);
            let a2 = assignment(perm.iter().map(|&i| a.labels[i]).collect());
            let reps2 = clusters_of_interest(&a2, &t2, 0.5).unwrap();
            prop_assert_eq!(&base, &rank_candidates(z2.view(), &a2, &t2, &reps2, n).unwrap());

            for cand in &base {
                let i = t.position(&cand.drug_id).unwrap();
                let j = t.position(&cand.nearest_trial_id).unwrap();
                let pair = ndarray::stack![ndarray::Axis(0), z.row(i), z.row(j)];
                let d = crate::numerics::pairwise_euclidean(pair.view()).unwrap();
                prop_assert_eq!(cand.distance, d.get(0, 1));
            }
        }

        #[test]
        fn raising_threshold_never_adds(seed in 0u64..1000, lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let (t, _, a) = random_case(seed, 30);
            let l = clusters_of_interest(&a, &t, lo).unwrap();
            let h = clusters_of_interest(&a, &t, hi).unwrap();
            for (x, y) in l.iter().zip(&h) {
                prop_assert!(x.of_interest || !y.of_interest);
            }
        }

        #[test]
        fn frequency_matches_nested_loop(seed in 0u64..1000) {
            let mut s = crate::numerics::SeededStream::new(seed);
            let recs: Vec<DrugRecord> = (0..12).map(|i| {
                let mut r = DrugRecord::new(format!("d{i}"), Category::B, None);
                r.target = (0..s.below(4)).map(|_| format!("t{}", s.below(6))).collect();
                r
            }).collect();
            let t = DrugTable::new(recs, vec![]).unwrap();
            let members: Vec<String> = t.ids().into_iter().filter(|_| s.bernoulli(0.7)).collect();
            let got = property_frequency(&t, &members, FeatureKind::Target, usize::MAX).unwrap();
            let mut values: Vec<String> = (0..6).map(|v| format!("t{v}")).collect();
            values.sort();
            let mut want: Vec<(String, usize)> = Vec::new();
            for v in &values {
                let mut c = 0;
                for m in &members {
                    for x in &t.get(m).unwrap().target {
                        if x == v { c += 1; }
                    }
                }
                if c > 0 { want.push((v.clone(), c)); }
            }
            want.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            prop_assert_eq!(got, want);
        }
    }
}
