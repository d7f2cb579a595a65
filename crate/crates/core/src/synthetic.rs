//! Synthetic data with planted structure: stochastic block model graphs and
//! drug tables whose textual and numeric features follow latent groups.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::{Category, DrugRecord, DrugTable, FeatureKind, Phase, PregnancyCategory};
use crate::ddr::DdrMatrix;
use crate::numerics::SeededStream;

/// Undirected SBM graph: edges inside a block with probability `p_in`,
/// across blocks with `p_out`. Returns the graph and the block of each node.
pub fn sbm(sizes: &[usize], p_in: f64, p_out: f64, stream: &mut SeededStream) -> (DdrMatrix, Vec<usize>) {
    let truth: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = truth.len();
    let mut m = DdrMatrix::empty((0..n).map(|i| format!("n{i:04}")).collect());
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if truth[i] == truth[j] { p_in } else { p_out };
            if stream.bernoulli(p) {
                m.data[[i, j]] = 1;
                m.data[[j, i]] = 1;
            }
        }
    }
    (m, truth)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureShape {
    pub kind: FeatureKind,
    /// Drugs carrying at least one value.
    pub rows: usize,
    /// Distinct values across those drugs.
    pub cols: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Drugs that pass every down-selection filter.
    pub selected: usize,
    /// Extra drugs that each fail at least one filter.
    pub rejected: usize,
    pub groups: usize,
    /// Groups with index below this are enriched in trial drugs.
    pub trial_rich_groups: usize,
    pub trial_fraction_rich: f64,
    pub trial_fraction_other: f64,
    pub features: Vec<FeatureShape>,
    pub numeric: usize,
    pub missing_rate: f64,
    /// Probability that a drug's feature value comes from its own group.
    pub cohesion: f64,
}

impl SyntheticSpec {
    /// 438 selected drugs with relationship matrices of 371×177 (MoA),
    /// 323×134 (pathway), 435×180 (indication), 328×626 (target) and 64
    /// numeric features.
    pub fn full_size() -> Self {
        SyntheticSpec {
            selected: 438,
            rejected: 40,
            groups: 10,
            trial_rich_groups: 3,
            trial_fraction_rich: 0.7,
            trial_fraction_other: 0.25,
            features: vec![
                FeatureShape {
                    kind: FeatureKind::MoA,
                    rows: 371,
                    cols: 177,
                },
                FeatureShape {
                    kind: FeatureKind::Pathway,
                    rows: 323,
                    cols: 134,
                },
                FeatureShape {
                    kind: FeatureKind::Indication,
                    rows: 435,
                    cols: 180,
                },
                FeatureShape {
                    kind: FeatureKind::Target,
                    rows: 328,
                    cols: 626,
                },
            ],
            numeric: 64,
            missing_rate: 0.05,
            cohesion: 0.9,
        }
    }

    /// Scaled-down variant for quick tests.
    pub fn small() -> Self {
        SyntheticSpec {
            selected: 60,
            rejected: 6,
            groups: 4,
            trial_rich_groups: 1,
            trial_fraction_rich: 0.8,
            trial_fraction_other: 0.2,
            features: FeatureKind::ALL
                .iter()
                .zip([(50, 20), (45, 16), (58, 18), (48, 40)])
                .map(|(&kind, (rows, cols))| FeatureShape { kind, rows, cols })
                .collect(),
            numeric: 8,
            missing_rate: 0.05,
            cohesion: 0.9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDrugs {
    pub table: DrugTable,
    /// Latent group of each record, in table order.
    pub groups: Vec<usize>,
    /// Ids of drugs planted to pass every filter.
    pub selected_ids: Vec<String>,
}

fn draw_phase(s: &mut SeededStream) -> Phase {
    let u = s.uniform();
    match u {
        u if u < 0.35 => Phase::Phase4,
        u if u < 0.65 => Phase::Phase3,
        u if u < 0.8 => Phase::Phase2,
        u if u < 0.9 => Phase::Phase1,
        _ => Phase::Observational,
    }
}

/// Generates a drug table with planted groups. The selected drugs reproduce
/// every [`FeatureShape`] exactly once the rejected drugs are filtered out.
pub fn generate_drugs(spec: &SyntheticSpec, seed: u64) -> SyntheticDrugs {
    let mut s = SeededStream::new(seed);
    let n = spec.selected;
    let g = spec.groups.max(1);

    let mut group_of: Vec<usize> = (0..n).map(|i| i % g).collect();
    s.shuffle(&mut group_of);

    let mut records: Vec<DrugRecord> = (0..n)
        .map(|i| {
            let grp = group_of[i];
            let p_trial = if grp < spec.trial_rich_groups {
                spec.trial_fraction_rich
            } else {
                spec.trial_fraction_other
            };
            let mut r = if s.bernoulli(p_trial) {
                DrugRecord::new(String::new(), Category::A, Some(draw_phase(&mut s)))
            } else {
                DrugRecord::new(String::new(), Category::B, None)
            };
            if s.bernoulli(0.6) {
                r.cc50_um = Some(10.0 + s.uniform() * 90.0);
            }
            if s.bernoulli(0.5) {
                r.ic50_ratio = Some(s.uniform() * 9.0);
            }
            if s.bernoulli(0.5) {
                r.pregnancy_cat = Some([PregnancyCategory::A, PregnancyCategory::B, PregnancyCategory::C][s.below(3)]);
            }
            r
        })
        .collect();

    for shape in &spec.features {
        let prefix = shape.kind.name();
        let mut carriers = s.permutation(n);
        carriers.truncate(shape.rows.min(n));
        carriers.sort_unstable();
        let pool: Vec<Vec<usize>> = (0..g).map(|grp| (0..shape.cols).filter(|v| v % g == grp).collect()).collect();
        let mut used = vec![false; shape.cols];
        let value_name = |v: usize| format!("{prefix}_{v:03}");
        for &i in &carriers {
            let own = &pool[group_of[i]];
            let count = 1 + s.below(3);
            for _ in 0..count {
                let v = if !own.is_empty() && s.bernoulli(spec.cohesion) {
                    own[s.below(own.len())]
                } else {
                    s.below(shape.cols)
                };
                used[v] = true;
                records[i].features_mut(shape.kind).insert(value_name(v));
            }
        }
        for (v, _) in used.iter().enumerate().filter(|(_, &u)| !u) {
            let in_group: Vec<usize> = carriers.iter().copied().filter(|&i| group_of[i] == v % g).collect();
            let holder = if in_group.is_empty() {
                carriers[s.below(carriers.len())]
            } else {
                in_group[s.below(in_group.len())]
            };
            records[holder].features_mut(shape.kind).insert(value_name(v));
        }
    }

    let centres: Vec<Vec<f64>> = (0..g)
        .map(|_| (0..spec.numeric).map(|_| 1.5 * s.gaussian()).collect())
        .collect();
    for (i, r) in records.iter_mut().enumerate() {
        r.numeric = (0..spec.numeric)
            .map(|c| (!s.bernoulli(spec.missing_rate)).then(|| centres[group_of[i]][c] + s.gaussian()))
            .collect();
    }

    // Rejected drugs reuse existing vocabulary and each trip one filter.
    let vocab: Vec<(FeatureKind, Vec<String>)> = spec
        .features
        .iter()
        .map(|f| {
            let all: BTreeSet<String> = records.iter().flat_map(|r| r.features(f.kind).iter().cloned()).collect();
            (f.kind, all.into_iter().collect())
        })
        .collect();
    let mut rejected = Vec::with_capacity(spec.rejected);
    for j in 0..spec.rejected {
        let grp = s.below(g);
        let mut r = DrugRecord::new(String::new(), Category::B, None);
        match j % 7 {
            0 => r.cc50_um = Some(s.uniform() * 9.9),
            1 => r.ic50_ratio = Some(10.0 + s.uniform() * 50.0),
            2 => r.pregnancy_cat = Some(if s.bernoulli(0.5) { PregnancyCategory::D } else { PregnancyCategory::X }),
            3 => r.blackbox = true,
            4 => r.cad_or_pains = true,
            5 => r.route_ok = false,
            _ => r.pharmacologically_active = false,
        }
        for (kind, values) in &vocab {
            if !values.is_empty() && s.bernoulli(0.8) {
                r.features_mut(*kind).insert(values[s.below(values.len())].clone());
            }
        }
        r.numeric = (0..spec.numeric).map(|c| Some(centres[grp][c] + s.gaussian())).collect();
        rejected.push((grp, r));
    }

    // Interleave rejects at random positions, then assign ids in final order.
    let mut all: Vec<(usize, bool, DrugRecord)> = group_of
        .iter()
        .copied()
        .zip(records)
        .map(|(grp, r)| (grp, true, r))
        .collect();
    for (grp, r) in rejected {
        let at = s.below(all.len() + 1);
        all.insert(at, (grp, false, r));
    }
    let width = (all.len().max(1) as f64).log10().floor() as usize + 1;
    let mut groups = Vec::with_capacity(all.len());
    let mut selected_ids = Vec::new();
    let mut out = Vec::with_capacity(all.len());
    for (i, (grp, selected, mut r)) in all.into_iter().enumerate() {
        r.id = format!("D{:0width$}", i + 1);
        r.name = format!("Synthetic drug {:0width$}", i + 1);
        if selected {
            selected_ids.push(r.id.clone());
        }
        groups.push(grp);
        out.push(r);
    }
    let names = (0..spec.numeric).map(|c| format!("num_{c:02}")).collect();
    SyntheticDrugs {
        table: DrugTable::new(out, names).expect("generator emits valid records"),
        groups,
        selected_ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{apply_downselection, build_relationship_matrix, FilterConfig};

    #[test]
    fn sbm_block_structure() {
        let mut s = SeededStream::new(1);
        let (m, truth) = sbm(&[20, 20], 1.0, 0.0, &mut s);
        assert_eq!(m.nnz(), 2 * 20 * 19);
        assert_eq!(truth.iter().filter(|&&b| b == 1).count(), 20);
    }

    #[test]
    fn small_spec_shapes_after_filtering() {
        let spec = SyntheticSpec::small();
        let syn = generate_drugs(&spec, 7);
        let (kept, report) = apply_downselection(&syn.table, &FilterConfig::default());
        assert_eq!(kept.ids(), syn.selected_ids);
        assert_eq!(report.removals.len(), spec.rejected);
        for shape in &spec.features {
            let m = build_relationship_matrix(&kept, shape.kind).unwrap();
            assert_eq!(m.shape(), (shape.rows, shape.cols), "{}", shape.kind);
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_drugs(&SyntheticSpec::small(), 3);
        let b = generate_drugs(&SyntheticSpec::small(), 3);
        assert_eq!(a.table, b.table);
    }
}
