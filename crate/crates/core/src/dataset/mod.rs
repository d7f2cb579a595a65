//! Drug tables: parsing, down-selection filters and feature encoding.

mod features;
mod filter;
mod parse;
mod relationship;

pub use features::{build_feature_matrix, ColumnStats, FeatureMatrix, ImputePolicy};
pub use filter::{apply_downselection, Filter, FilterConfig, FilterReport, Removal};
pub use parse::{parse_drug_table, write_drug_table, Schema};
pub use relationship::{build_relationship_matrix, RelationshipMatrix};

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    /// Under clinical trial for the target disease.
    A,
    /// Repurposing candidate.
    B,
}

/// Clinical trial phase, declared from highest to lowest ranking priority so
/// the derived `Ord` sorts Phase4 first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Phase4,
    Phase3,
    Phase2,
    Phase1,
    Observational,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Phase4,
        Phase::Phase3,
        Phase::Phase2,
        Phase::Phase1,
        Phase::Observational,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Phase::Phase4 => "Phase-4",
            Phase::Phase3 => "Phase-3",
            Phase::Phase2 => "Phase-2",
            Phase::Phase1 => "Phase-1",
            Phase::Observational => "Observational",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Parses an optional phase cell. `Ok(None)` means "no trial phase".
pub(crate) fn parse_phase(raw: &str) -> std::result::Result<Option<Phase>, String> {
    let norm: String = raw
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '-' && *c != '_')
        .collect::<String>()
        .to_lowercase();
    Ok(Some(match norm.as_str() {
        "" | "none" | "na" | "n/a" => return Ok(None),
        "phase4" | "4" | "iv" | "phaseiv" => Phase::Phase4,
        "phase3" | "3" | "iii" | "phaseiii" => Phase::Phase3,
        "phase2" | "2" | "ii" | "phaseii" => Phase::Phase2,
        "phase1" | "1" | "i" | "phasei" => Phase::Phase1,
        "observational" | "obs" => Phase::Observational,
        _ => return Err(format!("unrecognized phase '{raw}'")),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PregnancyCategory {
    A,
    B,
    C,
    D,
    X,
}

impl FromStr for PregnancyCategory {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(PregnancyCategory::A),
            "B" => Ok(PregnancyCategory::B),
            "C" => Ok(PregnancyCategory::C),
            "D" => Ok(PregnancyCategory::D),
            "X" => Ok(PregnancyCategory::X),
            other => Err(format!("unrecognized pregnancy category '{other}'")),
        }
    }
}

/// The four set-valued textual features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    MoA,
    Pathway,
    Indication,
    Target,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 4] = [
        FeatureKind::MoA,
        FeatureKind::Pathway,
        FeatureKind::Indication,
        FeatureKind::Target,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::MoA => "moa",
            FeatureKind::Pathway => "pathway",
            FeatureKind::Indication => "indication",
            FeatureKind::Target => "target",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "moa" => Ok(FeatureKind::MoA),
            "pathway" => Ok(FeatureKind::Pathway),
            "indication" => Ok(FeatureKind::Indication),
            "target" => Ok(FeatureKind::Target),
            other => Err(Error::InvalidParam(format!("unknown feature kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrugRecord {
    pub id: String,
    pub name: String,
    pub category: Category,
    /// `None` for category B drugs.
    pub phase: Option<Phase>,
    pub moa: BTreeSet<String>,
    pub pathway: BTreeSet<String>,
    pub indication: BTreeSet<String>,
    pub target: BTreeSet<String>,
    pub numeric: Vec<Option<f64>>,
    pub cc50_um: Option<f64>,
    pub ic50_ratio: Option<f64>,
    pub pregnancy_cat: Option<PregnancyCategory>,
    pub blackbox: bool,
    pub cad_or_pains: bool,
    pub route_ok: bool,
    pub pharmacologically_active: bool,
}

impl DrugRecord {
    /// Minimal record with no features and all filter fields passing.
    pub fn new(id: impl Into<String>, category: Category, phase: Option<Phase>) -> Self {
        let id = id.into();
        DrugRecord {
            name: id.clone(),
            id,
            category,
            phase,
            moa: BTreeSet::new(),
            pathway: BTreeSet::new(),
            indication: BTreeSet::new(),
            target: BTreeSet::new(),
            numeric: Vec::new(),
            cc50_um: None,
            ic50_ratio: None,
            pregnancy_cat: None,
            blackbox: false,
            cad_or_pains: false,
            route_ok: true,
            pharmacologically_active: true,
        }
    }

    pub fn features(&self, kind: FeatureKind) -> &BTreeSet<String> {
        match kind {
            FeatureKind::MoA => &self.moa,
            FeatureKind::Pathway => &self.pathway,
            FeatureKind::Indication => &self.indication,
            FeatureKind::Target => &self.target,
        }
    }

    pub fn features_mut(&mut self, kind: FeatureKind) -> &mut BTreeSet<String> {
        match kind {
            FeatureKind::MoA => &mut self.moa,
            FeatureKind::Pathway => &mut self.pathway,
            FeatureKind::Indication => &mut self.indication,
            FeatureKind::Target => &mut self.target,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidRecord {
                id: String::new(),
                reason: "empty id".into(),
            });
        }
        match (self.category, self.phase) {
            (Category::A, None) => Err(Error::InvalidRecord {
                id: self.id.clone(),
                reason: "category A requires a clinical trial phase".into(),
            }),
            (Category::B, Some(p)) => Err(Error::InvalidRecord {
                id: self.id.clone(),
                reason: format!("category B drug cannot have trial phase {p}"),
            }),
            _ => Ok(()),
        }
    }
}

/// Ordered drug records with an id → row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableRepr", into = "TableRepr")]
pub struct DrugTable {
    records: Vec<DrugRecord>,
    numeric_names: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    numeric_names: Vec<String>,
    records: Vec<DrugRecord>,
}

impl TryFrom<TableRepr> for DrugTable {
    type Error = Error;

    fn try_from(r: TableRepr) -> Result<Self> {
        DrugTable::new(r.records, r.numeric_names)
    }
}

impl From<DrugTable> for TableRepr {
    fn from(t: DrugTable) -> Self {
        TableRepr {
            numeric_names: t.numeric_names,
            records: t.records,
        }
    }
}

impl DrugTable {
    /// Builds a table, enforcing unique ids, the category/phase pairing and a
    /// numeric vector length equal to `numeric_names.len()` on every record.
    pub fn new(records: Vec<DrugRecord>, numeric_names: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            r.validate()?;
            if r.numeric.len() != numeric_names.len() {
                return Err(Error::InvalidRecord {
                    id: r.id.clone(),
                    reason: format!(
                        "{} numeric values, expected {}",
                        r.numeric.len(),
                        numeric_names.len()
                    ),
                });
            }
            if index.insert(r.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(r.id.clone()));
            }
        }
        Ok(DrugTable {
            records,
            numeric_names,
            index,
        })
    }

    pub fn records(&self) -> &[DrugRecord] {
        &self.records
    }

    pub fn numeric_names(&self) -> &[String] {
        &self.numeric_names
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&DrugRecord> {
        self.position(id).map(|i| &self.records[i])
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    /// Keeps records satisfying `keep`, preserving order.
    pub fn retain(&self, mut keep: impl FnMut(&DrugRecord) -> bool) -> DrugTable {
        let records: Vec<DrugRecord> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        DrugTable::new(records, self.numeric_names.clone()).expect("subset of a valid table")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_parsing_variants() {
        assert_eq!(parse_phase("Phase4").unwrap(), Some(Phase::Phase4));
        assert_eq!(parse_phase("phase 3").unwrap(), Some(Phase::Phase3));
        assert_eq!(parse_phase("Phase-2").unwrap(), Some(Phase::Phase2));
        assert_eq!(parse_phase("Observational").unwrap(), Some(Phase::Observational));
        assert_eq!(parse_phase("").unwrap(), None);
        assert_eq!(parse_phase("None").unwrap(), None);
        assert!(parse_phase("phase 9").is_err());
    }

    #[test]
    fn phase_priority_order() {
        let mut v = vec![Phase::Observational, Phase::Phase1, Phase::Phase4, Phase::Phase3];
        v.sort();
        assert_eq!(v, vec![Phase::Phase4, Phase::Phase3, Phase::Phase1, Phase::Observational]);
    }

    #[test]
    fn table_rejects_duplicates_and_bad_phase() {
        let a = DrugRecord::new("d1", Category::A, Some(Phase::Phase4));
        let b = DrugRecord::new("d1", Category::B, None);
        assert!(matches!(
            DrugTable::new(vec![a.clone(), b], vec![]),
            Err(Error::DuplicateId(id)) if id == "d1"
        ));
        let bad = DrugRecord::new("d2", Category::A, None);
        assert!(DrugTable::new(vec![bad], vec![]).is_err());
        let bad = DrugRecord::new("d3", Category::B, Some(Phase::Phase1));
        assert!(DrugTable::new(vec![a, bad], vec![]).is_err());
    }

    #[test]
    fn json_round_trip_rebuilds_index() {
        let t = DrugTable::new(
            vec![
                DrugRecord::new("x", Category::A, Some(Phase::Phase2)),
                DrugRecord::new("y", Category::B, None),
            ],
            vec![],
        )
        .unwrap();
        let s = serde_json::to_string(&t).unwrap();
        let back: DrugTable = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.position("y"), Some(1));
    }
}
