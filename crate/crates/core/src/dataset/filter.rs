use serde::{Deserialize, Serialize};

use super::{DrugRecord, DrugTable, PregnancyCategory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Drugs with CC50 below this (µM) are cytotoxic.
    pub cc50_min: f64,
    /// Drugs whose IC50 is this multiple of the original-indication IC50 or
    /// more are removed.
    pub ic50_max_ratio: f64,
    pub banned_pregnancy: Vec<PregnancyCategory>,
    /// When set, a missing CC50, IC50 ratio or pregnancy category fails the
    /// corresponding filter instead of passing it.
    pub strict_missing: bool,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            cc50_min: 10.0,
            ic50_max_ratio: 10.0,
            banned_pregnancy: vec![PregnancyCategory::D, PregnancyCategory::X],
            strict_missing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filter {
    Inactive,
    Cytotoxic,
    PoorIc50,
    CadPains,
    Route,
    Pregnancy,
    BlackBox,
}

impl Filter {
    pub const ALL: [Filter; 7] = [
        Filter::Inactive,
        Filter::Cytotoxic,
        Filter::PoorIc50,
        Filter::CadPains,
        Filter::Route,
        Filter::Pregnancy,
        Filter::BlackBox,
    ];

    fn reason(self, cfg: &FilterConfig) -> String {
        match self {
            Filter::Inactive => "pharmacologically inactive".into(),
            Filter::Cytotoxic => format!("cytotoxic (CC50 < {} µM)", cfg.cc50_min),
            Filter::PoorIc50 => format!("poor IC50 (>= {}x original indication)", cfg.ic50_max_ratio),
            Filter::CadPains => "CAD or PAINS compound".into(),
            Filter::Route => "unsuitable route of administration".into(),
            Filter::Pregnancy => "unsafe in pregnancy".into(),
            Filter::BlackBox => "black box warning".into(),
        }
    }

    fn removes(self, r: &DrugRecord, cfg: &FilterConfig) -> bool {
        let strict = cfg.strict_missing;
        match self {
            Filter::Inactive => !r.pharmacologically_active,
            Filter::Cytotoxic => r.cc50_um.map_or(strict, |v| v < cfg.cc50_min),
            Filter::PoorIc50 => r.ic50_ratio.map_or(strict, |v| v >= cfg.ic50_max_ratio),
            Filter::CadPains => r.cad_or_pains,
            Filter::Route => !r.route_ok,
            Filter::Pregnancy => r
                .pregnancy_cat
                .map_or(strict, |c| cfg.banned_pregnancy.contains(&c)),
            Filter::BlackBox => r.blackbox,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub id: String,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub input_count: usize,
    pub kept_count: usize,
    /// Drugs failing each filter; a drug failing several counts once per filter.
    pub removed_by_filter: Vec<(Filter, usize)>,
    pub removals: Vec<Removal>,
}

/// Applies the seven down-selection filters, keeping survivors in order.
pub fn apply_downselection(table: &DrugTable, cfg: &FilterConfig) -> (DrugTable, FilterReport) {
    let mut counts = [0usize; Filter::ALL.len()];
    let mut removals = Vec::new();
    let mut keep = Vec::with_capacity(table.len());
    for r in table.records() {
        let mut reasons = Vec::new();
        for (slot, f) in Filter::ALL.iter().enumerate() {
            if f.removes(r, cfg) {
                counts[slot] += 1;
                reasons.push(f.reason(cfg));
            }
        }
        keep.push(reasons.is_empty());
        if !reasons.is_empty() {
            removals.push(Removal {
                id: r.id.clone(),
                reasons,
            });
        }
    }
    let mut flags = keep.into_iter();
    let kept = table.retain(|_| flags.next().unwrap_or(false));
    let report = FilterReport {
        input_count: table.len(),
        kept_count: kept.len(),
        removed_by_filter: Filter::ALL.iter().copied().zip(counts).collect(),
        removals,
    };
    (kept, report)
}
