use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{parse_phase, Category, DrugRecord, DrugTable, FeatureKind, PregnancyCategory};
use crate::error::{Error, Result};

/// Maps record fields to CSV column names.
///
/// Numeric feature columns are either listed explicitly or picked up by
/// prefix, in header order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schema {
    pub id: String,
    pub name: String,
    pub category: String,
    pub phase: String,
    pub moa: String,
    pub pathway: String,
    pub indication: String,
    pub target: String,
    pub cc50_um: String,
    pub ic50_ratio: String,
    pub pregnancy_cat: String,
    pub blackbox: String,
    pub cad_or_pains: String,
    pub route_ok: String,
    pub pharmacologically_active: String,
    pub numeric_prefix: String,
    pub numeric_columns: Option<Vec<String>>,
    pub list_delimiter: char,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            id: "id".into(),
            name: "name".into(),
            category: "category".into(),
            phase: "phase".into(),
            moa: "moa".into(),
            pathway: "pathway".into(),
            indication: "indication".into(),
            target: "target".into(),
            cc50_um: "cc50_um".into(),
            ic50_ratio: "ic50_ratio".into(),
            pregnancy_cat: "pregnancy_cat".into(),
            blackbox: "blackbox".into(),
            cad_or_pains: "cad_or_pains".into(),
            route_ok: "route_ok".into(),
            pharmacologically_active: "pharmacologically_active".into(),
            numeric_prefix: "num_".into(),
            numeric_columns: None,
            list_delimiter: ';',
        }
    }
}

impl Schema {
    fn feature_column(&self, kind: FeatureKind) -> &str {
        match kind {
            FeatureKind::MoA => &self.moa,
            FeatureKind::Pathway => &self.pathway,
            FeatureKind::Indication => &self.indication,
            FeatureKind::Target => &self.target,
        }
    }
}

fn parse_bool(raw: &str, default: bool) -> std::result::Result<bool, String> {
    match raw.trim().to_lowercase().as_str() {
        "" => Ok(default),
        "1" | "true" | "yes" | "y" | "t" => Ok(true),
        "0" | "false" | "no" | "n" | "f" => Ok(false),
        other => Err(format!("unrecognized boolean '{other}'")),
    }
}

fn parse_real(raw: &str) -> Option<f64> {
    raw.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_set(raw: &str, delim: char) -> BTreeSet<String> {
    raw.split(delim)
        .map(|v| v.trim().to_lowercase())
        .filter(|v| !v.is_empty())
        .collect()
}

/// Parses CSV text into a drug table.
///
/// Set-valued cells are split on `schema.list_delimiter`, trimmed and
/// lower-cased. Unparseable numeric cells become missing. Optional columns
/// absent from the header take their passing defaults.
pub fn parse_drug_table(text: &str, schema: &Schema) -> Result<DrugTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let col: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim(), i)).collect();

    let missing: Vec<String> = [&schema.id, &schema.category]
        .into_iter()
        .filter(|c| !col.contains_key(c.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }

    let numeric_names: Vec<String> = match &schema.numeric_columns {
        Some(cols) => {
            let absent: Vec<String> = cols.iter().filter(|c| !col.contains_key(c.as_str())).cloned().collect();
            if !absent.is_empty() {
                return Err(Error::MissingColumns(absent));
            }
            cols.clone()
        }
        None => headers
            .iter()
            .map(str::trim)
            .filter(|h| !schema.numeric_prefix.is_empty() && h.starts_with(&schema.numeric_prefix))
            .map(String::from)
            .collect(),
    };
    let numeric_idx: Vec<usize> = numeric_names.iter().map(|n| col[n.as_str()]).collect();

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let cell = |name: &str| -> &str { col.get(name).and_then(|&i| row.get(i)).unwrap_or("").trim() };
        let id = cell(&schema.id).to_string();
        let bad = |reason: String| Error::InvalidRecord { id: id.clone(), reason };

        let category = match cell(&schema.category).to_ascii_uppercase().as_str() {
            "A" => Category::A,
            "B" => Category::B,
            other => return Err(bad(format!("unrecognized category '{other}'"))),
        };
        let phase = parse_phase(cell(&schema.phase)).map_err(bad)?;
        let pregnancy_cat = match cell(&schema.pregnancy_cat) {
            "" => None,
            raw => Some(raw.parse::<PregnancyCategory>().map_err(bad)?),
        };
        let name = match cell(&schema.name) {
            "" => id.clone(),
            n => n.to_string(),
        };

        let mut rec = DrugRecord::new(id.clone(), category, phase);
        rec.name = name;
        for kind in FeatureKind::ALL {
            *rec.features_mut(kind) = parse_set(cell(schema.feature_column(kind)), schema.list_delimiter);
        }
        rec.numeric = numeric_idx.iter().map(|&i| row.get(i).and_then(parse_real)).collect();
        rec.cc50_um = parse_real(cell(&schema.cc50_um));
        rec.ic50_ratio = parse_real(cell(&schema.ic50_ratio));
        rec.pregnancy_cat = pregnancy_cat;
        rec.blackbox = parse_bool(cell(&schema.blackbox), false).map_err(bad)?;
        rec.cad_or_pains = parse_bool(cell(&schema.cad_or_pains), false).map_err(bad)?;
        rec.route_ok = parse_bool(cell(&schema.route_ok), true).map_err(bad)?;
        rec.pharmacologically_active = parse_bool(cell(&schema.pharmacologically_active), true).map_err(bad)?;
        records.push(rec);
    }
    DrugTable::new(records, numeric_names)
}

/// Writes a table in the column layout described by `schema`.
pub fn write_drug_table(table: &DrugTable, schema: &Schema) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec![
        schema.id.clone(),
        schema.name.clone(),
        schema.category.clone(),
        schema.phase.clone(),
    ];
    header.extend(FeatureKind::ALL.iter().map(|k| schema.feature_column(*k).to_string()));
    header.extend([
        schema.cc50_um.clone(),
        schema.ic50_ratio.clone(),
        schema.pregnancy_cat.clone(),
        schema.blackbox.clone(),
        schema.cad_or_pains.clone(),
        schema.route_ok.clone(),
        schema.pharmacologically_active.clone(),
    ]);
    header.extend(table.numeric_names().iter().cloned());
    w.write_record(&header)?;

    let delim = schema.list_delimiter.to_string();
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in table.records() {
        let mut row: Vec<String> = vec![
            r.id.clone(),
            r.name.clone(),
            format!("{:?}", r.category),
            r.phase.map(|p| format!("{p:?}")).unwrap_or_default(),
        ];
        for kind in FeatureKind::ALL {
            row.push(r.features(kind).iter().cloned().collect::<Vec<_>>().join(&delim));
        }
        row.push(opt(r.cc50_um));
        row.push(opt(r.ic50_ratio));
        row.push(r.pregnancy_cat.map(|c| format!("{c:?}")).unwrap_or_default());
        for flag in [r.blackbox, r.cad_or_pains, r.route_ok, r.pharmacologically_active] {
            row.push(flag.to_string());
        }
        row.extend(r.numeric.iter().map(|v| opt(*v)));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}
