//! Staged orchestration: every stage reads its inputs from and writes its
//! outputs to the output directory, so any stage can be re-run alone.

mod config;
mod report;

pub use config::{
    AnalysisConfig, GaeSection, InputConfig, PipelineConfig, StageClustering, Tier1Config, VariantChoice,
};
pub use report::{render_markdown, ReportBody, RunReport};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{self, ClusterReport, RankedCandidate};
use crate::clustering::{select_best, Algorithm, ClusterAssignment, SelectionRow};
use crate::dataset::{
    apply_downselection, build_feature_matrix, build_relationship_matrix, parse_drug_table, write_drug_table,
    DrugTable, FeatureKind, Filter, Schema,
};
use crate::ddr::{comembership, export_dot, fuse_or, sparsity, DdrMatrix};
use crate::error::{Error, Result};
use crate::gae::{self, normalize_adjacency, Variant};
use crate::numerics::derive_seed;

pub const FILTERED_DRUGS: &str = "filtered_drugs.csv";
pub const FILTER_REPORT: &str = "filter_report.json";
pub const TIER1: &str = "tier1.json";
pub const FUSE: &str = "fuse.json";
pub const DDR_EDGES: &str = "ddr_edges.csv";
pub const DDR_DOT: &str = "ddr.dot";
pub const EMBEDDING: &str = "embedding.csv";
pub const MODEL: &str = "model.txt";
pub const LOSS_HISTORY: &str = "loss_history.csv";
pub const EMBED: &str = "embed.json";
pub const ASSIGNMENTS: &str = "assignments.csv";
pub const TIER2: &str = "tier2.json";
pub const RANKING: &str = "ranking.csv";
pub const RANK: &str = "rank.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const TIMINGS: &str = "timings.json";

const TIER1_SALT: u64 = 0x100;
const GAE_SALT: u64 = 0x200;
const TIER2_SALT: u64 = 0x300;

fn tier1_assignments(kind: FeatureKind) -> String {
    format!("tier1/{}_assignments.csv", kind.name())
}

fn tier1_edges(kind: FeatureKind) -> String {
    format!("tier1/{}_ddr_edges.csv", kind.name())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterSection {
    pub input_count: usize,
    pub kept_count: usize,
    pub removed_by_filter: Vec<(Filter, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier1Section {
    pub feature: FeatureKind,
    /// Reason the feature contributed no clustering, if any.
    pub skipped: Option<String>,
    pub rows: usize,
    pub cols: usize,
    pub algorithm: Algorithm,
    pub candidate_k: Vec<usize>,
    /// Configured k values that were not below the number of rows.
    pub dropped_k: Vec<usize>,
    pub table: Vec<SelectionRow>,
    pub best_k: Option<usize>,
    pub best_silhouette: Option<f64>,
    pub elbow_k: Option<usize>,
    pub eigengap_k: Option<usize>,
    /// Drug pairs sharing a cluster, each counted once.
    pub ddr_edges: usize,
    pub ddr_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionSection {
    pub n: usize,
    pub edges: usize,
    pub sparsity: f64,
    pub isolated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantLoss {
    pub variant: Variant,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSection {
    pub variant: Variant,
    pub n: usize,
    pub dim: usize,
    pub features_used: usize,
    pub features_dropped: Vec<String>,
    pub epochs: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub min_loss: f64,
    pub candidates: Vec<VariantLoss>,
    pub model_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tier2Section {
    pub algorithm: Algorithm,
    pub candidate_k: Vec<usize>,
    pub dropped_k: Vec<usize>,
    pub table: Vec<SelectionRow>,
    pub best_k: usize,
    pub best_silhouette: f64,
    pub elbow_k: Option<usize>,
    pub eigengap_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tier2Artifact {
    section: Tier2Section,
    assignment: ClusterAssignment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencySummary {
    pub cluster_id: usize,
    pub feature: FeatureKind,
    pub values: Vec<(String, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSection {
    pub threshold: f64,
    pub top_n: usize,
    pub clusters: Vec<ClusterReport>,
    pub ranking: Vec<RankedCandidate>,
    pub frequencies: Vec<FrequencySummary>,
}

fn split_ks(ks: &[usize], n: usize) -> (Vec<usize>, Vec<usize>) {
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    ks.into_iter().partition(|&k| k >= 2 && k < n)
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

fn assignments_csv(ids: &[String], labels: &[usize]) -> String {
    let mut s = String::from("id,cluster\n");
    for (id, l) in ids.iter().zip(labels) {
        s.push_str(&format!("{id},{l}\n"));
    }
    s
}

/// Stage runner bound to one configuration and output directory.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Pipeline { cfg })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn out_dir(&self) -> &Path {
        &self.cfg.output_dir
    }

    fn path(&self, name: &str) -> PathBuf {
        self.cfg.output_dir.join(name)
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        let p = self.path(name);
        if let Some(dir) = p.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(p, contents)?;
        Ok(())
    }

    fn read(&self, name: &str, producer: &str) -> Result<String> {
        let p = self.path(name);
        if !p.exists() {
            return Err(Error::MissingArtifact {
                artifact: name.to_owned(),
                producer: producer.to_owned(),
            });
        }
        Ok(fs::read_to_string(p)?)
    }

    fn read_json<T: DeserializeOwned>(&self, name: &str, producer: &str) -> Result<T> {
        Ok(serde_json::from_str(&self.read(name, producer)?)?)
    }

    fn timed<T>(&self, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| e.in_stage(stage))?;
        let secs = start.elapsed().as_secs_f64();
        log::info!("stage {stage} finished in {secs:.2}s");
        let mut timings: BTreeMap<String, f64> = fs::read_to_string(self.path(TIMINGS))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default();
        timings.insert(stage.to_owned(), secs);
        self.write(TIMINGS, &json(&timings)).map_err(|e| e.in_stage(stage))?;
        Ok(out)
    }

    fn drugs(&self) -> Result<DrugTable> {
        parse_drug_table(&self.read(FILTERED_DRUGS, "filter")?, &Schema::default())
    }

    /// Parses the input table and applies the down-selection filters.
    pub fn filter(&self) -> Result<FilterSection> {
        let path = &self.cfg.input.drugs;
        let table = self
            .timed("parse", || {
                let text = fs::read_to_string(path).map_err(|e| match e.kind() {
                    std::io::ErrorKind::NotFound => Error::FileNotFound(path.clone()),
                    _ => Error::Io(e),
                })?;
                parse_drug_table(&text, &self.cfg.input.schema)
            })?;
        self.timed("filter", || {
            let (kept, report) = apply_downselection(&table, &self.cfg.filter);
            log::info!("{} of {} drugs survive filtering", kept.len(), table.len());
            self.write(FILTERED_DRUGS, &write_drug_table(&kept, &Schema::default())?)?;
            self.write(FILTER_REPORT, &json(&report))?;
            Ok(FilterSection {
                input_count: report.input_count,
                kept_count: report.kept_count,
                removed_by_filter: report.removed_by_filter,
            })
        })
    }

    /// Clusters each textual feature and writes its co-membership matrix at
    /// full cohort size.
    pub fn tier1(&self) -> Result<Vec<Tier1Section>> {
        self.timed("tier1", || {
            let table = self.drugs()?;
            let full_ids = table.ids();
            let mut sections = Vec::new();
            for (i, kind) in FeatureKind::ALL.into_iter().enumerate() {
                let stage = self.cfg.tier1.get(kind);
                let mut section = Tier1Section {
                    feature: kind,
                    skipped: None,
                    rows: 0,
                    cols: 0,
                    algorithm: stage.algorithm,
                    candidate_k: vec![],
                    dropped_k: vec![],
                    table: vec![],
                    best_k: None,
                    best_silhouette: None,
                    elbow_k: None,
                    eigengap_k: None,
                    ddr_edges: 0,
                    ddr_size: full_ids.len(),
                };
                let mut ddr = DdrMatrix::empty(full_ids.clone());
                let mut member_labels = String::from("id,cluster\n");
                match build_relationship_matrix(&table, kind) {
                    Err(Error::NoFeatureData(_)) => section.skipped = Some("no drug carries this feature".into()),
                    Err(e) => return Err(e),
                    Ok(rel) => {
                        let (rows, cols) = rel.shape();
                        section.rows = rows;
                        section.cols = cols;
                        let (use_k, dropped) = split_ks(&stage.k, rows);
                        section.dropped_k = dropped;
                        if use_k.is_empty() {
                            section.skipped = Some(format!("no candidate k below {rows} rows"));
                        } else {
                            let points = rel.to_points();
                            let params = stage.params(derive_seed(self.cfg.seed, TIER1_SALT + i as u64));
                            let sel = select_best(points.view(), stage.algorithm, &use_k, &params)?;
                            log::info!(
                                "tier1 {}: {}x{} -> k={} (silhouette {:.3})",
                                kind,
                                rows,
                                cols,
                                sel.best.k,
                                sel.best.silhouette.unwrap_or(f64::NAN)
                            );
                            ddr = comembership(&sel.best, &rel.rows, &full_ids)?;
                            member_labels = assignments_csv(&rel.rows, &sel.best.labels);
                            section.candidate_k = use_k;
                            section.table = sel.table;
                            section.best_k = Some(sel.best.k);
                            section.best_silhouette = sel.best.silhouette;
                            section.elbow_k = sel.elbow_k;
                            section.eigengap_k = sel.eigengap_k;
                            section.ddr_edges = ddr.nnz() / 2;
                        }
                    }
                }
                if let Some(reason) = &section.skipped {
                    log::warn!("tier1 {kind} skipped: {reason}");
                }
                self.write(&tier1_assignments(kind), &member_labels)?;
                self.write(&tier1_edges(kind), &ddr.to_edge_csv())?;
                sections.push(section);
            }
            self.write(TIER1, &json(&sections))?;
            Ok(sections)
        })
    }

    /// OR-fuses the four tier-1 matrices into the final drug graph.
    pub fn fuse(&self) -> Result<FusionSection> {
        self.timed("fuse", || {
            let table = self.drugs()?;
            let ids = table.ids();
            let mats = FeatureKind::ALL
                .iter()
                .map(|&k| DdrMatrix::from_edge_csv(ids.clone(), &self.read(&tier1_edges(k), "tier1")?))
                .collect::<Result<Vec<_>>>()?;
            let fused = fuse_or(&mats)?;
            let labels: BTreeMap<String, String> =
                table.records().iter().map(|r| (r.id.clone(), r.name.clone())).collect();
            self.write(DDR_EDGES, &fused.to_edge_csv())?;
            self.write(DDR_DOT, &export_dot(&fused, &labels))?;
            let section = FusionSection {
                n: fused.len(),
                edges: fused.nnz() / 2,
                sparsity: sparsity(&fused),
                isolated: fused.degrees().iter().filter(|&&d| d == 0).count(),
            };
            log::info!("fused graph: {} edges, sparsity {:.3}", section.edges, section.sparsity);
            self.write(FUSE, &json(&section))?;
            Ok(section)
        })
    }

    /// Trains the configured autoencoder variant(s) on the fused graph with
    /// the numeric features and writes the embedding.
    pub fn embed(&self) -> Result<EmbeddingSection> {
        self.timed("embed", || {
            let table = self.drugs()?;
            let m = DdrMatrix::from_edge_csv(table.ids(), &self.read(DDR_EDGES, "fuse")?)?;
            let features = build_feature_matrix(&table, &self.cfg.features)?;
            let adj = normalize_adjacency(&m);
            let seed = derive_seed(self.cfg.seed, GAE_SALT);
            let mut best: Option<gae::TrainOutput> = None;
            let mut candidates = Vec::new();
            for variant in self.cfg.gae.variant.variants() {
                let out = gae::train(&adj, &features.data, &m, &self.cfg.gae.config(variant, seed))?;
                let final_loss = *out.history.last().expect("at least one epoch");
                log::info!("{variant}: final loss {final_loss:.4}");
                candidates.push(VariantLoss { variant, final_loss });
                let better = best
                    .as_ref()
                    .is_none_or(|b| final_loss < *b.history.last().expect("non-empty"));
                if better {
                    best = Some(out);
                }
            }
            let out = best.expect("at least one variant");
            let mut losses = String::from("epoch,loss\n");
            for (e, l) in out.history.iter().enumerate() {
                losses.push_str(&format!("{},{}\n", e + 1, l));
            }
            self.write(EMBEDDING, &gae::write_embedding_csv(&out.embedding)?)?;
            self.write(MODEL, &gae::write_model(&out.model))?;
            self.write(LOSS_HISTORY, &losses)?;
            let h = &out.history;
            let section = EmbeddingSection {
                variant: out.model.variant,
                n: out.embedding.z.nrows(),
                dim: out.embedding.z.ncols(),
                features_used: features.columns.len(),
                features_dropped: features.dropped.clone(),
                epochs: h.len(),
                initial_loss: h[0],
                final_loss: h[h.len() - 1],
                min_loss: h.iter().copied().fold(f64::INFINITY, f64::min),
                candidates,
                model_hash: out.embedding.model_hash.clone(),
                seed,
            };
            self.write(EMBED, &json(&section))?;
            Ok(section)
        })
    }

    fn embedding(&self, table: &DrugTable) -> Result<Array2<f64>> {
        let (ids, z) = gae::read_embedding_csv(&self.read(EMBEDDING, "embed")?)?;
        if ids != table.ids() {
            return Err(Error::Malformed {
                what: EMBEDDING.into(),
                reason: format!("rows differ from {FILTERED_DRUGS}"),
            });
        }
        Ok(z)
    }

    /// Clusters the embedding. `ks` overrides the configured candidate grid.
    pub fn tier2(&self, ks: Option<&[usize]>) -> Result<Tier2Section> {
        self.timed("tier2", || {
            let table = self.drugs()?;
            let z = self.embedding(&table)?;
            let stage = &self.cfg.tier2;
            let (use_k, dropped_k) = split_ks(ks.unwrap_or(&stage.k), z.nrows());
            if use_k.is_empty() {
                return Err(Error::InvalidParam(format!("no candidate k below {} drugs", z.nrows())));
            }
            let params = stage.params(derive_seed(self.cfg.seed, TIER2_SALT));
            let sel = select_best(z.view(), stage.algorithm, &use_k, &params)?;
            let section = Tier2Section {
                algorithm: stage.algorithm,
                candidate_k: use_k,
                dropped_k,
                table: sel.table,
                best_k: sel.best.k,
                best_silhouette: sel.best.silhouette.unwrap_or(f64::NAN),
                elbow_k: sel.elbow_k,
                eigengap_k: sel.eigengap_k,
            };
            log::info!("tier2: k={} (silhouette {:.3})", section.best_k, section.best_silhouette);
            self.write(ASSIGNMENTS, &assignments_csv(&table.ids(), &sel.best.labels))?;
            self.write(
                TIER2,
                &json(&Tier2Artifact {
                    section: section.clone(),
                    assignment: sel.best,
                }),
            )?;
            Ok(section)
        })
    }

    /// Finds clusters of interest and ranks candidates. `threshold` overrides
    /// the configured interest threshold.
    pub fn rank(&self, threshold: Option<f64>) -> Result<RankSection> {
        self.timed("rank", || {
            let threshold = threshold.unwrap_or(self.cfg.analysis.threshold);
            if !(0.0..=1.0).contains(&threshold) {
                return Err(Error::InvalidParam(format!("threshold {threshold} outside [0, 1]")));
            }
            let table = self.drugs()?;
            let z = self.embedding(&table)?;
            let t2: Tier2Artifact = self.read_json(TIER2, "tier2")?;
            let assign = t2.assignment;
            let clusters = analysis::clusters_of_interest(&assign, &table, threshold)?;
            let top_n = self.cfg.analysis.top_n;
            let ranking = analysis::rank_candidates(z.view(), &assign, &table, &clusters, top_n)?;
            let mut frequencies = Vec::new();
            for c in clusters.iter().filter(|c| c.of_interest) {
                for feature in FeatureKind::ALL {
                    let values = analysis::property_frequency(
                        &table,
                        &c.members,
                        feature,
                        self.cfg.analysis.frequency_top_n,
                    )?;
                    frequencies.push(FrequencySummary {
                        cluster_id: c.cluster_id,
                        feature,
                        values,
                    });
                }
            }
            log::info!(
                "{} clusters of interest, {} ranked candidates",
                clusters.iter().filter(|c| c.of_interest).count(),
                ranking.len()
            );
            self.write(RANKING, &analysis::ranking_csv(&ranking)?)?;
            let section = RankSection {
                threshold,
                top_n,
                clusters,
                ranking,
                frequencies,
            };
            self.write(RANK, &json(&section))?;
            Ok(section)
        })
    }

    /// Assembles the report from persisted artifacts only.
    pub fn report(&self) -> Result<RunReport> {
        let body = self.timed("report", || {
            let filter: crate::dataset::FilterReport = self.read_json(FILTER_REPORT, "filter")?;
            let t2: Tier2Artifact = self.read_json(TIER2, "tier2")?;
            let body = ReportBody {
                seed: self.cfg.seed,
                config_hash: self.cfg.hash(),
                filter: FilterSection {
                    input_count: filter.input_count,
                    kept_count: filter.kept_count,
                    removed_by_filter: filter.removed_by_filter,
                },
                tier1: self.read_json(TIER1, "tier1")?,
                fusion: self.read_json(FUSE, "fuse")?,
                embedding: self.read_json(EMBED, "embed")?,
                tier2: t2.section,
                analysis: self.read_json(RANK, "rank")?,
            };
            self.write(REPORT_JSON, &json(&body))?;
            self.write(REPORT_MD, &render_markdown(&body))?;
            Ok(body)
        })?;
        let timings = fs::read_to_string(self.path(TIMINGS))
            .ok()
            .and_then(|t| serde_json::from_str(&t).ok())
            .unwrap_or_default();
        Ok(RunReport { body, timings })
    }

    /// Every stage in order.
    pub fn run_all(&self) -> Result<RunReport> {
        self.filter()?;
        self.tier1()?;
        self.fuse()?;
        self.embed()?;
        self.tier2(None)?;
        self.rank(None)?;
        self.report()
    }
}

/// Runs the whole pipeline for `cfg`, writing artifacts under its output
/// directory.
pub fn run_pipeline(cfg: PipelineConfig) -> Result<RunReport> {
    Pipeline::new(cfg)?.run_all()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_filtered_to_valid_range() {
        assert_eq!(split_ks(&[5, 2, 10, 5, 1], 10), (vec![2, 5], vec![1, 10]));
    }

    #[test]
    fn assignments_csv_format() {
        let ids = vec!["a".to_string(), "b".to_string()];
        assert_eq!(assignments_csv(&ids, &[1, 0]), "id,cluster\na,1\nb,0\n");
    }
}
