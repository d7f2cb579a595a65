use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{DEFAULT_INTEREST_THRESHOLD, DEFAULT_TOP_N};
use crate::clustering::{Algorithm, ClusterParams, Linkage};
use crate::dataset::{FeatureKind, FilterConfig, ImputePolicy, Schema};
use crate::error::{Error, Result};
use crate::gae::{GaeConfig, Optimizer, Variant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub drugs: PathBuf,
    pub schema: Schema,
}

impl Default for InputConfig {
    fn default() -> Self {
        InputConfig {
            drugs: PathBuf::from("drugs.csv"),
            schema: Schema::default(),
        }
    }
}

/// Algorithm, candidate k grid and algorithm parameters for one clustering
/// stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageClustering {
    pub algorithm: Algorithm,
    pub k: Vec<usize>,
    pub linkage: Linkage,
    pub n_neighbors: usize,
    pub max_iter: usize,
    pub n_init: usize,
}

impl StageClustering {
    pub fn agglomerative(k: Vec<usize>) -> Self {
        StageClustering {
            algorithm: Algorithm::Agglomerative,
            k,
            linkage: Linkage::Ward,
            n_neighbors: 7,
            max_iter: 300,
            n_init: 10,
        }
    }

    pub fn params(&self, seed: u64) -> ClusterParams {
        ClusterParams {
            seed,
            max_iter: self.max_iter,
            n_init: self.n_init,
            linkage: self.linkage,
            n_neighbors: self.n_neighbors,
        }
    }
}

impl Default for StageClustering {
    fn default() -> Self {
        Self::agglomerative((50..=190).step_by(20).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tier1Config {
    pub moa: StageClustering,
    pub pathway: StageClustering,
    pub indication: StageClustering,
    pub target: StageClustering,
}

impl Default for Tier1Config {
    fn default() -> Self {
        let s = StageClustering::default();
        Tier1Config {
            moa: s.clone(),
            pathway: s.clone(),
            indication: s.clone(),
            target: s,
        }
    }
}

impl Tier1Config {
    pub fn get(&self, kind: FeatureKind) -> &StageClustering {
        match kind {
            FeatureKind::MoA => &self.moa,
            FeatureKind::Pathway => &self.pathway,
            FeatureKind::Indication => &self.indication,
            FeatureKind::Target => &self.target,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantChoice {
    #[default]
    Gae,
    Vgae,
    /// Train both and keep the lower final loss.
    Compare,
}

impl VariantChoice {
    pub fn variants(self) -> Vec<Variant> {
        match self {
            VariantChoice::Gae => vec![Variant::Gae],
            VariantChoice::Vgae => vec![Variant::Vgae],
            VariantChoice::Compare => vec![Variant::Gae, Variant::Vgae],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaeSection {
    pub hidden: usize,
    pub embedding: usize,
    pub lr: f64,
    pub epochs: usize,
    pub variant: VariantChoice,
    pub optimizer: Optimizer,
}

impl Default for GaeSection {
    fn default() -> Self {
        let d = GaeConfig::default();
        GaeSection {
            hidden: d.hidden,
            embedding: d.embedding,
            lr: d.lr,
            epochs: d.epochs,
            variant: VariantChoice::Gae,
            optimizer: d.optimizer,
        }
    }
}

impl GaeSection {
    pub fn config(&self, variant: Variant, seed: u64) -> GaeConfig {
        GaeConfig {
            hidden: self.hidden,
            embedding: self.embedding,
            lr: self.lr,
            epochs: self.epochs,
            seed,
            variant,
            optimizer: self.optimizer,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub threshold: f64,
    pub top_n: usize,
    /// Values listed per feature kind in the property frequency summary.
    pub frequency_top_n: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            threshold: DEFAULT_INTEREST_THRESHOLD,
            top_n: DEFAULT_TOP_N,
            frequency_top_n: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub input: InputConfig,
    pub filter: FilterConfig,
    pub features: ImputePolicy,
    pub tier1: Tier1Config,
    pub gae: GaeSection,
    pub tier2: StageClustering,
    pub analysis: AnalysisConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            output_dir: PathBuf::from("out"),
            input: InputConfig::default(),
            filter: FilterConfig::default(),
            features: ImputePolicy::default(),
            tier1: Tier1Config::default(),
            gae: GaeSection::default(),
            tier2: StageClustering::agglomerative((10..=20).collect()),
            analysis: AnalysisConfig::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn check_stage(name: &str, s: &StageClustering) -> Result<()> {
    if s.k.is_empty() {
        return Err(invalid(format!("{name}.k must list at least one value")));
    }
    if s.k.iter().any(|&k| k < 2) {
        return Err(invalid(format!("{name}.k values must be at least 2")));
    }
    if s.n_neighbors == 0 || s.max_iter == 0 || s.n_init == 0 {
        return Err(invalid(format!("{name}: n_neighbors, max_iter and n_init must be positive")));
    }
    Ok(())
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_owned()),
            _ => Error::Io(e),
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        if cfg.input.drugs.is_relative() {
            cfg.input.drugs = base.join(&cfg.input.drugs);
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.filter;
        if !(f.cc50_min.is_finite() && f.cc50_min >= 0.0) {
            return Err(invalid("filter.cc50_min must be a non-negative number"));
        }
        if !(f.ic50_max_ratio.is_finite() && f.ic50_max_ratio > 0.0) {
            return Err(invalid("filter.ic50_max_ratio must be positive"));
        }
        if !(0.0..=1.0).contains(&self.features.max_missing_fraction) {
            return Err(invalid("features.max_missing_fraction must lie in [0, 1]"));
        }
        for kind in FeatureKind::ALL {
            check_stage(&format!("tier1.{}", kind.name()), self.tier1.get(kind))?;
        }
        check_stage("tier2", &self.tier2)?;
        let g = &self.gae;
        if g.hidden == 0 || g.embedding == 0 || g.epochs == 0 {
            return Err(invalid("gae.hidden, gae.embedding and gae.epochs must be positive"));
        }
        if !(g.lr.is_finite() && g.lr > 0.0) {
            return Err(invalid("gae.lr must be positive"));
        }
        let a = &self.analysis;
        if !(0.0..=1.0).contains(&a.threshold) {
            return Err(invalid("analysis.threshold must lie in [0, 1]"));
        }
        if a.top_n == 0 {
            return Err(invalid("analysis.top_n must be positive"));
        }
        Ok(())
    }

    /// SHA-256 over every setting except file locations, so equivalent
    /// configs hash equally wherever their inputs and outputs live.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        let obj = v.as_object_mut().expect("config is a table");
        obj.remove("output_dir");
        if let Some(input) = obj.get_mut("input").and_then(|i| i.as_object_mut()) {
            input.remove("drugs");
        }
        hex::encode(Sha256::digest(v.to_string().as_bytes()))
    }
}
