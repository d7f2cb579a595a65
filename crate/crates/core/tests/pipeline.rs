use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use repurpose::dataset::{write_drug_table, Category, DrugRecord, DrugTable, Phase, Schema};
use repurpose::pipeline::{Pipeline, PipelineConfig, StageClustering, Tier1Config};
use repurpose::synthetic::{generate_drugs, SyntheticSpec};
use repurpose::Error;

fn small_config(dir: &Path, seed: u64) -> PipelineConfig {
    let syn = generate_drugs(&SyntheticSpec::small(), seed);
    let input = dir.join("drugs.csv");
    fs::write(&input, write_drug_table(&syn.table, &Schema::default()).unwrap()).unwrap();
    let mut cfg = PipelineConfig {
        seed,
        output_dir: dir.join("out"),
        ..PipelineConfig::default()
    };
    cfg.input.drugs = input;
    let t1 = StageClustering::agglomerative(vec![4, 6, 8, 10]);
    cfg.tier1 = Tier1Config {
        moa: t1.clone(),
        pathway: t1.clone(),
        indication: t1.clone(),
        target: t1,
    };
    cfg.gae.hidden = 16;
    cfg.gae.embedding = 4;
    cfg.gae.epochs = 60;
    cfg.tier2 = StageClustering::agglomerative(vec![2, 3, 4, 5]);
    cfg
}

fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_owned()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timings.json" {
                let key = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(key, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn bundled_dataset_matches_generator() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let on_disk = fs::read_to_string(root.join("synthetic_drugs.csv")).unwrap();
    let syn = generate_drugs(&SyntheticSpec::full_size(), 42);
    assert_eq!(on_disk, write_drug_table(&syn.table, &Schema::default()).unwrap());
    let cfg = PipelineConfig::load(&root.join("pipeline.toml")).unwrap();
    assert!(cfg.input.drugs.ends_with("synthetic_drugs.csv"));
    assert_eq!(cfg.seed, 42);
}

#[test]
fn staged_equals_monolithic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = small_config(a.path(), 3);
    let cb = small_config(b.path(), 3);

    let mono = repurpose::pipeline::run_pipeline(ca.clone()).unwrap();
    let p = Pipeline::new(cb.clone()).unwrap();
    p.filter().unwrap();
    p.tier1().unwrap();
    p.fuse().unwrap();
    p.embed().unwrap();
    p.tier2(None).unwrap();
    p.rank(None).unwrap();
    let staged = p.report().unwrap();

    assert_eq!(mono.body, staged.body);
    assert_eq!(artifacts(&ca.output_dir), artifacts(&cb.output_dir));
    assert!(mono.body.analysis.ranking.len() <= 15);
    assert_eq!(mono.body.tier1.len(), 4);
    assert!(mono.timings.contains_key("embed"));
}

#[test]
fn rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 11);
    repurpose::pipeline::run_pipeline(cfg.clone()).unwrap();
    let first = artifacts(&cfg.output_dir);
    repurpose::pipeline::run_pipeline(cfg.clone()).unwrap();
    assert_eq!(first, artifacts(&cfg.output_dir));
}

#[test]
fn tier2_override_does_not_retrain() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 5);
    let p = Pipeline::new(cfg.clone()).unwrap();
    p.run_all().unwrap();
    let emb = fs::read(cfg.output_dir.join("embedding.csv")).unwrap();
    let model = fs::read(cfg.output_dir.join("model.txt")).unwrap();
    let s = p.tier2(Some(&[2, 3])).unwrap();
    assert_eq!(s.candidate_k, [2, 3]);
    assert_eq!(s.table.len(), 2);
    assert_eq!(emb, fs::read(cfg.output_dir.join("embedding.csv")).unwrap());
    assert_eq!(model, fs::read(cfg.output_dir.join("model.txt")).unwrap());
    let report = p.report().unwrap();
    assert_eq!(report.body.tier2.candidate_k, [2, 3]);
}

#[test]
fn rank_threshold_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 5);
    let p = Pipeline::new(cfg).unwrap();
    p.run_all().unwrap();
    let r = p.rank(Some(0.0)).unwrap();
    assert_eq!(r.threshold, 0.0);
    assert!(r.clusters.iter().all(|c| c.of_interest));
    let r = p.rank(Some(1.0)).unwrap();
    assert!(r.clusters.iter().filter(|c| c.of_interest).all(|c| c.count_b == 0));
    assert!(r.ranking.is_empty());
    assert!(p.rank(Some(1.5)).is_err());
}

#[test]
fn missing_input_names_stage_and_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = PipelineConfig::default();
    let missing = dir.path().join("nope.csv");
    cfg.input.drugs = missing.clone();
    cfg.output_dir = dir.path().join("out");
    let err = repurpose::pipeline::run_pipeline(cfg).unwrap_err();
    assert_eq!(err.to_string(), format!("stage parse: file not found {}", missing.display()));
}

#[test]
fn missing_artifact_names_producer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1);
    let p = Pipeline::new(cfg).unwrap();
    p.filter().unwrap();
    let err = p.fuse().unwrap_err();
    assert!(matches!(&err, Error::Stage { stage, .. } if stage == "fuse"));
    assert!(err.to_string().contains("run `tier1` first"), "{err}");
    let err = p.report().unwrap_err();
    assert!(err.to_string().starts_with("stage report: missing artifact"), "{err}");
}

#[test]
fn feature_without_data_is_marked_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path(), 2);
    let syn = generate_drugs(&SyntheticSpec::small(), 2);
    let recs: Vec<DrugRecord> = syn
        .table
        .records()
        .iter()
        .cloned()
        .map(|mut r| {
            r.pathway.clear();
            r
        })
        .collect();
    let table = DrugTable::new(recs, syn.table.numeric_names().to_vec()).unwrap();
    fs::write(&cfg.input.drugs, write_drug_table(&table, &Schema::default()).unwrap()).unwrap();
    cfg.gae.epochs = 5;
    let report = repurpose::pipeline::run_pipeline(cfg).unwrap();
    let pathway = report.body.tier1.iter().find(|s| s.feature.name() == "pathway").unwrap();
    assert!(pathway.skipped.is_some());
    assert_eq!(pathway.ddr_edges, 0);
    assert_eq!(pathway.ddr_size, report.body.fusion.n);
}

#[test]
fn ranking_respects_clusters_and_categories() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 9);
    let p = Pipeline::new(cfg.clone()).unwrap();
    let report = p.run_all().unwrap();
    let table = repurpose::dataset::parse_drug_table(
        &fs::read_to_string(cfg.output_dir.join("filtered_drugs.csv")).unwrap(),
        &Schema::default(),
    )
    .unwrap();
    let interest: BTreeMap<usize, &Vec<String>> = report
        .body
        .analysis
        .clusters
        .iter()
        .filter(|c| c.of_interest)
        .map(|c| (c.cluster_id, &c.members))
        .collect();
    for (i, c) in report.body.analysis.ranking.iter().enumerate() {
        assert_eq!(c.rank, i + 1);
        assert_eq!(table.get(&c.drug_id).unwrap().category, Category::B);
        let trial = table.get(&c.nearest_trial_id).unwrap();
        assert_eq!(trial.category, Category::A);
        assert_eq!(trial.phase, Some(c.nearest_phase));
        let members = interest[&c.cluster_id];
        assert!(members.contains(&c.drug_id) && members.contains(&c.nearest_trial_id));
    }
    let phases: Vec<Phase> = report.body.analysis.ranking.iter().map(|c| c.nearest_phase).collect();
    assert!(phases.windows(2).all(|w| w[0] <= w[1]));
    let md = fs::read_to_string(cfg.output_dir.join("report.md")).unwrap();
    assert!(md.contains("## Tier 2"));
}
