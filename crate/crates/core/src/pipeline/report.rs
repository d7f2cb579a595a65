use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{EmbeddingSection, FilterSection, FusionSection, RankSection, Tier1Section, Tier2Section};
use crate::analysis::composition_table;
use crate::clustering::SelectionRow;

/// Deterministic part of a run: identical config and inputs give an
/// identical body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub seed: u64,
    pub config_hash: String,
    pub filter: FilterSection,
    pub tier1: Vec<Tier1Section>,
    pub fusion: FusionSection,
    pub embedding: EmbeddingSection,
    pub tier2: Tier2Section,
    pub analysis: RankSection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub body: ReportBody,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

fn selection_table(out: &mut String, rows: &[SelectionRow], best: Option<usize>) {
    out.push_str("| k | silhouette | inertia |\n|---|---|---|\n");
    for r in rows {
        let mark = if Some(r.k) == best { " **" } else { "" };
        let inertia = r.inertia.map_or("-".to_owned(), |v| format!("{v:.2}"));
        let _ = writeln!(out, "| {}{mark} | {:.4} | {inertia} |", r.k, r.silhouette);
    }
    out.push('\n');
}

pub fn render_markdown(b: &ReportBody) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Drug repurposing run\n");
    let _ = writeln!(s, "seed {}, config `{}`\n", b.seed, &b.config_hash[..16.min(b.config_hash.len())]);

    let _ = writeln!(s, "## Down-selection\n");
    let _ = writeln!(s, "{} of {} drugs kept.\n", b.filter.kept_count, b.filter.input_count);
    s.push_str("| filter | removed |\n|---|---|\n");
    for (f, n) in &b.filter.removed_by_filter {
        let _ = writeln!(s, "| {} | {n} |", serde_json::to_value(f).unwrap().as_str().unwrap_or(""));
    }
    s.push('\n');

    let _ = writeln!(s, "## Tier 1\n");
    for t in &b.tier1 {
        let _ = write!(s, "### {} ({}x{}, {})\n\n", t.feature, t.rows, t.cols, t.algorithm);
        if let Some(reason) = &t.skipped {
            let _ = writeln!(s, "skipped: {reason}\n");
            continue;
        }
        selection_table(&mut s, &t.table, t.best_k);
        if let Some(k) = t.elbow_k {
            let _ = writeln!(s, "elbow at k={k}\n");
        }
        if let Some(k) = t.eigengap_k {
            let _ = writeln!(s, "eigengap suggests k={k}\n");
        }
    }

    let f = &b.fusion;
    let _ = writeln!(s, "## Fused graph\n");
    let _ = writeln!(
        s,
        "{} drugs, {} edges, sparsity {:.3}, {} isolated.\n",
        f.n, f.edges, f.sparsity, f.isolated
    );

    let e = &b.embedding;
    let _ = writeln!(s, "## Embedding\n");
    let _ = writeln!(
        s,
        "{} on {} numeric features, {}x{} embedding. Loss {:.4} -> {:.4} over {} epochs.\n",
        e.variant, e.features_used, e.n, e.dim, e.initial_loss, e.final_loss, e.epochs
    );
    if e.candidates.len() > 1 {
        for c in &e.candidates {
            let _ = writeln!(s, "- {}: final loss {:.4}", c.variant, c.final_loss);
        }
        s.push('\n');
    }

    let _ = writeln!(s, "## Tier 2 ({})\n", b.tier2.algorithm);
    selection_table(&mut s, &b.tier2.table, Some(b.tier2.best_k));

    let a = &b.analysis;
    let _ = writeln!(s, "## Cluster composition (threshold {:.2})\n", a.threshold);
    s.push_str(&composition_table(&a.clusters));
    s.push('\n');

    let _ = writeln!(s, "## Top candidates\n");
    s.push_str("| rank | name | nearest trial drug | phase | distance |\n|---|---|---|---|---|\n");
    for c in &a.ranking {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {:.2} |",
            c.rank,
            c.name,
            c.nearest_trial_id,
            c.nearest_phase.label(),
            c.distance
        );
    }
    s.push('\n');

    if !a.frequencies.is_empty() {
        let _ = writeln!(s, "## Frequent properties in clusters of interest\n");
        for fs in &a.frequencies {
            let values: Vec<String> = fs.values.iter().map(|(v, n)| format!("{v} ({n})")).collect();
            let _ = writeln!(s, "- cluster {} {}: {}", fs.cluster_id, fs.feature, values.join(", "));
        }
    }
    s
}
