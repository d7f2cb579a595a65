use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use repurpose::dataset::{write_drug_table, Schema};
use repurpose::pipeline::{Pipeline, PipelineConfig};
use repurpose::synthetic::{generate_drugs, SyntheticSpec};

/// Two-tier drug clustering and repurposing candidate ranking.
#[derive(Debug, Parser)]
#[command(name = "repurpose", version)]
struct Cli {
    /// Pipeline configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse the input table and apply the down-selection filters.
    Filter,
    /// Cluster each textual feature and build co-membership matrices.
    Tier1,
    /// OR-fuse the tier-1 matrices into the drug graph.
    Fuse,
    /// Train the graph autoencoder and write the embedding.
    Embed,
    /// Cluster the embedding.
    Tier2 {
        /// Candidate cluster counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
    /// Find clusters of interest and rank candidates.
    Rank {
        /// Minimum fraction of trial drugs for a cluster of interest.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Regenerate report.json and report.md from stored artifacts.
    Report,
    /// Run every stage in order.
    RunAll,
    /// Write a synthetic drug table with planted groups.
    Synth {
        /// Destination CSV.
        #[arg(long)]
        drugs: PathBuf,
        /// Generate the small variant instead of the full-size one.
        #[arg(long)]
        small: bool,
    },
}

fn run(cli: Cli) -> repurpose::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Command::Synth { drugs, small } = &cli.command {
        let spec = if *small {
            SyntheticSpec::small()
        } else {
            SyntheticSpec::full_size()
        };
        let syn = generate_drugs(&spec, cfg.seed);
        std::fs::write(drugs, write_drug_table(&syn.table, &Schema::default())?)?;
        log::info!("wrote {} drugs to {}", syn.table.len(), drugs.display());
        return Ok(());
    }
    let p = Pipeline::new(cfg)?;
    match cli.command {
        Command::Filter => {
            let s = p.filter()?;
            println!("kept {} of {} drugs", s.kept_count, s.input_count);
        }
        Command::Tier1 => {
            for s in p.tier1()? {
                match (&s.skipped, s.best_k) {
                    (Some(reason), _) => println!("{}: skipped ({reason})", s.feature),
                    (None, Some(k)) => println!("{}: {}x{} k={k}", s.feature, s.rows, s.cols),
                    (None, None) => {}
                }
            }
        }
        Command::Fuse => {
            let s = p.fuse()?;
            println!("{} drugs, {} edges, sparsity {:.3}", s.n, s.edges, s.sparsity);
        }
        Command::Embed => {
            let s = p.embed()?;
            println!("{} final loss {:.4}", s.variant, s.final_loss);
        }
        Command::Tier2 { k } => {
            let s = p.tier2(k.as_deref())?;
            println!("k={} silhouette {:.4}", s.best_k, s.best_silhouette);
        }
        Command::Rank { threshold } => {
            let s = p.rank(threshold)?;
            println!(
                "{} clusters of interest, {} candidates ranked",
                s.clusters.iter().filter(|c| c.of_interest).count(),
                s.ranking.len()
            );
        }
        Command::Report => {
            p.report()?;
            println!("report written to {}", p.out_dir().display());
        }
        Command::RunAll => {
            let r = p.run_all()?;
            for (stage, secs) in &r.timings {
                println!("{stage:>7} {secs:8.2}s");
            }
            println!("report written to {}", p.out_dir().display());
        }
        Command::Synth { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
