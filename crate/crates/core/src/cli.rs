//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cluster::{clustering_embeddings, kmeans, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::data::{self, partition_head_tail, read_split, split_dataset, write_split, DataSplit};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalTarget, DEFAULT_N};
use crate::model::{load_checkpoint, save_checkpoint, ModelParams, NormalizedAdjacency};
use crate::synth::{generate, write_interactions, SynthConfig};
use crate::trainer::{analyze_gradients, train, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "icmt", version, about = "Long-tail recommendation with cluster-wise Pareto-efficient training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Load, k-core filter and split an interaction log.
    Prepare {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = data::DEFAULT_MIN_CORE)]
        min_core: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a prepared split.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Top-N evaluation of a checkpoint on the test split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_N)]
        n: usize,
        /// Rank over the whole catalogue, including known positives.
        #[arg(long)]
        include_seen: bool,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-item gradient norms and head/tail gradient cosines.
    AnalyzeGradients {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 5)]
        top_pairs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster items by their clustering embeddings and dump the assignment.
    InspectClusters {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = crate::cluster::DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic Zipf-distributed interaction log.
    Synth {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        items: usize,
        #[arg(long)]
        zipf: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        per_user: usize,
        #[arg(long, default_value_t = 0.9)]
        affinity: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Provenance written as `manifest.json` into every output directory.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub dataset: DatasetFingerprint,
    pub seed: u64,
    pub version: String,
    /// Seconds since the epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub started_unix: u64,
    pub finished_unix: u64,
}

#[derive(Debug, Serialize)]
pub struct DatasetFingerprint {
    pub interactions: usize,
    pub sha256: String,
}

fn now_unix() -> u64 {
    if let Some(fixed) = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse().ok())
    {
        return fixed;
    }
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn split_fingerprint(split: &DataSplit) -> DatasetFingerprint {
    let mut h = Sha256::new();
    for (tag, pairs) in [(b"T", &split.train), (b"V", &split.validation), (b"E", &split.test)] {
        h.update(tag);
        for (u, i) in pairs {
            h.update((*u as u64).to_le_bytes());
            h.update((*i as u64).to_le_bytes());
        }
    }
    DatasetFingerprint {
        interactions: split.train.len() + split.validation.len() + split.test.len(),
        sha256: hex::encode(h.finalize()),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => write_file(path, text.as_bytes()),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn load_model(checkpoint: &Path, split: &DataSplit) -> Result<ModelParams> {
    let (params, header) = load_checkpoint(checkpoint)?;
    if header.n_users != split.n_users || header.n_items != split.n_items {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint has {} users x {} items, dataset has {} x {}",
            header.n_users, header.n_items, split.n_users, split.n_items
        )));
    }
    Ok(params)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare {
            input,
            min_core,
            seed,
            out,
        } => {
            let started = now_unix();
            let raw = std::fs::read(&input).map_err(|e| Error::io(&input, e))?;
            let ds = data::load_interactions(&input, min_core)?;
            let split = split_dataset(&ds, data::PAPER_RATIOS, seed)?;
            write_split(&out, &split)?;
            let manifest = RunManifest {
                command: "prepare".into(),
                config: serde_json::json!({
                    "input": input.display().to_string(),
                    "min_core": min_core,
                    "ratios": data::PAPER_RATIOS,
                    "input_sha256": hex::encode(Sha256::digest(&raw)),
                }),
                dataset: split_fingerprint(&split),
                seed,
                version: env!("CARGO_PKG_VERSION").into(),
                started_unix: started,
                finished_unix: now_unix(),
            };
            write_json(&out.join("manifest.json"), &manifest)?;
            log::info!(
                "{} users, {} items, {} interactions -> {}",
                ds.n_users,
                ds.n_items,
                ds.len(),
                out.display()
            );
            Ok(())
        }
        Command::Train { config, data, out } => {
            let started = now_unix();
            let text = std::fs::read_to_string(&config).map_err(|e| Error::io(&config, e))?;
            let cfg = TrainConfig::from_json(&text)?;
            let split = read_split(&data)?;
            let outcome = train(&cfg, &split)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
            save_checkpoint(&out.join("checkpoint.bin"), &outcome.params, cfg.seed)?;
            write_file(&out.join("history.csv"), outcome.history.to_csv().as_bytes())?;
            if cfg.debug_pe_trace {
                let mut csv = String::from("batch,iteration,objective,gamma\n");
                for (b, s) in &outcome.pe_trace {
                    csv.push_str(&format!("{b},{},{},{}\n", s.iteration, s.objective, s.gamma));
                }
                write_file(&out.join("pe_trace.csv"), csv.as_bytes())?;
            }
            let manifest = RunManifest {
                command: "train".into(),
                config: serde_json::to_value(&cfg)?,
                dataset: split_fingerprint(&split),
                seed: cfg.seed,
                version: env!("CARGO_PKG_VERSION").into(),
                started_unix: started,
                finished_unix: now_unix(),
            };
            write_json(&out.join("manifest.json"), &manifest)
        }
        Command::Eval {
            checkpoint,
            data,
            n,
            include_seen,
            out,
        } => {
            let split = read_split(&data)?;
            if n == 0 || n > split.n_items {
                return Err(Error::Precondition(format!(
                    "N = {n} must lie in 1..={} (number of items)",
                    split.n_items
                )));
            }
            let params = load_model(&checkpoint, &split)?;
            let adj = NormalizedAdjacency::new(split.n_users, split.n_items, &split.train);
            let partition = partition_head_tail(&split.train_dataset());
            let report = evaluate(&params, &adj, &split, &partition, n, EvalTarget::Test, !include_seen);
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            emit(out.as_deref(), &text)
        }
        Command::AnalyzeGradients {
            checkpoint,
            data,
            top_pairs,
            out,
        } => {
            let split = read_split(&data)?;
            let params = load_model(&checkpoint, &split)?;
            let report = analyze_gradients(&params, &split, top_pairs);
            let mut text = serde_json::to_string_pretty(&report)?;
            text.push('\n');
            emit(out.as_deref(), &text)
        }
        Command::InspectClusters {
            checkpoint,
            data,
            k,
            seed,
            out,
        } => {
            let split = read_split(&data)?;
            let params = load_model(&checkpoint, &split)?;
            let adj = NormalizedAdjacency::new(split.n_users, split.n_items, &split.train);
            let ds = split.train_dataset();
            let partition = partition_head_tail(&ds);
            let emb = clustering_embeddings(&params.representations(&adj), &params.pop_emb);
            let assign = kmeans(&emb, params.dim, k, seed, DEFAULT_MAX_ITER, DEFAULT_TOL)?;
            let mut csv = String::from("item_id,cluster_id,popularity,head_or_tail\n");
            for (i, c) in assign.assign.iter().enumerate() {
                let side = if partition.is_tail(i) { "tail" } else { "head" };
                csv.push_str(&format!("{i},{c},{},{side}\n", ds.popularity[i]));
            }
            emit(out.as_deref(), &csv)
        }
        Command::Synth {
            users,
            items,
            zipf,
            seed,
            per_user,
            affinity,
            out,
        } => {
            let cfg = SynthConfig {
                n_users: users,
                n_items: items,
                zipf,
                per_user,
                affinity,
                seed,
            };
            let pairs = generate(&cfg)?;
            write_interactions(&out, &cfg, &pairs)
        }
    }
}
