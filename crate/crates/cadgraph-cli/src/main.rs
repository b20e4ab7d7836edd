//! cadgraph command-line pipeline.
//!
//! Subcommands cover the full flow: `generate` a synthetic dataset,
//! `convert` parts into the binary graph cache, `train` the encoder,
//! `embed` a cache into an index, `query` it, `eval` ranking metrics, and
//! `assembly` retrieval by part votes. Every command is deterministic in
//! its (inputs, config, seed); exit codes are 0 on success, 2 on contract
//! errors, 3 on I/O errors. The `CADGRAPH_LOG` env var (`quiet`, `info`,
//! `debug`) controls stderr verbosity.

mod commands;
mod util;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "cadgraph",
    about = "BRep parts to graphs, self-supervised shape embeddings, similarity retrieval",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic part dataset with family labels and a schema.
    Generate {
        /// JSON file with an array of family specs (defaults to the
        /// built-in ten-family set).
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Parts per family.
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory for parts.jsonl, labels.json, schema.json,
        /// manifest.json.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Convert a parts JSONL file into the binary graph cache.
    Convert {
        #[arg(long)]
        parts: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Optional conversion report (skipped seams, merged duplicates).
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        gu: usize,
        #[arg(long, default_value_t = 10)]
        gv: usize,
        #[arg(long, default_value_t = 10)]
        gt: usize,
    },
    /// Train the encoder on a graph cache.
    Train {
        #[arg(long)]
        cache: PathBuf,
        /// Output directory for best.ckpt and history.jsonl.
        #[arg(long)]
        out_dir: PathBuf,
        /// JSON config file with optional "train" and "encoder" sections.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        temperature: Option<f64>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        /// Structure augmentation scheme: node | node1hop | edge_vertices.
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        min_epochs: Option<usize>,
        #[arg(long)]
        patience: Option<usize>,
    },
    /// Embed every cached graph with a checkpoint; writes an index file.
    Embed {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        cache: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query an index by part id or by a single-part JSONL file.
    Query {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        part_id: Option<String>,
        /// A one-part JSONL file (requires --checkpoint and --schema).
        #[arg(long)]
        part_file: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(short, default_value_t = 10)]
        k: usize,
        /// Optional JSON output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate Recall@K / NDCG@K against labels.
    Eval {
        #[arg(long)]
        index: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Comma-separated K list.
        #[arg(long, default_value = "5,10")]
        k: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Assembly retrieval: rank assemblies by aggregated part votes.
    Assembly {
        #[arg(long)]
        index: PathBuf,
        /// JSON file: {"assemblies": [{"id": ..., "parts": [...]}]}.
        #[arg(long)]
        memberships: PathBuf,
        /// Query assembly id (must appear in the memberships file).
        #[arg(long)]
        query: String,
        #[arg(long, default_value_t = 10)]
        k_parts: usize,
        #[arg(long, default_value_t = 5)]
        k_out: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let log = util::Logger::from_env();
    let outcome = match cli.command {
        Command::Generate {
            spec,
            count,
            seed,
            out_dir,
        } => commands::generate::run(&log, spec.as_deref(), count, seed, &out_dir),
        Command::Convert {
            parts,
            schema,
            out,
            report,
            gu,
            gv,
            gt,
        } => commands::convert::run(&log, &parts, &schema, &out, report.as_deref(), (gu, gv, gt)),
        Command::Train {
            cache,
            out_dir,
            config,
            seed,
            learning_rate,
            temperature,
            alpha,
            beta,
            scheme,
            batch_size,
            max_epochs,
            min_epochs,
            patience,
        } => commands::train::run(
            &log,
            &cache,
            &out_dir,
            config.as_deref(),
            commands::train::Overrides {
                seed,
                learning_rate,
                temperature,
                alpha,
                beta,
                scheme,
                batch_size,
                max_epochs,
                min_epochs,
                patience,
            },
        ),
        Command::Embed {
            checkpoint,
            cache,
            out,
        } => commands::embed::run(&log, &checkpoint, &cache, &out),
        Command::Query {
            index,
            part_id,
            part_file,
            checkpoint,
            schema,
            k,
            out,
        } => commands::query::run(
            &log,
            &index,
            part_id.as_deref(),
            part_file.as_deref(),
            checkpoint.as_deref(),
            schema.as_deref(),
            k,
            out.as_deref(),
        ),
        Command::Eval {
            index,
            labels,
            k,
            out,
        } => commands::eval::run(&log, &index, &labels, &k, out.as_deref()),
        Command::Assembly {
            index,
            memberships,
            query,
            k_parts,
            k_out,
            out,
        } => commands::assembly::run(
            &log,
            &index,
            &memberships,
            &query,
            k_parts,
            k_out,
            out.as_deref(),
        ),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if err.is_io() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
