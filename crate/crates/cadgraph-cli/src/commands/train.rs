//! `train`: contrastive training over a graph cache.

use std::path::Path;

use cadgraph::augment::AugmentScheme;
use cadgraph::encoder::EncoderConfig;
use cadgraph::error::{Error, Result};
use cadgraph::features::read_cache;
use cadgraph::nn::checkpoint;
use cadgraph::train::{train, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::util::{self, Logger};

/// Flag-level overrides applied on top of the config file.
#[derive(Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub learning_rate: Option<f64>,
    pub temperature: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub scheme: Option<String>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub min_epochs: Option<usize>,
    pub patience: Option<usize>,
}

/// Optional config file sections; grid dims and the product width always
/// come from the cache header.
#[derive(Default, Deserialize)]
struct ConfigFile {
    #[serde(default)]
    train: Option<TrainConfig>,
    #[serde(default)]
    encoder: Option<EncoderConfig>,
}

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    command: &'static str,
    train: &'a TrainConfig,
    encoder: &'a EncoderConfig,
}

fn parse_scheme(name: &str) -> Result<AugmentScheme> {
    match name {
        "node" => Ok(AugmentScheme::Node),
        "node1hop" | "node_1hop" => Ok(AugmentScheme::Node1Hop),
        "edge_vertices" | "edgevertices" => Ok(AugmentScheme::EdgeVertices),
        other => Err(Error::Config(format!(
            "unknown augmentation scheme {other:?} (expected node | node1hop | edge_vertices)"
        ))),
    }
}

pub fn run(
    log: &Logger,
    cache_path: &Path,
    out_dir: &Path,
    config_path: Option<&Path>,
    overrides: Overrides,
) -> Result<()> {
    let (header, dataset) = read_cache(cache_path)?;
    let file: ConfigFile = match config_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            serde_json::from_str(&text)?
        }
        None => ConfigFile::default(),
    };
    let mut train_cfg = file.train.unwrap_or_default();
    let mut encoder_cfg = file.encoder.unwrap_or_default();
    encoder_cfg.grid = header.dims;
    encoder_cfg.product_dim = header.product_dim;

    if let Some(seed) = overrides.seed {
        train_cfg.seed = seed;
        train_cfg.augment.seed = seed;
    }
    if let Some(lr) = overrides.learning_rate {
        train_cfg.learning_rate = lr;
    }
    if let Some(tau) = overrides.temperature {
        train_cfg.temperature = tau;
    }
    if let Some(alpha) = overrides.alpha {
        train_cfg.augment.alpha = alpha;
    }
    if let Some(beta) = overrides.beta {
        train_cfg.augment.beta = beta;
    }
    if let Some(scheme) = &overrides.scheme {
        train_cfg.augment.scheme = parse_scheme(scheme)?;
    }
    if let Some(n) = overrides.batch_size {
        train_cfg.batch_size = n;
    }
    if let Some(n) = overrides.max_epochs {
        train_cfg.max_epochs = n;
    }
    if let Some(n) = overrides.min_epochs {
        train_cfg.min_epochs = n;
    }
    if let Some(n) = overrides.patience {
        train_cfg.patience = n;
    }

    let resolved = ResolvedConfig {
        command: "train",
        train: &train_cfg,
        encoder: &encoder_cfg,
    };
    let config_hash = util::config_hash_hex(&resolved)?;
    util::ensure_dir(out_dir)?;
    let ckpt_path = out_dir.join("best.ckpt");

    log.info(format!(
        "training on {} graphs (batch {}, lr {}, tau {}, alpha {}, beta {})",
        dataset.len(),
        train_cfg.batch_size,
        train_cfg.learning_rate,
        train_cfg.temperature,
        train_cfg.augment.alpha,
        train_cfg.augment.beta
    ));
    let output = train::<f32>(&dataset, &train_cfg, &encoder_cfg, Some(&ckpt_path), |e| {
        log.info(format!(
            "epoch {:>3}  loss {:.6}{}  ({:.1}s)",
            e.epoch,
            e.mean_loss,
            if e.improved { "  *" } else { "" },
            e.wall_time_s
        ));
    })?;

    let mut history_text = format!(
        "{}\n",
        serde_json::to_string(&serde_json::json!({
            "format_version": util::FORMAT_VERSION,
            "config_hash": config_hash,
        }))?
    );
    history_text.push_str(&output.history.to_jsonl()?);
    util::write_text(&out_dir.join("history.jsonl"), &history_text)?;
    log.info(format!(
        "best epoch {} (loss {:.6}); checkpoint {} ({})",
        output.history.best_epoch,
        output.history.best_loss,
        ckpt_path.display(),
        checkpoint::file_hash(&ckpt_path)?
    ));
    Ok(())
}
