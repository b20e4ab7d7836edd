//! `embed`: run a checkpoint over a cache, write the embedding index.

use std::path::Path;

use cadgraph::encoder::{EncoderConfig, EncoderParams};
use cadgraph::error::Result;
use cadgraph::features::read_cache;
use cadgraph::nn::checkpoint;
use cadgraph::retrieval::EmbeddingIndex;
use cadgraph::train::embed_dataset;
use serde::Serialize;

use crate::util::{self, Logger};

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    command: &'static str,
    checkpoint_hash: &'a str,
    cache_hash: String,
}

pub fn run(log: &Logger, checkpoint_path: &Path, cache_path: &Path, out: &Path) -> Result<()> {
    let (config_blob, named) = checkpoint::load(checkpoint_path)?;
    let encoder_config: EncoderConfig = serde_json::from_str(&config_blob)?;
    let params = EncoderParams::<f32>::from_named(&encoder_config, &named)?;
    let (header, dataset) = read_cache(cache_path)?;
    let checkpoint_hash = checkpoint::file_hash(checkpoint_path)?;
    let resolved = ResolvedConfig {
        command: "embed",
        checkpoint_hash: &checkpoint_hash,
        cache_hash: header
            .config_hash
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect(),
    };
    let config_hash = util::config_hash_hex(&resolved)?;

    let embeddings = embed_dataset(&params, &dataset)?;
    let index = EmbeddingIndex::build(&embeddings, util::hash_bytes(&config_hash))?;
    index.save(out)?;
    log.info(format!(
        "embedded {} parts at dim {} into {}",
        index.len(),
        index.dim(),
        out.display()
    ));
    Ok(())
}
