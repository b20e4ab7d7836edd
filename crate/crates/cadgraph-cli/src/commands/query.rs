//! `query`: top-k similar parts for an indexed part or an external file.

use std::path::Path;

use cadgraph::brep::{jsonl, normalize_part, to_graph, PartId};
use cadgraph::encoder::{encode_value, EncoderConfig, EncoderParams};
use cadgraph::error::{Error, Result};
use cadgraph::features::{extract_graph_features, AttrSchema};
use cadgraph::nn::checkpoint;
use cadgraph::retrieval::{EmbeddingIndex, QueryResult};
use serde::Serialize;

use crate::util::{self, Logger};

#[derive(Serialize)]
struct QueryOutput<'a> {
    format_version: u32,
    query: &'a str,
    k: usize,
    hits: &'a QueryResult,
}

/// Embed a part from a one-part JSONL file using the checkpoint + schema.
fn embed_part_file(part_file: &Path, ckpt: &Path, schema_path: &Path) -> Result<(String, Vec<f32>)> {
    let parts = jsonl::read_parts(part_file)?;
    if parts.len() != 1 {
        return Err(Error::Contract(format!(
            "--part-file must hold exactly one part, found {}",
            parts.len()
        )));
    }
    let (config_blob, named) = checkpoint::load(ckpt)?;
    let encoder_config: EncoderConfig = serde_json::from_str(&config_blob)?;
    let params = EncoderParams::<f32>::from_named(&encoder_config, &named)?;
    let schema = AttrSchema::load(schema_path)?;
    let normalized = normalize_part(&parts[0])?;
    let graph = to_graph(&normalized);
    let features = extract_graph_features(&normalized, &graph, &schema, encoder_config.grid)?;
    if features.product_dim != encoder_config.product_dim {
        return Err(Error::Config(format!(
            "schema product width {} does not match checkpoint {}",
            features.product_dim, encoder_config.product_dim
        )));
    }
    let z = encode_value(&params, &features)?;
    Ok((
        parts[0].id.to_string(),
        z.data().to_vec(),
    ))
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    log: &Logger,
    index_path: &Path,
    part_id: Option<&str>,
    part_file: Option<&Path>,
    ckpt: Option<&Path>,
    schema: Option<&Path>,
    k: usize,
    out: Option<&Path>,
) -> Result<()> {
    let index = EmbeddingIndex::load(index_path)?;
    let (query_name, vector, exclude) = match (part_id, part_file) {
        (Some(id), None) => {
            let pid = PartId::new(id);
            let z = index
                .vector(&pid)
                .ok_or_else(|| Error::Query(format!("part {id} is not in the index")))?
                .to_vec();
            (id.to_string(), z, Some(pid))
        }
        (None, Some(file)) => {
            let (ckpt, schema) = match (ckpt, schema) {
                (Some(c), Some(s)) => (c, s),
                _ => {
                    return Err(Error::Contract(
                        "--part-file needs --checkpoint and --schema".into(),
                    ))
                }
            };
            let (name, z) = embed_part_file(file, ckpt, schema)?;
            // exclude the same id if the part also lives in the index
            let pid = PartId::new(name.clone());
            let exclude = index.vector(&pid).map(|_| pid);
            (name, z, exclude)
        }
        _ => {
            return Err(Error::Contract(
                "pass exactly one of --part-id or --part-file".into(),
            ))
        }
    };
    if k == 0 {
        return Err(Error::Query("k must be >= 1".into()));
    }
    let available = index.len() - usize::from(exclude.is_some());
    let effective_k = if k > available {
        log.info(format!(
            "warning: k = {k} exceeds the {available} available parts; clamping"
        ));
        available
    } else {
        k
    };
    let result = index.query(&vector, effective_k, exclude.as_ref())?;
    println!("rank  score      part");
    for (rank, hit) in result.hits.iter().enumerate() {
        println!("{:>4}  {:+.6}  {}", rank + 1, hit.score, hit.id);
    }
    if let Some(path) = out {
        util::write_json(
            path,
            &QueryOutput {
                format_version: util::FORMAT_VERSION,
                query: &query_name,
                k: effective_k,
                hits: &result,
            },
        )?;
    }
    Ok(())
}
