//! `eval`: Recall@K and NDCG@K over an index and ground-truth labels.
//!
//! Labels come either as family assignments (same family = similar, others
//! dissimilar) or as explicit per-query relevance levels. Both recall
//! variants are reported; "similar-only" is the headline.

use std::collections::BTreeMap;
use std::path::Path;

use cadgraph::brep::PartId;
use cadgraph::error::{Error, Result};
use cadgraph::retrieval::{
    ndcg_at_k, recall_at_k, recall_at_k_inclusive, EmbeddingIndex, Relevance,
};
use serde::Serialize;

use crate::util::{self, LabelsFile, Logger};

#[derive(Serialize)]
struct MetricsReport {
    format_version: u32,
    config_hash: String,
    ks: Vec<usize>,
    queries: usize,
    mean: BTreeMap<String, f64>,
    per_query: BTreeMap<String, BTreeMap<String, f64>>,
}

pub fn parse_k_list(text: &str) -> Result<Vec<usize>> {
    let mut ks = Vec::new();
    for piece in text.split(',') {
        let k: usize = piece
            .trim()
            .parse()
            .map_err(|_| Error::Contract(format!("bad k value {piece:?}")))?;
        if k == 0 {
            return Err(Error::Contract("k values must be >= 1".into()));
        }
        ks.push(k);
    }
    if ks.is_empty() {
        return Err(Error::Contract("empty k list".into()));
    }
    Ok(ks)
}

/// Per-query labeled pools from the labels file.
fn build_pools(
    labels: &LabelsFile,
    index: &EmbeddingIndex,
) -> Result<Vec<(PartId, BTreeMap<PartId, Relevance>)>> {
    if !labels.relevance.is_empty() {
        let mut pools = Vec::new();
        for (query, cands) in &labels.relevance {
            let mut pool = BTreeMap::new();
            for (cand, &level) in cands {
                pool.insert(PartId::new(cand.clone()), Relevance::from_level(level)?);
            }
            pools.push((PartId::new(query.clone()), pool));
        }
        return Ok(pools);
    }
    if labels.families.is_empty() {
        return Err(Error::Contract(
            "labels file has neither families nor relevance".into(),
        ));
    }
    let mut pools = Vec::new();
    for query in index.ids() {
        let family = labels.families.get(query.as_str()).ok_or_else(|| {
            Error::Contract(format!("part {query} has no family label"))
        })?;
        let mut pool = BTreeMap::new();
        for cand in index.ids() {
            if cand == query {
                continue;
            }
            let cand_family = labels.families.get(cand.as_str()).ok_or_else(|| {
                Error::Contract(format!("part {cand} has no family label"))
            })?;
            pool.insert(
                cand.clone(),
                if cand_family == family {
                    Relevance::Similar
                } else {
                    Relevance::Dissimilar
                },
            );
        }
        pools.push((query.clone(), pool));
    }
    Ok(pools)
}

/// Mean metrics over all queries; also returns the per-query table.
pub fn evaluate(
    index: &EmbeddingIndex,
    labels: &LabelsFile,
    ks: &[usize],
) -> Result<(BTreeMap<String, f64>, BTreeMap<String, BTreeMap<String, f64>>)> {
    let pools = build_pools(labels, index)?;
    if pools.is_empty() {
        return Err(Error::Contract("no queries to evaluate".into()));
    }
    let k_max = *ks.iter().max().unwrap();
    let mut per_query: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for (query, pool) in &pools {
        let z = index
            .vector(query)
            .ok_or_else(|| Error::Query(format!("query part {query} is not in the index")))?
            .to_vec();
        let k_fetch = k_max.min(index.len() - 1).max(1);
        let result = index.query(&z, k_fetch, Some(query))?;
        // rank only labeled candidates (explicit fixtures may label a subset)
        let ranked: Vec<PartId> = result
            .hits
            .iter()
            .map(|h| h.id.clone())
            .filter(|id| pool.contains_key(id))
            .collect();
        let mut row = BTreeMap::new();
        for &k in ks {
            row.insert(format!("recall@{k}"), recall_at_k(&ranked, pool, k)?);
            row.insert(
                format!("recall_inclusive@{k}"),
                recall_at_k_inclusive(&ranked, pool, k)?,
            );
            row.insert(format!("ndcg@{k}"), ndcg_at_k(&ranked, pool, k)?);
        }
        for (metric, value) in &row {
            *sums.entry(metric.clone()).or_insert(0.0) += value;
        }
        per_query.insert(query.to_string(), row);
    }
    let n = pools.len() as f64;
    let mean = sums.into_iter().map(|(k, v)| (k, v / n)).collect();
    Ok((mean, per_query))
}

pub fn run(
    log: &Logger,
    index_path: &Path,
    labels_path: &Path,
    k_text: &str,
    out: Option<&Path>,
) -> Result<()> {
    let index = EmbeddingIndex::load(index_path)?;
    let labels = LabelsFile::load(labels_path)?;
    let ks = parse_k_list(k_text)?;
    let config_hash = util::config_hash_hex(&serde_json::json!({
        "command": "eval",
        "ks": ks,
        "labels_hash": labels.config_hash,
    }))?;
    let (mean, per_query) = evaluate(&index, &labels, &ks)?;
    for (metric, value) in &mean {
        println!("{metric:<22} {value:.4}");
    }
    log.info(format!("{} queries evaluated", per_query.len()));
    if let Some(path) = out {
        util::write_json(
            path,
            &MetricsReport {
                format_version: util::FORMAT_VERSION,
                config_hash,
                ks,
                queries: per_query.len(),
                mean,
                per_query,
            },
        )?;
    }
    Ok(())
}
