//! `assembly`: rank assemblies by aggregated part-retrieval votes.

use std::path::Path;

use cadgraph::error::{Error, Result};
use cadgraph::retrieval::{assembly_query, AssemblyHit, EmbeddingIndex};
use serde::Serialize;

use crate::util::{self, Logger, MembershipsFile};

#[derive(Serialize)]
struct AssemblyOutput<'a> {
    format_version: u32,
    query: &'a str,
    k_parts: usize,
    k_out: usize,
    ranked: &'a [AssemblyHit],
}

#[allow(clippy::too_many_arguments)]
pub fn run(
    log: &Logger,
    index_path: &Path,
    memberships_path: &Path,
    query_id: &str,
    k_parts: usize,
    k_out: usize,
    out: Option<&Path>,
) -> Result<()> {
    let index = EmbeddingIndex::load(index_path)?;
    let memberships = MembershipsFile::load(memberships_path)?;
    let query = memberships
        .assemblies
        .iter()
        .find(|a| a.id == query_id)
        .ok_or_else(|| {
            Error::Query(format!(
                "assembly {query_id} is not in {}",
                memberships_path.display()
            ))
        })?
        .clone();
    let ranked = assembly_query(&query, &index, &memberships.assemblies, k_parts, k_out)?;
    println!("rank  votes  assembly");
    for (rank, hit) in ranked.iter().enumerate() {
        println!("{:>4}  {:>5}  {}", rank + 1, hit.votes, hit.id);
    }
    log.info(format!(
        "{} candidate assemblies ranked for {query_id}",
        ranked.len()
    ));
    if let Some(path) = out {
        util::write_json(
            path,
            &AssemblyOutput {
                format_version: util::FORMAT_VERSION,
                query: query_id,
                k_parts,
                k_out,
                ranked: &ranked,
            },
        )?;
    }
    Ok(())
}
