//! Assembly retrieval by part-vote aggregation.
//!
//! Assemblies are plain membership lists. A query assembly retrieves, for
//! each of its member parts, the top `k_parts` similar parts; every
//! containing assembly of every retrieved part earns one vote. Assemblies
//! rank by vote count (descending), ties by ascending assembly id; the
//! query assembly itself is excluded.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::EmbeddingIndex;
use crate::brep::PartId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyRecord {
    pub id: String,
    pub parts: Vec<PartId>,
}

impl AssemblyRecord {
    pub fn validate(&self) -> Result<()> {
        if self.parts.is_empty() {
            return Err(Error::Contract(format!(
                "assembly {} has no member parts",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssemblyHit {
    pub id: String,
    pub votes: usize,
}

/// Rank candidate assemblies for a query assembly. Every member part of the
/// query must be present in the index. `k_parts` is clamped to the index
/// size (minus the excluded query part).
pub fn assembly_query(
    query: &AssemblyRecord,
    index: &EmbeddingIndex,
    memberships: &[AssemblyRecord],
    k_parts: usize,
    k_out: usize,
) -> Result<Vec<AssemblyHit>> {
    query.validate()?;
    if k_parts == 0 || k_out == 0 {
        return Err(Error::Contract("k_parts and k_out must be >= 1".into()));
    }
    let mut containing: BTreeMap<&PartId, Vec<&str>> = BTreeMap::new();
    for record in memberships {
        record.validate()?;
        for part in &record.parts {
            containing.entry(part).or_default().push(&record.id);
        }
    }
    let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
    for part in &query.parts {
        let z = index.vector(part).ok_or_else(|| {
            Error::Query(format!(
                "assembly {} member part {part} is missing from the index",
                query.id
            ))
        })?;
        let k = k_parts.min(index.len().saturating_sub(1)).max(1);
        let result = index.query(&z.to_vec(), k, Some(part))?;
        for hit in &result.hits {
            if let Some(assemblies) = containing.get(&hit.id) {
                for &assembly in assemblies {
                    if assembly != query.id {
                        *votes.entry(assembly).or_insert(0) += 1;
                    }
                }
            }
        }
    }
    let mut ranked: Vec<AssemblyHit> = votes
        .into_iter()
        .map(|(id, votes)| AssemblyHit {
            id: id.to_string(),
            votes,
        })
        .collect();
    ranked.sort_by(|a, b| b.votes.cmp(&a.votes).then_with(|| a.id.cmp(&b.id)));
    ranked.truncate(k_out);
    Ok(ranked)
}
