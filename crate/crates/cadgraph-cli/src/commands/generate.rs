//! `generate`: synthetic dataset with family labels and an inferred schema.

use std::collections::BTreeMap;
use std::path::Path;

use cadgraph::brep::{generate_synthetic_family, jsonl, BRepPart, FamilySpec};
use cadgraph::error::{Error, Result};
use cadgraph::features::AttrSchema;
use serde::Serialize;

use crate::util::{self, Logger};

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    command: &'static str,
    families: &'a [FamilySpec],
    count: usize,
    seed: u64,
}

#[derive(Serialize)]
struct Manifest {
    format_version: u32,
    config_hash: String,
    seed: u64,
    parts: usize,
    families: usize,
}

pub fn run(
    log: &Logger,
    spec_path: Option<&Path>,
    count: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<()> {
    if count == 0 {
        return Err(Error::Contract("--count must be >= 1".into()));
    }
    let families: Vec<FamilySpec> = match spec_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::io(path.display().to_string(), e))?;
            serde_json::from_str(&text)?
        }
        None => FamilySpec::default_set(),
    };
    if families.is_empty() {
        return Err(Error::FamilySpec("family spec list is empty".into()));
    }
    let config = ResolvedConfig {
        command: "generate",
        families: &families,
        count,
        seed,
    };
    let config_hash = util::config_hash_hex(&config)?;

    util::ensure_dir(out_dir)?;
    let mut parts: Vec<BRepPart> = Vec::with_capacity(families.len() * count);
    let mut labels: BTreeMap<String, String> = BTreeMap::new();
    for family in &families {
        let generated = generate_synthetic_family(family, count, seed)?;
        for part in &generated {
            if labels
                .insert(part.id.to_string(), family.name.clone())
                .is_some()
            {
                return Err(Error::FamilySpec(format!(
                    "duplicate part id {} across families",
                    part.id
                )));
            }
        }
        parts.extend(generated);
        log.debug(format!("family {}: {count} parts", family.name));
    }
    let schema = AttrSchema::infer(parts.iter().flat_map(|p| p.faces.iter().map(|f| &f.attrs)))?;

    jsonl::write_parts(&out_dir.join("parts.jsonl"), &parts)?;
    schema.save(&out_dir.join("schema.json"))?;
    util::write_json(
        &out_dir.join("labels.json"),
        &util::LabelsFile {
            format_version: util::FORMAT_VERSION,
            config_hash: config_hash.clone(),
            families: labels,
            relevance: BTreeMap::new(),
        },
    )?;
    util::write_json(
        &out_dir.join("manifest.json"),
        &Manifest {
            format_version: util::FORMAT_VERSION,
            config_hash,
            seed,
            parts: parts.len(),
            families: families.len(),
        },
    )?;
    log.info(format!(
        "generated {} parts across {} families into {}",
        parts.len(),
        families.len(),
        out_dir.display()
    ));
    Ok(())
}
