//! `convert`: parts JSONL -> normalized graphs -> binary feature cache.

use std::path::Path;

use cadgraph::brep::{jsonl, normalize_part, to_graph_with_report, ConversionReport};
use cadgraph::error::Result;
use cadgraph::features::{extract_graph_features, write_cache, AttrSchema, GraphFeatures, GridDims};
use cadgraph::par;
use serde::Serialize;

use crate::util::{self, Logger};

#[derive(Serialize)]
struct ResolvedConfig<'a> {
    command: &'static str,
    schema: &'a AttrSchema,
    dims: GridDims,
}

#[derive(Serialize)]
struct ReportFile {
    format_version: u32,
    config_hash: String,
    parts: usize,
    per_part: Vec<PartReport>,
    totals: ConversionReport,
}

#[derive(Serialize)]
struct PartReport {
    part: String,
    nodes: usize,
    edges: usize,
    #[serde(flatten)]
    report: ConversionReport,
}

pub fn run(
    log: &Logger,
    parts_path: &Path,
    schema_path: &Path,
    out: &Path,
    report_path: Option<&Path>,
    (gu, gv, gt): (usize, usize, usize),
) -> Result<()> {
    let dims = GridDims { gu, gv, gt };
    dims.validate()?;
    let schema = AttrSchema::load(schema_path)?;
    let parts = jsonl::read_parts(parts_path)?;
    let config = ResolvedConfig {
        command: "convert",
        schema: &schema,
        dims,
    };
    let config_hash = util::config_hash_hex(&config)?;

    // per-part conversion is independent; map in parallel, keep input order
    let converted: Vec<Result<(GraphFeatures, PartReport)>> = par::map(&parts, |part| {
        let normalized = normalize_part(part)?;
        let (graph, report) = to_graph_with_report(&normalized);
        let features = extract_graph_features(&normalized, &graph, &schema, dims)?;
        Ok((
            features,
            PartReport {
                part: part.id.to_string(),
                nodes: graph.node_count(),
                edges: graph.edge_count(),
                report,
            },
        ))
    });
    let mut features = Vec::with_capacity(parts.len());
    let mut reports = Vec::with_capacity(parts.len());
    for item in converted {
        let (f, r) = item?;
        features.push(f);
        reports.push(r);
    }
    write_cache(out, util::hash_bytes(&config_hash), &features)?;

    let totals = ConversionReport {
        single_adjacency_skipped: reports.iter().map(|r| r.report.single_adjacency_skipped).sum(),
        orphan_curves_skipped: reports.iter().map(|r| r.report.orphan_curves_skipped).sum(),
        multi_adjacency_expanded: reports.iter().map(|r| r.report.multi_adjacency_expanded).sum(),
        duplicate_edges_merged: reports.iter().map(|r| r.report.duplicate_edges_merged).sum(),
    };
    log.info(format!(
        "converted {} parts into {} ({} seam curves skipped)",
        parts.len(),
        out.display(),
        totals.single_adjacency_skipped
    ));
    if let Some(path) = report_path {
        util::write_json(
            path,
            &ReportFile {
                format_version: util::FORMAT_VERSION,
                config_hash,
                parts: parts.len(),
                per_part: reports,
                totals,
            },
        )?;
    }
    Ok(())
}
