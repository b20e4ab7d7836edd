//! Assembly of all raw features for one part.

use super::sample::{loop_polygons, sample_curve_grid, sample_face_grid};
use super::schema::AttrSchema;
use super::{CurveRawFeatures, FaceRawFeatures, GraphFeatures, GridDims};
use crate::brep::{BRepPart, Curve, Face, PartGraph};
use crate::error::{Error, Result};

/// Midpoint-rule resolution for numeric face areas.
const AREA_RES: usize = 32;

/// Extract per-node and per-edge raw features. `graph` must be derived from
/// `part` (same id, nodes = faces).
pub fn extract_graph_features(
    part: &BRepPart,
    graph: &PartGraph,
    schema: &AttrSchema,
    dims: GridDims,
) -> Result<GraphFeatures> {
    dims.validate()?;
    if graph.part_id != part.id {
        return Err(Error::Contract(format!(
            "graph for part {} applied to part {}",
            graph.part_id, part.id
        )));
    }
    let mut faces = std::collections::BTreeMap::new();
    for node in &graph.nodes {
        let face = part.face(node).ok_or_else(|| Error::Contract(format!(
            "graph node {node} is not a face of part {}",
            part.id
        )))?;
        let loop_curves = resolve_loops(part, face)?;
        let uv_grid = sample_face_grid(face, &loop_curves, dims.gu, dims.gv)?;
        let area = face_area(face, &loop_curves)?;
        let product = schema.encode(&face.attrs).map_err(|e| match e {
            Error::Schema { attr, reason } => Error::Schema {
                attr,
                reason: format!("face {node}: {reason}"),
            },
            other => other,
        })?;
        faces.insert(
            node.clone(),
            FaceRawFeatures {
                surface_type: face.surface.type_index(),
                area: area as f32,
                uv_grid,
                product,
            },
        );
    }
    let mut edges = std::collections::BTreeMap::new();
    for edge in &graph.edges {
        let curve = part.curve(&edge.curve).ok_or_else(|| {
            Error::Contract(format!(
                "graph edge ({}, {}) references missing curve {}",
                edge.a, edge.b, edge.curve
            ))
        })?;
        edges.insert(
            (edge.a.clone(), edge.b.clone()),
            CurveRawFeatures {
                curve_type: curve.geometry.type_index(),
                length: curve.geometry.length() as f32,
                t_grid: sample_curve_grid(curve, dims.gt)?,
            },
        );
    }
    let gf = GraphFeatures {
        graph: graph.clone(),
        dims,
        product_dim: schema.product_dim(),
        faces,
        edges,
    };
    gf.validate()?;
    Ok(gf)
}

fn resolve_loops<'a>(part: &'a BRepPart, face: &Face) -> Result<Vec<Vec<&'a Curve>>> {
    face.loops
        .iter()
        .map(|ring| {
            ring.iter()
                .map(|cid| {
                    part.curve(cid).ok_or_else(|| Error::Contract(format!(
                        "face {} loop references missing curve {cid}",
                        face.id
                    )))
                })
                .collect()
        })
        .collect()
}

/// Visible area by midpoint quadrature of the surface area element over the
/// uv domain, respecting trimming loops.
fn face_area(face: &Face, loop_curves: &[Vec<&Curve>]) -> Result<f64> {
    let polygons = loop_polygons(face, loop_curves)?;
    let d = &face.uv_domain;
    let du = d.u_span() / AREA_RES as f64;
    let dv = d.v_span() / AREA_RES as f64;
    let eps = 1e-9 * d.u_span().abs().max(d.v_span().abs()).max(1.0);
    let mut total = 0.0;
    for i in 0..AREA_RES {
        let u = d.u[0] + (i as f64 + 0.5) * du;
        for j in 0..AREA_RES {
            let v = d.v[0] + (j as f64 + 0.5) * dv;
            if polygons.is_empty() || cell_visible(&polygons, u, v, eps) {
                total += face.surface.area_element(u, v)? * du * dv;
            }
        }
    }
    Ok(total)
}

fn cell_visible(polygons: &[Vec<(f64, f64)>], u: f64, v: f64, eps: f64) -> bool {
    super::sample::visible_at(polygons, u, v, eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::synthetic::{build_box, generate_synthetic_family, FamilySpec};
    use crate::brep::vec3::v3;
    use crate::brep::{normalize_part, to_graph};

    fn plain_schema() -> AttrSchema {
        AttrSchema::default()
    }

    #[test]
    fn box_face_areas_sum_to_surface_area() {
        let (w, d, h) = (1.5, 1.0, 0.5);
        let part = build_box("b".into(), v3(0.0, 0.0, 0.0), w, d, h, Default::default());
        let graph = to_graph(&part);
        let gf =
            extract_graph_features(&part, &graph, &plain_schema(), GridDims::default()).unwrap();
        let total: f64 = gf.faces.values().map(|f| f.area as f64).sum();
        let analytic = 2.0 * (w * d + w * h + d * h);
        assert!(
            (total - analytic).abs() <= 1e-6 * analytic.max(1.0),
            "total {total} vs {analytic}"
        );
        for f in gf.faces.values() {
            assert_eq!(f.surface_type, 0); // plane
        }
    }

    #[test]
    fn parts_without_attrs_extract_fine() {
        let part = build_box("b".into(), v3(0.0, 0.0, 0.0), 1.0, 1.0, 1.0, Default::default());
        let graph = to_graph(&part);
        let gf =
            extract_graph_features(&part, &graph, &plain_schema(), GridDims::default()).unwrap();
        assert_eq!(gf.product_dim, 0);
        assert!(gf.faces.values().all(|f| f.product.is_empty()));
    }

    #[test]
    fn translated_copies_extract_identically_after_normalization() {
        let a = build_box("p".into(), v3(0.0, 0.0, 0.0), 1.25, 1.0, 0.75, Default::default());
        let b = build_box("p".into(), v3(10.0, -6.0, 3.0), 1.25, 1.0, 0.75, Default::default());
        let schema = plain_schema();
        let extract = |part: &crate::brep::BRepPart| {
            let n = normalize_part(part).unwrap();
            let g = to_graph(&n);
            extract_graph_features(&n, &g, &schema, GridDims::default()).unwrap()
        };
        assert_eq!(extract(&a), extract(&b));
    }

    #[test]
    fn scaled_copies_extract_identically_after_normalization() {
        // power-of-two scale keeps the construction arithmetic exact
        let a = build_box("p".into(), v3(0.0, 0.0, 0.0), 1.25, 1.0, 0.75, Default::default());
        let b = build_box("p".into(), v3(0.0, 0.0, 0.0), 2.5, 2.0, 1.5, Default::default());
        let schema = plain_schema();
        let extract = |part: &crate::brep::BRepPart| {
            let n = normalize_part(part).unwrap();
            let g = to_graph(&n);
            extract_graph_features(&n, &g, &schema, GridDims::default()).unwrap()
        };
        assert_eq!(extract(&a), extract(&b));
    }

    #[test]
    fn extraction_is_pure() {
        let spec = FamilySpec::example_box();
        let part = &generate_synthetic_family(&spec, 1, 5).unwrap()[0];
        let graph = to_graph(part);
        let schema = AttrSchema::infer(part.faces.iter().map(|f| &f.attrs)).unwrap();
        let a = extract_graph_features(part, &graph, &schema, GridDims::default()).unwrap();
        let b = extract_graph_features(part, &graph, &schema, GridDims::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normals_are_unit_where_mask_is_set() {
        for spec in FamilySpec::default_set() {
            let part = &generate_synthetic_family(&spec, 1, 13).unwrap()[0];
            let n = normalize_part(part).unwrap();
            let graph = to_graph(&n);
            let gf = extract_graph_features(&n, &graph, &plain_schema(), GridDims::default())
                .unwrap();
            for f in gf.faces.values() {
                for s in 0..gf.dims.gu * gf.dims.gv {
                    let b = s * super::super::FACE_CHANNELS;
                    let mask = f.uv_grid[b + 6];
                    assert!(mask == 0.0 || mask == 1.0);
                    if mask == 1.0 {
                        let (nx, ny, nz) = (
                            f.uv_grid[b + 3] as f64,
                            f.uv_grid[b + 4] as f64,
                            f.uv_grid[b + 5] as f64,
                        );
                        let norm = (nx * nx + ny * ny + nz * nz).sqrt();
                        assert!((norm - 1.0).abs() < 1e-6, "norm {norm}");
                    }
                }
            }
            for e in gf.edges.values() {
                for s in 0..gf.dims.gt {
                    let b = s * super::super::CURVE_CHANNELS;
                    let (tx, ty, tz) = (
                        e.t_grid[b + 3] as f64,
                        e.t_grid[b + 4] as f64,
                        e.t_grid[b + 5] as f64,
                    );
                    let norm = (tx * tx + ty * ty + tz * tz).sqrt();
                    assert!((norm - 1.0).abs() < 1e-6);
                }
            }
        }
    }
}
