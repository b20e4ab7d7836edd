//! Scale/translation normalization.
//!
//! Maps a part into the axis-aligned box centered at the origin whose
//! longest side spans [-1, 1]. The bounding box is measured by densely
//! sampling every face over its uv domain plus every curve; the affine map
//! (uniform scale + translation) is then pushed through all stored geometry
//! parameters. Directions and angular parameters are unaffected; plane uv
//! domains are in model units and rescale with the geometry.

use super::surface::SurfaceKind;
use super::vec3::{v3, Vec3};
use super::{BRepPart, Curve, CurveKind, Face};
use crate::error::{Error, Result};

const BBOX_SAMPLES: usize = 17;

/// Bounding box from dense sampling of faces and curves.
fn sampled_bbox(part: &BRepPart) -> Result<(Vec3, Vec3)> {
    let mut min = v3(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut max = v3(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut absorb = |p: Vec3| {
        min = v3(min.x.min(p.x), min.y.min(p.y), min.z.min(p.z));
        max = v3(max.x.max(p.x), max.y.max(p.y), max.z.max(p.z));
    };
    for face in &part.faces {
        let d = &face.uv_domain;
        for i in 0..BBOX_SAMPLES {
            let fu = i as f64 / (BBOX_SAMPLES - 1) as f64;
            let u = d.u[0] + fu * d.u_span();
            for j in 0..BBOX_SAMPLES {
                let fv = j as f64 / (BBOX_SAMPLES - 1) as f64;
                let v = d.v[0] + fv * d.v_span();
                absorb(face.surface.point_at(u, v)?);
            }
        }
    }
    for curve in &part.curves {
        let [t0, t1] = curve.geometry.interval;
        for i in 0..BBOX_SAMPLES {
            let t = t0 + (t1 - t0) * i as f64 / (BBOX_SAMPLES - 1) as f64;
            absorb(curve.geometry.point_at(t)?);
        }
    }
    Ok((min, max))
}

/// Center the part at the origin and scale its longest bounding-box side to
/// [-1, 1]. Graph topology is untouched (ids and adjacency are preserved).
pub fn normalize_part(part: &BRepPart) -> Result<BRepPart> {
    let (min, max) = sampled_bbox(part)?;
    let extent = max - min;
    let longest = extent.x.max(extent.y).max(extent.z);
    if !(longest > 1e-12) || !longest.is_finite() {
        return Err(Error::DegeneratePart {
            part: part.id.to_string(),
            reason: format!("bounding box extent {longest} too small to normalize"),
        });
    }
    let center = (min + max) * 0.5;
    let scale = 2.0 / longest;
    let xform_point = |p: Vec3| (p - center) * scale;

    let faces = part
        .faces
        .iter()
        .map(|f| transform_face(f, center, scale, xform_point))
        .collect();
    let curves = part
        .curves
        .iter()
        .map(|c| transform_curve(c, xform_point, scale))
        .collect();
    Ok(BRepPart {
        id: part.id.clone(),
        faces,
        curves,
    })
}

fn transform_face(
    face: &Face,
    _center: Vec3,
    scale: f64,
    xp: impl Fn(Vec3) -> Vec3,
) -> Face {
    let mut out = face.clone();
    match &mut out.surface.kind {
        SurfaceKind::Plane { origin, .. } => {
            *origin = xp(*origin);
            // plane uv coordinates are model units
            out.uv_domain.u = [face.uv_domain.u[0] * scale, face.uv_domain.u[1] * scale];
            out.uv_domain.v = [face.uv_domain.v[0] * scale, face.uv_domain.v[1] * scale];
        }
        SurfaceKind::Cylinder {
            origin,
            radius,
            height,
            ..
        } => {
            *origin = xp(*origin);
            *radius *= scale;
            *height *= scale;
        }
        SurfaceKind::Cone {
            origin,
            radius_base,
            radius_top,
            height,
            ..
        } => {
            *origin = xp(*origin);
            *radius_base *= scale;
            *radius_top *= scale;
            *height *= scale;
        }
        SurfaceKind::Sphere { center, radius, .. } => {
            *center = xp(*center);
            *radius *= scale;
        }
        SurfaceKind::Torus {
            center,
            major_radius,
            minor_radius,
            ..
        } => {
            *center = xp(*center);
            *major_radius *= scale;
            *minor_radius *= scale;
        }
        SurfaceKind::Freeform { control } => {
            for row in control.iter_mut() {
                for p in row.iter_mut() {
                    *p = xp(*p);
                }
            }
        }
    }
    out
}

fn transform_curve(curve: &Curve, xp: impl Fn(Vec3) -> Vec3, scale: f64) -> Curve {
    let mut out = curve.clone();
    match &mut out.geometry.kind {
        CurveKind::Line { a, b } => {
            *a = xp(*a);
            *b = xp(*b);
        }
        CurveKind::Circle { center, radius, .. } => {
            *center = xp(*center);
            *radius *= scale;
        }
        CurveKind::Freeform { control } => {
            for p in control.iter_mut() {
                *p = xp(*p);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::synthetic::{self, FamilySpec};
    use crate::brep::to_graph;

    fn box_part(side: f64, center: Vec3) -> BRepPart {
        synthetic::build_box("t".into(), center, side, side, side, Default::default())
    }

    #[test]
    fn already_normalized_part_is_a_fixed_point() {
        let part = box_part(2.0, v3(0.0, 0.0, 0.0));
        let normalized = normalize_part(&part).unwrap();
        assert_eq!(normalized, part);
    }

    #[test]
    fn offset_box_is_centered_and_scaled() {
        let part = box_part(4.0, v3(10.0, 0.0, 0.0));
        let n = normalize_part(&part).unwrap();
        let (min, max) = sampled_bbox(&n).unwrap();
        for (lo, hi) in [(min.x, max.x), (min.y, max.y), (min.z, max.z)] {
            assert!((lo + 1.0).abs() < 1e-12, "min {lo}");
            assert!((hi - 1.0).abs() < 1e-12, "max {hi}");
        }
    }

    #[test]
    fn normalization_is_idempotent() {
        for spec in FamilySpec::default_set() {
            let part = &synthetic::generate_synthetic_family(&spec, 1, 11).unwrap()[0];
            let once = normalize_part(part).unwrap();
            let twice = normalize_part(&once).unwrap();
            // compare every sampled point
            let (amin, amax) = sampled_bbox(&once).unwrap();
            let (bmin, bmax) = sampled_bbox(&twice).unwrap();
            assert!((amin - bmin).norm() < 1e-12 && (amax - bmax).norm() < 1e-12);
        }
    }

    #[test]
    fn topology_is_preserved() {
        let part = box_part(3.0, v3(-2.0, 5.0, 1.0));
        let before = to_graph(&part);
        let after = to_graph(&normalize_part(&part).unwrap());
        assert_eq!(before, after);
    }

    #[test]
    fn degenerate_part_is_rejected() {
        // a box far below the normalization threshold
        let part =
            synthetic::build_box("t".into(), v3(0.0, 0.0, 0.0), 1e-14, 1e-14, 1e-14, Default::default());
        assert!(matches!(
            normalize_part(&part),
            Err(Error::DegeneratePart { .. })
        ));
    }
}
