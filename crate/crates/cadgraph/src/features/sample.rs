//! UV/t grid sampling and trimming masks.
//!
//! Face grids sample the uv domain on an inclusive uniform lattice. The
//! trimming mask is 1 where a sample is visible: faces without loops are
//! fully visible; otherwise a sample is visible when it lies on a loop
//! polyline (boundaries belong to the face) or inside an odd number of loop
//! polygons (even-odd rule). Loop polygons are built by chaining each loop's
//! curves head-to-tail in uv space.

use crate::brep::{Curve, Face};
use crate::error::{Error, Result};

use super::{CURVE_CHANNELS, FACE_CHANNELS};

/// Samples per curve when rasterizing a trimming loop.
const LOOP_SAMPLES: usize = 64;

/// Sample a face's uv grid: `gu x gv x 7` (point, normal, mask), row-major
/// with u varying slowest. `loop_curves` supplies the geometry of each loop
/// in `face.loops` order.
pub fn sample_face_grid(
    face: &Face,
    loop_curves: &[Vec<&Curve>],
    gu: usize,
    gv: usize,
) -> Result<Vec<f32>> {
    let polygons = loop_polygons(face, loop_curves)?;
    let d = &face.uv_domain;
    let eps = 1e-9 * d.u_span().abs().max(d.v_span().abs()).max(1.0);
    let mut out = vec![0.0f32; gu * gv * FACE_CHANNELS];
    for i in 0..gu {
        let u = d.u[0] + d.u_span() * i as f64 / (gu - 1) as f64;
        for j in 0..gv {
            let v = d.v[0] + d.v_span() * j as f64 / (gv - 1) as f64;
            let visible = polygons.is_empty() || visible_at(&polygons, u, v, eps);
            let base = (i * gv + j) * FACE_CHANNELS;
            if visible {
                let (p, n) = face.surface.evaluate(u, v).map_err(|e| {
                    Error::FeatureExtraction {
                        entity: format!("face {}", face.id),
                        reason: e.to_string(),
                    }
                })?;
                out[base] = p.x as f32;
                out[base + 1] = p.y as f32;
                out[base + 2] = p.z as f32;
                out[base + 3] = n.x as f32;
                out[base + 4] = n.y as f32;
                out[base + 5] = n.z as f32;
                out[base + 6] = 1.0;
            }
        }
    }
    Ok(out)
}

/// Sample a curve's t grid: `gt x 6` (point, tangent) over the stored
/// interval, inclusive.
pub fn sample_curve_grid(curve: &Curve, gt: usize) -> Result<Vec<f32>> {
    let [t0, t1] = curve.geometry.interval;
    let mut out = vec![0.0f32; gt * CURVE_CHANNELS];
    for i in 0..gt {
        let t = t0 + (t1 - t0) * i as f64 / (gt - 1) as f64;
        let (p, tan) = curve
            .geometry
            .evaluate(t)
            .map_err(|e| Error::FeatureExtraction {
                entity: format!("curve {}", curve.id),
                reason: e.to_string(),
            })?;
        let base = i * CURVE_CHANNELS;
        out[base] = p.x as f32;
        out[base + 1] = p.y as f32;
        out[base + 2] = p.z as f32;
        out[base + 3] = tan.x as f32;
        out[base + 4] = tan.y as f32;
        out[base + 5] = tan.z as f32;
    }
    Ok(out)
}

/// Rasterize each trimming loop into a closed uv polygon, chaining curves
/// head-to-tail (reversing where needed).
pub fn loop_polygons(face: &Face, loop_curves: &[Vec<&Curve>]) -> Result<Vec<Vec<(f64, f64)>>> {
    let mut polygons = Vec::with_capacity(loop_curves.len());
    for curves in loop_curves {
        let mut chain: Vec<(f64, f64)> = Vec::new();
        for curve in curves {
            let [t0, t1] = curve.geometry.interval;
            let mut pts = Vec::with_capacity(LOOP_SAMPLES);
            for k in 0..LOOP_SAMPLES {
                let t = t0 + (t1 - t0) * k as f64 / (LOOP_SAMPLES - 1) as f64;
                let p = curve
                    .geometry
                    .point_at(t)
                    .map_err(|e| Error::FeatureExtraction {
                        entity: format!("curve {}", curve.id),
                        reason: e.to_string(),
                    })?;
                let (u, v) = face.surface.uv_of_point(p).map_err(|e| {
                    Error::FeatureExtraction {
                        entity: format!("face {}", face.id),
                        reason: format!("loop curve {}: {e}", curve.id),
                    }
                })?;
                pts.push((u, v));
            }
            if let Some(&(eu, ev)) = chain.last() {
                let d_first = dist2(pts[0], (eu, ev));
                let d_last = dist2(pts[LOOP_SAMPLES - 1], (eu, ev));
                if d_last < d_first {
                    pts.reverse();
                }
            }
            chain.extend(pts);
        }
        if chain.len() >= 3 {
            polygons.push(chain);
        }
    }
    Ok(polygons)
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let du = a.0 - b.0;
    let dv = a.1 - b.1;
    du * du + dv * dv
}

/// Visibility of a uv sample against the loop polygons.
pub(crate) fn visible_at(polygons: &[Vec<(f64, f64)>], u: f64, v: f64, eps: f64) -> bool {
    // boundary samples belong to the face
    for poly in polygons {
        for w in 0..poly.len() {
            let a = poly[w];
            let b = poly[(w + 1) % poly.len()];
            if point_segment_dist2(u, v, a, b) <= eps * eps {
                return true;
            }
        }
    }
    // even-odd crossing count over all loops
    let mut inside = false;
    for poly in polygons {
        for w in 0..poly.len() {
            let (x1, y1) = poly[w];
            let (x2, y2) = poly[(w + 1) % poly.len()];
            if (y1 > v) != (y2 > v) {
                let x_cross = x1 + (v - y1) / (y2 - y1) * (x2 - x1);
                if u < x_cross {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

fn point_segment_dist2(px: f64, py: f64, a: (f64, f64), b: (f64, f64)) -> f64 {
    let (ax, ay) = a;
    let (bx, by) = b;
    let (dx, dy) = (bx - ax, by - ay);
    let len2 = dx * dx + dy * dy;
    let t = if len2 <= 0.0 {
        0.0
    } else {
        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (ax + t * dx, ay + t * dy);
    let (ex, ey) = (px - cx, py - cy);
    ex * ex + ey * ey
}
