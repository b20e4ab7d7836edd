//! Parametric curve geometry and evaluation.

use serde::{Deserialize, Serialize};

use super::surface::{curve_bezier_derivative, curve_de_casteljau};
use super::vec3::Vec3;
use crate::error::{Error, Result};

pub const NUM_CURVE_TYPES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum CurveKind {
    /// Segment `a -> b`, parameterized by the chord: `p(t) = a + t (b - a)`.
    Line { a: Vec3, b: Vec3 },
    Circle {
        center: Vec3,
        axis: Vec3,
        x_ref: Vec3,
        radius: f64,
    },
    /// Bezier control polygon over `t in [0, 1]`.
    Freeform { control: Vec<Vec3> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveGeometry {
    #[serde(flatten)]
    pub kind: CurveKind,
    pub interval: [f64; 2],
}

impl CurveGeometry {
    pub fn new(kind: CurveKind, interval: [f64; 2]) -> Self {
        CurveGeometry { kind, interval }
    }

    pub fn type_index(&self) -> usize {
        match self.kind {
            CurveKind::Line { .. } => 0,
            CurveKind::Circle { .. } => 1,
            CurveKind::Freeform { .. } => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [t0, t1] = self.interval;
        if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::Domain(format!(
                "curve interval must satisfy t0 < t1, got [{t0}, {t1}]"
            )));
        }
        match &self.kind {
            CurveKind::Line { a, b } => {
                if (*b - *a).norm() < 1e-12 {
                    return Err(Error::Domain("degenerate line (a == b)".into()));
                }
                Ok(())
            }
            CurveKind::Circle {
                axis,
                x_ref,
                radius,
                ..
            } => {
                if !(*radius > 0.0) {
                    return Err(Error::Domain(format!(
                        "circle radius must be positive, got {radius}"
                    )));
                }
                if !axis.is_unit(1e-9) || !x_ref.is_unit(1e-9) {
                    return Err(Error::Domain("circle frame vectors must be unit".into()));
                }
                if axis.dot(*x_ref).abs() > 1e-9 {
                    return Err(Error::Domain("circle frame vectors not orthogonal".into()));
                }
                Ok(())
            }
            CurveKind::Freeform { control } => {
                if control.len() < 2 {
                    return Err(Error::Domain("freeform curve needs >= 2 control points".into()));
                }
                if control.iter().any(|p| !p.is_finite()) {
                    return Err(Error::Domain("freeform control point not finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Point only, skipping tangent normalization (bounding boxes).
    pub fn point_at(&self, t: f64) -> Result<Vec3> {
        let [t0, t1] = self.interval;
        if !(t >= t0 && t <= t1) {
            return Err(Error::Domain(format!(
                "curve parameter {t} outside interval [{t0}, {t1}]"
            )));
        }
        Ok(match &self.kind {
            CurveKind::Line { a, b } => *a + (*b - *a) * t,
            CurveKind::Circle {
                center,
                axis,
                x_ref,
                radius,
            } => {
                let y_ref = axis.cross(*x_ref);
                *center + (*x_ref * t.cos() + y_ref * t.sin()) * *radius
            }
            CurveKind::Freeform { control } => curve_de_casteljau(control, t),
        })
    }

    /// Point and unit tangent at parameter `t`, which must lie inside the
    /// stored interval.
    pub fn evaluate(&self, t: f64) -> Result<(Vec3, Vec3)> {
        let [t0, t1] = self.interval;
        if !(t >= t0 && t <= t1) {
            return Err(Error::Domain(format!(
                "curve parameter {t} outside interval [{t0}, {t1}]"
            )));
        }
        let (point, velocity) = match &self.kind {
            CurveKind::Line { a, b } => (*a + (*b - *a) * t, *b - *a),
            CurveKind::Circle {
                center,
                axis,
                x_ref,
                radius,
            } => {
                let y_ref = axis.cross(*x_ref);
                (
                    *center + (*x_ref * t.cos() + y_ref * t.sin()) * *radius,
                    -*x_ref * t.sin() + y_ref * t.cos(),
                )
            }
            CurveKind::Freeform { control } => (
                curve_de_casteljau(control, t),
                curve_bezier_derivative(control, t),
            ),
        };
        let tangent = velocity
            .normalized()
            .ok_or_else(|| Error::Domain(format!("degenerate curve tangent at t = {t}")))?;
        Ok((point, tangent))
    }

    /// Arc length over the stored interval: analytic for lines and circles,
    /// 256-sample midpoint quadrature for freeform curves.
    pub fn length(&self) -> f64 {
        let [t0, t1] = self.interval;
        match &self.kind {
            CurveKind::Line { a, b } => (*b - *a).norm() * (t1 - t0),
            CurveKind::Circle { radius, .. } => radius * (t1 - t0),
            CurveKind::Freeform { control } => {
                let steps = 256;
                let dt = (t1 - t0) / steps as f64;
                let mut total = 0.0;
                for i in 0..steps {
                    let t = t0 + (i as f64 + 0.5) * dt;
                    total += curve_bezier_derivative(control, t).norm() * dt;
                }
                total
            }
        }
    }
}
