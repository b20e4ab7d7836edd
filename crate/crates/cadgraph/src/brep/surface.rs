//! Parametric surface geometry and evaluation.
//!
//! Conventions: frames are right-handed with `axis` (or the plane normal
//! `x_dir x y_dir`) as the third vector. Angular parameters run over
//! radians; cylinders and cones normalize the axial parameter `v` to [0, 1]
//! over their stored height. Analytic surfaces evaluate anywhere; freeform
//! patches are tensor-product Bezier surfaces over [0,1]^2 and error outside
//! their control domain.

use serde::{Deserialize, Serialize};

use super::vec3::{v3, Vec3};
use crate::error::{Error, Result};

pub const NUM_SURFACE_TYPES: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum SurfaceKind {
    Plane {
        origin: Vec3,
        x_dir: Vec3,
        y_dir: Vec3,
    },
    Cylinder {
        origin: Vec3,
        axis: Vec3,
        x_ref: Vec3,
        radius: f64,
        height: f64,
    },
    Cone {
        origin: Vec3,
        axis: Vec3,
        x_ref: Vec3,
        radius_base: f64,
        radius_top: f64,
        height: f64,
    },
    Sphere {
        center: Vec3,
        axis: Vec3,
        x_ref: Vec3,
        radius: f64,
    },
    Torus {
        center: Vec3,
        axis: Vec3,
        x_ref: Vec3,
        major_radius: f64,
        minor_radius: f64,
    },
    /// Tensor-product Bezier patch; `control[i][j]` with `i` along u.
    Freeform { control: Vec<Vec<Vec3>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGeometry {
    #[serde(flatten)]
    pub kind: SurfaceKind,
    /// Flip the stored orientation (normals point the other way).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reversed: bool,
}

impl SurfaceGeometry {
    pub fn new(kind: SurfaceKind) -> Self {
        SurfaceGeometry {
            kind,
            reversed: false,
        }
    }

    pub fn reversed(kind: SurfaceKind) -> Self {
        SurfaceGeometry {
            kind,
            reversed: true,
        }
    }

    /// Stable categorical index of the surface kind.
    pub fn type_index(&self) -> usize {
        match self.kind {
            SurfaceKind::Plane { .. } => 0,
            SurfaceKind::Cylinder { .. } => 1,
            SurfaceKind::Cone { .. } => 2,
            SurfaceKind::Sphere { .. } => 3,
            SurfaceKind::Torus { .. } => 4,
            SurfaceKind::Freeform { .. } => 5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: Vec3, what: &str| -> Result<()> {
            if !v.is_unit(1e-9) {
                return Err(Error::Domain(format!(
                    "{what} must be unit length, |v| = {}",
                    v.norm()
                )));
            }
            Ok(())
        };
        let positive = |x: f64, what: &str| -> Result<()> {
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::Domain(format!("{what} must be positive, got {x}")));
            }
            Ok(())
        };
        let ortho = |a: Vec3, b: Vec3| -> Result<()> {
            if a.dot(b).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "frame vectors not orthogonal (dot = {})",
                    a.dot(b)
                )));
            }
            Ok(())
        };
        match &self.kind {
            SurfaceKind::Plane { x_dir, y_dir, .. } => {
                unit(*x_dir, "plane x_dir")?;
                unit(*y_dir, "plane y_dir")?;
                ortho(*x_dir, *y_dir)
            }
            SurfaceKind::Cylinder {
                axis,
                x_ref,
                radius,
                height,
                ..
            } => {
                unit(*axis, "cylinder axis")?;
                unit(*x_ref, "cylinder x_ref")?;
                ortho(*axis, *x_ref)?;
                positive(*radius, "cylinder radius")?;
                positive(*height, "cylinder height")
            }
            SurfaceKind::Cone {
                axis,
                x_ref,
                radius_base,
                radius_top,
                height,
                ..
            } => {
                unit(*axis, "cone axis")?;
                unit(*x_ref, "cone x_ref")?;
                ortho(*axis, *x_ref)?;
                positive(*radius_base, "cone base radius")?;
                if *radius_top < 0.0 {
                    return Err(Error::Domain("cone top radius negative".into()));
                }
                positive(*height, "cone height")
            }
            SurfaceKind::Sphere {
                axis,
                x_ref,
                radius,
                ..
            } => {
                unit(*axis, "sphere axis")?;
                unit(*x_ref, "sphere x_ref")?;
                ortho(*axis, *x_ref)?;
                positive(*radius, "sphere radius")
            }
            SurfaceKind::Torus {
                axis,
                x_ref,
                major_radius,
                minor_radius,
                ..
            } => {
                unit(*axis, "torus axis")?;
                unit(*x_ref, "torus x_ref")?;
                ortho(*axis, *x_ref)?;
                positive(*major_radius, "torus major radius")?;
                positive(*minor_radius, "torus minor radius")?;
                if minor_radius >= major_radius {
                    return Err(Error::Domain(
                        "torus minor radius must be below the major radius".into(),
                    ));
                }
                Ok(())
            }
            SurfaceKind::Freeform { control } => {
                if control.len() < 2 {
                    return Err(Error::Domain("freeform grid needs >= 2 rows".into()));
                }
                let cols = control[0].len();
                if cols < 2 {
                    return Err(Error::Domain("freeform grid needs >= 2 columns".into()));
                }
                if control.iter().any(|row| row.len() != cols) {
                    return Err(Error::Domain("freeform grid must be rectangular".into()));
                }
                if control
                    .iter()
                    .any(|row| row.iter().any(|p| !p.is_finite()))
                {
                    return Err(Error::Domain("freeform control point not finite".into()));
                }
                Ok(())
            }
        }
    }

    /// Point only, skipping normal computation (bounding boxes, areas).
    pub fn point_at(&self, u: f64, v: f64) -> Result<Vec3> {
        match &self.kind {
            SurfaceKind::Freeform { control } => {
                if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!(
                        "freeform evaluation outside control domain: ({u}, {v})"
                    )));
                }
                Ok(bezier_surface_point(control, u, v))
            }
            _ => Ok(self.point_and_raw_normal(u, v)?.0),
        }
    }

    fn point_and_raw_normal(&self, u: f64, v: f64) -> Result<(Vec3, Vec3)> {
        let (point, raw_normal) = match &self.kind {
            SurfaceKind::Plane {
                origin,
                x_dir,
                y_dir,
            } => (*origin + *x_dir * u + *y_dir * v, x_dir.cross(*y_dir)),
            SurfaceKind::Cylinder {
                origin,
                axis,
                x_ref,
                radius,
                height,
            } => {
                let y_ref = axis.cross(*x_ref);
                let radial = *x_ref * u.cos() + y_ref * u.sin();
                (*origin + radial * *radius + *axis * (v * height), radial)
            }
            SurfaceKind::Cone {
                origin,
                axis,
                x_ref,
                radius_base,
                radius_top,
                height,
            } => {
                let y_ref = axis.cross(*x_ref);
                let radial = *x_ref * u.cos() + y_ref * u.sin();
                let r = radius_base + v * (radius_top - radius_base);
                let point = *origin + radial * r + *axis * (v * height);
                let du = (-*x_ref * u.sin() + y_ref * u.cos()) * r;
                let dv = radial * (radius_top - radius_base) + *axis * *height;
                (point, du.cross(dv))
            }
            SurfaceKind::Sphere {
                center,
                axis,
                x_ref,
                radius,
            } => {
                let y_ref = axis.cross(*x_ref);
                let dir =
                    (*x_ref * u.cos() + y_ref * u.sin()) * v.cos() + *axis * v.sin();
                (*center + dir * *radius, dir)
            }
            SurfaceKind::Torus {
                center,
                axis,
                x_ref,
                major_radius,
                minor_radius,
            } => {
                let y_ref = axis.cross(*x_ref);
                let ring_dir = *x_ref * u.cos() + y_ref * u.sin();
                let tube_dir = ring_dir * v.cos() + *axis * v.sin();
                (
                    *center + ring_dir * *major_radius + tube_dir * *minor_radius,
                    tube_dir,
                )
            }
            SurfaceKind::Freeform { control } => {
                if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
                    return Err(Error::Domain(format!(
                        "freeform evaluation outside control domain: ({u}, {v})"
                    )));
                }
                let point = bezier_surface_point(control, u, v);
                let du = bezier_surface_du(control, u, v);
                let dv = bezier_surface_dv(control, u, v);
                (point, du.cross(dv))
            }
        };
        Ok((point, raw_normal))
    }

    /// Point and unit normal at `(u, v)`.
    pub fn evaluate(&self, u: f64, v: f64) -> Result<(Vec3, Vec3)> {
        let (point, raw_normal) = self.point_and_raw_normal(u, v)?;
        let mut normal = raw_normal.normalized().ok_or_else(|| {
            Error::Domain(format!("degenerate surface normal at ({u}, {v})"))
        })?;
        if self.reversed {
            normal = -normal;
        }
        Ok((point, normal))
    }

    /// Map a 3-D point assumed to lie on the surface back to `(u, v)`.
    /// Used to rasterize trimming loops; not supported for freeform patches.
    pub fn uv_of_point(&self, p: Vec3) -> Result<(f64, f64)> {
        let wrap = |a: f64| if a < 0.0 { a + std::f64::consts::TAU } else { a };
        match &self.kind {
            SurfaceKind::Plane {
                origin,
                x_dir,
                y_dir,
            } => {
                let d = p - *origin;
                Ok((d.dot(*x_dir), d.dot(*y_dir)))
            }
            SurfaceKind::Cylinder {
                origin,
                axis,
                x_ref,
                height,
                ..
            } => {
                let y_ref = axis.cross(*x_ref);
                let d = p - *origin;
                let axial = d.dot(*axis);
                let radial = d - *axis * axial;
                Ok((wrap(radial.dot(y_ref).atan2(radial.dot(*x_ref))), axial / height))
            }
            SurfaceKind::Cone {
                origin,
                axis,
                x_ref,
                height,
                ..
            } => {
                let y_ref = axis.cross(*x_ref);
                let d = p - *origin;
                let axial = d.dot(*axis);
                let radial = d - *axis * axial;
                Ok((wrap(radial.dot(y_ref).atan2(radial.dot(*x_ref))), axial / height))
            }
            SurfaceKind::Sphere {
                center,
                axis,
                x_ref,
                radius,
            } => {
                let y_ref = axis.cross(*x_ref);
                let d = (p - *center) * (1.0 / radius);
                let lat = d.dot(*axis).clamp(-1.0, 1.0).asin();
                Ok((wrap(d.dot(y_ref).atan2(d.dot(*x_ref))), lat))
            }
            SurfaceKind::Torus {
                center,
                axis,
                x_ref,
                major_radius,
                ..
            } => {
                let y_ref = axis.cross(*x_ref);
                let d = p - *center;
                let axial = d.dot(*axis);
                let radial = d - *axis * axial;
                let u = wrap(radial.dot(y_ref).atan2(radial.dot(*x_ref)));
                let ring_dir = *x_ref * u.cos() + y_ref * u.sin();
                let w = p - (*center + ring_dir * *major_radius);
                let v = wrap(w.dot(*axis).atan2(w.dot(ring_dir)));
                Ok((u, v))
            }
            SurfaceKind::Freeform { .. } => Err(Error::Domain(
                "uv inversion is not supported for freeform patches".into(),
            )),
        }
    }

    /// Area scaling factor |dP/du x dP/dv| at `(u, v)` (used for numeric
    /// face areas).
    pub fn area_element(&self, u: f64, v: f64) -> Result<f64> {
        // Central differences are adequate here: analytic kinds are smooth
        // and freeform is polynomial.
        let h = 1e-5;
        let clamped = matches!(self.kind, SurfaceKind::Freeform { .. });
        let eval = |uu: f64, vv: f64| -> Result<Vec3> {
            let (uu, vv) = if clamped {
                (uu.clamp(0.0, 1.0), vv.clamp(0.0, 1.0))
            } else {
                (uu, vv)
            };
            self.point_at(uu, vv)
        };
        let (u0, u1) = if clamped {
            ((u - h).max(0.0), (u + h).min(1.0))
        } else {
            (u - h, u + h)
        };
        let (v0, v1) = if clamped {
            ((v - h).max(0.0), (v + h).min(1.0))
        } else {
            (v - h, v + h)
        };
        let du = (eval(u1, v)? - eval(u0, v)?) * (1.0 / (u1 - u0));
        let dv = (eval(u, v1)? - eval(u, v0)?) * (1.0 / (v1 - v0));
        Ok(du.cross(dv).norm())
    }
}

pub(crate) fn de_casteljau(points: &[Vec3], t: f64) -> Vec3 {
    let mut work = points.to_vec();
    let mut n = work.len();
    while n > 1 {
        for i in 0..n - 1 {
            work[i] = work[i].lerp(work[i + 1], t);
        }
        n -= 1;
    }
    work[0]
}

/// Derivative of a Bezier curve: degree n has derivative n * Δcontrol.
pub(crate) fn bezier_derivative(points: &[Vec3], t: f64) -> Vec3 {
    let n = points.len();
    if n < 2 {
        return v3(0.0, 0.0, 0.0);
    }
    let diffs: Vec<Vec3> = points.windows(2).map(|w| w[1] - w[0]).collect();
    de_casteljau(&diffs, t) * (n as f64 - 1.0)
}

fn bezier_surface_point(control: &[Vec<Vec3>], u: f64, v: f64) -> Vec3 {
    let rows: Vec<Vec3> = control.iter().map(|row| de_casteljau(row, v)).collect();
    de_casteljau(&rows, u)
}

fn bezier_surface_du(control: &[Vec<Vec3>], u: f64, v: f64) -> Vec3 {
    let rows: Vec<Vec3> = control.iter().map(|row| de_casteljau(row, v)).collect();
    bezier_derivative(&rows, u)
}

fn bezier_surface_dv(control: &[Vec<Vec3>], u: f64, v: f64) -> Vec3 {
    let cols: Vec<Vec3> = control.iter().map(|row| bezier_derivative(row, v)).collect();
    de_casteljau(&cols, u)
}

pub(crate) use de_casteljau as curve_de_casteljau;
pub(crate) use bezier_derivative as curve_bezier_derivative;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::vec3::ORIGIN;
    use crate::rng::Stream;

    #[test]
    fn plane_z0_evaluation() {
        let s = SurfaceGeometry::new(SurfaceKind::Plane {
            origin: ORIGIN,
            x_dir: Vec3::X,
            y_dir: Vec3::Y,
        });
        let (p, n) = s.evaluate(0.5, 0.5).unwrap();
        assert_eq!(p, v3(0.5, 0.5, 0.0));
        assert_eq!(n, v3(0.0, 0.0, 1.0));
    }

    #[test]
    fn unit_cylinder_evaluation() {
        // radius 1, height 2 along +z: v spans the full height
        let s = SurfaceGeometry::new(SurfaceKind::Cylinder {
            origin: ORIGIN,
            axis: Vec3::Z,
            x_ref: Vec3::X,
            radius: 1.0,
            height: 2.0,
        });
        let (p, n) = s.evaluate(0.0, 0.5).unwrap();
        assert!((p - v3(1.0, 0.0, 1.0)).norm() < 1e-12);
        assert!((n - v3(1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn torus_points_sit_on_the_tube() {
        // distance from the axis circle equals the minor radius
        let s = SurfaceGeometry::new(SurfaceKind::Torus {
            center: ORIGIN,
            axis: Vec3::Z,
            x_ref: Vec3::X,
            major_radius: 2.0,
            minor_radius: 0.5,
        });
        let mut rng = Stream::derive(31, &["torus"]);
        for _ in 0..50 {
            let u = rng.uniform_in(0.0, std::f64::consts::TAU);
            let v = rng.uniform_in(0.0, std::f64::consts::TAU);
            let (p, n) = s.evaluate(u, v).unwrap();
            // brute-force projection to the axis circle
            let radial = v3(p.x, p.y, 0.0);
            let ring = radial.normalized().unwrap() * 2.0;
            assert!(((p - ring).norm() - 0.5).abs() <= 1e-9);
            assert!((n.norm() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn normals_are_unit_for_every_kind() {
        let mut rng = Stream::derive(77, &["unit-normals"]);
        let surfaces = vec![
            SurfaceGeometry::new(SurfaceKind::Plane {
                origin: v3(1.0, -2.0, 0.5),
                x_dir: Vec3::X,
                y_dir: Vec3::Z,
            }),
            SurfaceGeometry::new(SurfaceKind::Cylinder {
                origin: v3(0.0, 1.0, 0.0),
                axis: Vec3::Y,
                x_ref: Vec3::Z,
                radius: 0.8,
                height: 2.0,
            }),
            SurfaceGeometry::new(SurfaceKind::Cone {
                origin: ORIGIN,
                axis: Vec3::Z,
                x_ref: Vec3::X,
                radius_base: 1.0,
                radius_top: 0.3,
                height: 1.5,
            }),
            SurfaceGeometry::new(SurfaceKind::Sphere {
                center: v3(0.2, 0.1, -0.4),
                axis: Vec3::Z,
                x_ref: Vec3::X,
                radius: 1.2,
            }),
            SurfaceGeometry::new(SurfaceKind::Torus {
                center: ORIGIN,
                axis: Vec3::X,
                x_ref: Vec3::Y,
                major_radius: 1.5,
                minor_radius: 0.4,
            }),
            SurfaceGeometry::new(SurfaceKind::Freeform {
                control: vec![
                    vec![v3(0.0, 0.0, 0.0), v3(0.0, 1.0, 0.3), v3(0.0, 2.0, 0.0)],
                    vec![v3(1.0, 0.0, 0.2), v3(1.0, 1.0, 0.9), v3(1.0, 2.0, 0.1)],
                    vec![v3(2.0, 0.0, 0.0), v3(2.0, 1.0, 0.4), v3(2.0, 2.0, 0.0)],
                ],
            }),
        ];
        for s in &surfaces {
            s.validate().unwrap();
            for _ in 0..20 {
                let (u, v) = match s.kind {
                    SurfaceKind::Freeform { .. } => (rng.uniform(), rng.uniform()),
                    SurfaceKind::Plane { .. } => {
                        (rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0))
                    }
                    _ => (
                        rng.uniform_in(0.0, std::f64::consts::TAU),
                        rng.uniform_in(0.05, 0.95),
                    ),
                };
                let (_, n) = s.evaluate(u, v).unwrap();
                assert!((n.norm() - 1.0).abs() <= 1e-9, "normal {n:?} on {s:?}");
            }
        }
    }

    #[test]
    fn reversed_flag_flips_normals() {
        let fwd = SurfaceGeometry::new(SurfaceKind::Sphere {
            center: ORIGIN,
            axis: Vec3::Z,
            x_ref: Vec3::X,
            radius: 1.0,
        });
        let rev = SurfaceGeometry::reversed(fwd.kind.clone());
        let (_, nf) = fwd.evaluate(0.3, 0.2).unwrap();
        let (_, nr) = rev.evaluate(0.3, 0.2).unwrap();
        assert!((nf + nr).norm() < 1e-15);
    }

    #[test]
    fn freeform_outside_domain_is_a_domain_error() {
        let s = SurfaceGeometry::new(SurfaceKind::Freeform {
            control: vec![
                vec![v3(0.0, 0.0, 0.0), v3(0.0, 1.0, 0.0)],
                vec![v3(1.0, 0.0, 0.0), v3(1.0, 1.0, 0.0)],
            ],
        });
        assert!(matches!(s.evaluate(1.2, 0.5), Err(Error::Domain(_))));
        assert!(matches!(s.evaluate(0.5, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn bilinear_patch_reproduces_its_plane() {
        let s = SurfaceGeometry::new(SurfaceKind::Freeform {
            control: vec![
                vec![v3(0.0, 0.0, 1.0), v3(0.0, 2.0, 1.0)],
                vec![v3(3.0, 0.0, 1.0), v3(3.0, 2.0, 1.0)],
            ],
        });
        let (p, n) = s.evaluate(0.25, 0.5).unwrap();
        assert!((p - v3(0.75, 1.0, 1.0)).norm() < 1e-12);
        assert!((n - v3(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn uv_inversion_round_trips_on_surface_points() {
        let surfaces = vec![
            SurfaceGeometry::new(SurfaceKind::Plane {
                origin: v3(1.0, 2.0, 3.0),
                x_dir: Vec3::Y,
                y_dir: Vec3::Z,
            }),
            SurfaceGeometry::new(SurfaceKind::Cylinder {
                origin: ORIGIN,
                axis: Vec3::Z,
                x_ref: Vec3::X,
                radius: 0.75,
                height: 2.0,
            }),
            SurfaceGeometry::new(SurfaceKind::Torus {
                center: ORIGIN,
                axis: Vec3::Z,
                x_ref: Vec3::X,
                major_radius: 2.0,
                minor_radius: 0.5,
            }),
        ];
        let mut rng = Stream::derive(5, &["uv-inv"]);
        for s in &surfaces {
            for _ in 0..25 {
                let (u, v) = match s.kind {
                    SurfaceKind::Plane { .. } => {
                        (rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0))
                    }
                    _ => (
                        rng.uniform_in(0.01, std::f64::consts::TAU - 0.01),
                        rng.uniform_in(0.01, 0.99),
                    ),
                };
                let v = if matches!(s.kind, SurfaceKind::Torus { .. }) {
                    v * std::f64::consts::TAU
                } else {
                    v
                };
                let (p, _) = s.evaluate(u, v).unwrap();
                let (u2, v2) = s.uv_of_point(p).unwrap();
                assert!((u - u2).abs() < 1e-9, "u {u} vs {u2}");
                assert!((v - v2).abs() < 1e-9, "v {v} vs {v2}");
            }
        }
    }
}
