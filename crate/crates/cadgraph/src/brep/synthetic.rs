//! Synthetic part families.
//!
//! A family is a template (box, capped cylinder, L-bracket, ring, slotted
//! plate, box-with-holes) plus jitter ranges for its continuous dimensions
//! and a product-attribute distribution. All parts of a family share the
//! template's topology; dimensions and attributes vary per part,
//! deterministically in `(seed, family name, part index)`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::curve::{CurveGeometry, CurveKind};
use super::surface::{SurfaceGeometry, SurfaceKind};
use super::vec3::{v3, Vec3};
use super::{AttrValue, BRepPart, Curve, CurveId, Face, FaceId, PartId, UvDomain};
use crate::error::{Error, Result};
use crate::rng::Stream;

/// Closed jitter range `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range2 {
    pub lo: f64,
    pub hi: f64,
}

impl Range2 {
    pub fn new(lo: f64, hi: f64) -> Self {
        Range2 { lo, hi }
    }

    fn validate(&self, what: &str, require_positive: bool) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return Err(Error::FamilySpec(format!(
                "{what}: invalid range [{}, {}]",
                self.lo, self.hi
            )));
        }
        if require_positive && self.lo <= 0.0 {
            return Err(Error::FamilySpec(format!(
                "{what}: jitter range [{}, {}] allows non-positive values",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    fn draw(&self, rng: &mut Stream) -> f64 {
        rng.uniform_in(self.lo, self.hi)
    }
}

impl From<[f64; 2]> for Range2 {
    fn from(a: [f64; 2]) -> Self {
        Range2 { lo: a[0], hi: a[1] }
    }
}

impl From<Range2> for [f64; 2] {
    fn from(r: Range2) -> Self {
        [r.lo, r.hi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "template", rename_all = "snake_case")]
pub enum TemplateSpec {
    Box {
        width: Range2,
        depth: Range2,
        height: Range2,
    },
    CappedCylinder {
        radius: Range2,
        height: Range2,
    },
    LBracket {
        arm_x: Range2,
        arm_y: Range2,
        thickness: Range2,
        depth: Range2,
    },
    /// Solid torus.
    Ring {
        major_radius: Range2,
        minor_radius: Range2,
    },
    SlottedPlate {
        width: Range2,
        depth: Range2,
        height: Range2,
        /// Slot size as fractions of width/depth, in (0, 0.8].
        slot_width_frac: Range2,
        slot_depth_frac: Range2,
    },
    BoxWithHoles {
        width: Range2,
        depth: Range2,
        height: Range2,
        holes: usize,
        /// Hole radius as a fraction of the hole pitch, in (0, 0.4].
        hole_radius_frac: Range2,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AttrSpec {
    Cat { name: String, choices: Vec<String> },
    Real { name: String, range: Range2 },
}

/// Which faces carry the drawn product attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrPlacement {
    /// Part-level attributes repeated on every face.
    #[default]
    AllFaces,
    /// Attributes on the first face only (e.g. a marking or finish that
    /// exists in one place).
    FirstFace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub name: String,
    #[serde(flatten)]
    pub template: TemplateSpec,
    #[serde(default)]
    pub attrs: Vec<AttrSpec>,
    #[serde(default)]
    pub attr_placement: AttrPlacement,
}

impl FamilySpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::FamilySpec("family name is empty".into()));
        }
        match &self.template {
            TemplateSpec::Box {
                width,
                depth,
                height,
            } => {
                width.validate("box width", true)?;
                depth.validate("box depth", true)?;
                height.validate("box height", true)
            }
            TemplateSpec::CappedCylinder { radius, height } => {
                radius.validate("cylinder radius", true)?;
                height.validate("cylinder height", true)
            }
            TemplateSpec::LBracket {
                arm_x,
                arm_y,
                thickness,
                depth,
            } => {
                arm_x.validate("bracket arm_x", true)?;
                arm_y.validate("bracket arm_y", true)?;
                thickness.validate("bracket thickness", true)?;
                depth.validate("bracket depth", true)?;
                if thickness.hi >= arm_x.lo || thickness.hi >= arm_y.lo {
                    return Err(Error::FamilySpec(
                        "bracket thickness range may reach the arm length".into(),
                    ));
                }
                Ok(())
            }
            TemplateSpec::Ring {
                major_radius,
                minor_radius,
            } => {
                major_radius.validate("ring major radius", true)?;
                minor_radius.validate("ring minor radius", true)?;
                if minor_radius.hi >= major_radius.lo {
                    return Err(Error::FamilySpec(
                        "ring minor radius range may reach the major radius".into(),
                    ));
                }
                Ok(())
            }
            TemplateSpec::SlottedPlate {
                width,
                depth,
                height,
                slot_width_frac,
                slot_depth_frac,
            } => {
                width.validate("plate width", true)?;
                depth.validate("plate depth", true)?;
                height.validate("plate height", true)?;
                slot_width_frac.validate("slot width fraction", true)?;
                slot_depth_frac.validate("slot depth fraction", true)?;
                if slot_width_frac.hi > 0.8 || slot_depth_frac.hi > 0.8 {
                    return Err(Error::FamilySpec(
                        "slot fractions above 0.8 leave no material".into(),
                    ));
                }
                Ok(())
            }
            TemplateSpec::BoxWithHoles {
                width,
                depth,
                height,
                holes,
                hole_radius_frac,
            } => {
                width.validate("box width", true)?;
                depth.validate("box depth", true)?;
                height.validate("box height", true)?;
                hole_radius_frac.validate("hole radius fraction", true)?;
                if *holes == 0 {
                    return Err(Error::FamilySpec("box-with-holes needs >= 1 hole".into()));
                }
                if hole_radius_frac.hi > 0.4 {
                    return Err(Error::FamilySpec(
                        "hole radius fraction above 0.4 merges holes".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Box family for unit tests.
    pub fn example_box() -> FamilySpec {
        FamilySpec {
            name: "box".into(),
            template: TemplateSpec::Box {
                width: Range2::new(1.0, 1.6),
                depth: Range2::new(0.8, 1.2),
                height: Range2::new(0.4, 0.7),
            },
            attrs: vec![
                AttrSpec::Cat {
                    name: "material".into(),
                    choices: vec!["steel".into(), "aluminum".into()],
                },
                AttrSpec::Real {
                    name: "mass".into(),
                    range: Range2::new(0.5, 2.5),
                },
            ],
            attr_placement: AttrPlacement::AllFaces,
        }
    }

    /// Capped-cylinder family for unit tests.
    pub fn example_cylinder() -> FamilySpec {
        FamilySpec {
            name: "cyl".into(),
            template: TemplateSpec::CappedCylinder {
                radius: Range2::new(0.4, 0.6),
                height: Range2::new(1.0, 1.4),
            },
            attrs: vec![],
            attr_placement: AttrPlacement::AllFaces,
        }
    }

    /// The ten-family corpus used by the evaluation fixtures. All families
    /// share one "slab" chassis (overlapping width/depth/height bands) and
    /// differ only in structural motifs: hole count and size, slot
    /// proportions, or an L-profile. The families carry no product
    /// attributes: a per-part attribute value would hand contrastive
    /// instance discrimination a fingerprint shortcut around shape.
    pub fn default_set() -> Vec<FamilySpec> {
        let chassis = (
            Range2::new(1.45, 1.75), // width
            Range2::new(1.05, 1.35), // depth
            Range2::new(0.32, 0.42), // height
        );
        let holes = |name: &str, holes: usize, lo: f64, hi: f64| FamilySpec {
            name: name.into(),
            template: TemplateSpec::BoxWithHoles {
                width: chassis.0,
                depth: chassis.1,
                height: chassis.2,
                holes,
                hole_radius_frac: Range2::new(lo, hi),
            },
            attrs: vec![],
            attr_placement: AttrPlacement::AllFaces,
        };
        let slot = |name: &str, wf: Range2, df: Range2| FamilySpec {
            name: name.into(),
            template: TemplateSpec::SlottedPlate {
                width: chassis.0,
                depth: chassis.1,
                height: chassis.2,
                slot_width_frac: wf,
                slot_depth_frac: df,
            },
            attrs: vec![],
            attr_placement: AttrPlacement::AllFaces,
        };
        vec![
            FamilySpec {
                name: "slab".into(),
                template: TemplateSpec::Box {
                    width: chassis.0,
                    depth: chassis.1,
                    height: chassis.2,
                },
                attrs: vec![],
                attr_placement: AttrPlacement::AllFaces,
            },
            holes("slab-hole1s", 1, 0.12, 0.16),
            holes("slab-hole1b", 1, 0.32, 0.38),
            holes("slab-hole2s", 2, 0.12, 0.16),
            holes("slab-hole2b", 2, 0.32, 0.38),
            holes("slab-hole3", 3, 0.20, 0.26),
            slot(
                "slab-slot-narrow",
                Range2::new(0.18, 0.26),
                Range2::new(0.18, 0.26),
            ),
            slot(
                "slab-slot-wide",
                Range2::new(0.54, 0.65),
                Range2::new(0.18, 0.26),
            ),
            slot(
                "slab-slot-deep",
                Range2::new(0.18, 0.26),
                Range2::new(0.50, 0.60),
            ),
            FamilySpec {
                name: "slab-bracket".into(),
                template: TemplateSpec::LBracket {
                    arm_x: chassis.0,
                    arm_y: chassis.1,
                    thickness: Range2::new(0.36, 0.46),
                    depth: chassis.2,
                },
                attrs: vec![],
                attr_placement: AttrPlacement::AllFaces,
            },
        ]
    }
}

/// Generate `count` parts of one family. Deterministic in
/// `(seed, family name, part index)` regardless of call order.
pub fn generate_synthetic_family(
    spec: &FamilySpec,
    count: usize,
    seed: u64,
) -> Result<Vec<BRepPart>> {
    spec.validate()?;
    let mut parts = Vec::with_capacity(count);
    for index in 0..count {
        let id = PartId::new(format!("{}-{index:04}", spec.name));
        let mut rng = Stream::derive(seed, &["family", &spec.name, "part", &index.to_string()]);
        let attrs = draw_attrs(&spec.attrs, &mut rng);
        let part = match &spec.template {
            TemplateSpec::Box {
                width,
                depth,
                height,
            } => {
                let (w, d, h) = (width.draw(&mut rng), depth.draw(&mut rng), height.draw(&mut rng));
                build_box(id, v3(0.0, 0.0, 0.0), w, d, h, attrs)
            }
            TemplateSpec::CappedCylinder { radius, height } => {
                build_capped_cylinder(id, radius.draw(&mut rng), height.draw(&mut rng), attrs)
            }
            TemplateSpec::LBracket {
                arm_x,
                arm_y,
                thickness,
                depth,
            } => {
                let ax = arm_x.draw(&mut rng);
                let ay = arm_y.draw(&mut rng);
                let t = thickness.draw(&mut rng);
                let d = depth.draw(&mut rng);
                build_l_bracket(id, ax, ay, t, d, attrs)?
            }
            TemplateSpec::Ring {
                major_radius,
                minor_radius,
            } => {
                let major = major_radius.draw(&mut rng);
                let minor = minor_radius.draw(&mut rng);
                build_ring(id, major, minor, attrs)?
            }
            TemplateSpec::SlottedPlate {
                width,
                depth,
                height,
                slot_width_frac,
                slot_depth_frac,
            } => {
                let w = width.draw(&mut rng);
                let d = depth.draw(&mut rng);
                let h = height.draw(&mut rng);
                let sw = w * slot_width_frac.draw(&mut rng);
                let sd = d * slot_depth_frac.draw(&mut rng);
                build_slotted_plate(id, w, d, h, sw, sd, attrs)?
            }
            TemplateSpec::BoxWithHoles {
                width,
                depth,
                height,
                holes,
                hole_radius_frac,
            } => {
                let w = width.draw(&mut rng);
                let d = depth.draw(&mut rng);
                let h = height.draw(&mut rng);
                let frac = hole_radius_frac.draw(&mut rng);
                build_box_with_holes(id, w, d, h, *holes, frac, attrs)?
            }
        };
        let part = match spec.attr_placement {
            AttrPlacement::AllFaces => part,
            AttrPlacement::FirstFace => {
                let mut part = part;
                for face in part.faces.iter_mut().skip(1) {
                    face.attrs.clear();
                }
                part
            }
        };
        part.validate()?;
        parts.push(part);
    }
    Ok(parts)
}

fn draw_attrs(specs: &[AttrSpec], rng: &mut Stream) -> BTreeMap<String, AttrValue> {
    let mut out = BTreeMap::new();
    for spec in specs {
        match spec {
            AttrSpec::Cat { name, choices } => {
                if !choices.is_empty() {
                    let pick = choices[rng.below(choices.len())].clone();
                    out.insert(name.clone(), AttrValue::Cat(pick));
                }
            }
            AttrSpec::Real { name, range } => {
                out.insert(name.clone(), AttrValue::Real(range.draw(rng)));
            }
        }
    }
    out
}

fn fid(i: usize) -> FaceId {
    FaceId::new(format!("f{i:02}"))
}

fn cid(i: usize) -> CurveId {
    CurveId::new(format!("c{i:02}"))
}

fn plane(origin: Vec3, x_dir: Vec3, y_dir: Vec3) -> SurfaceGeometry {
    SurfaceGeometry::new(SurfaceKind::Plane {
        origin,
        x_dir,
        y_dir,
    })
}

fn line(a: Vec3, b: Vec3, faces: &[usize], id: usize) -> Curve {
    Curve {
        id: cid(id),
        geometry: CurveGeometry::new(CurveKind::Line { a, b }, [0.0, 1.0]),
        adjacent_faces: faces.iter().map(|&f| fid(f)).collect(),
    }
}

fn circle(center: Vec3, axis: Vec3, x_ref: Vec3, radius: f64, faces: &[usize], id: usize) -> Curve {
    Curve {
        id: cid(id),
        geometry: CurveGeometry::new(
            CurveKind::Circle {
                center,
                axis,
                x_ref,
                radius,
            },
            [0.0, std::f64::consts::TAU],
        ),
        adjacent_faces: faces.iter().map(|&f| fid(f)).collect(),
    }
}

/// Axis-aligned box centered at `center`. 6 faces, 12 edges, every face
/// untrimmed.
pub fn build_box(
    id: PartId,
    center: Vec3,
    w: f64,
    d: f64,
    h: f64,
    attrs: BTreeMap<String, AttrValue>,
) -> BRepPart {
    let (hx, hy, hz) = (w / 2.0, d / 2.0, h / 2.0);
    let c = center;
    // corner lookup: bit0 -> +x, bit1 -> +y, bit2 -> +z
    let corner = |m: usize| {
        v3(
            c.x + if m & 1 != 0 { hx } else { -hx },
            c.y + if m & 2 != 0 { hy } else { -hy },
            c.z + if m & 4 != 0 { hz } else { -hz },
        )
    };
    let face_defs = [
        // (origin offset, x_dir, y_dir, u half-span, v half-span)
        (v3(c.x, c.y, c.z - hz), Vec3::X, -Vec3::Y, hx, hy), // 0 bottom (-z)
        (v3(c.x, c.y, c.z + hz), Vec3::X, Vec3::Y, hx, hy),  // 1 top (+z)
        (v3(c.x - hx, c.y, c.z), Vec3::Z, Vec3::Y, hz, hy),  // 2 left (-x)
        (v3(c.x + hx, c.y, c.z), Vec3::Y, Vec3::Z, hy, hz),  // 3 right (+x)
        (v3(c.x, c.y - hy, c.z), Vec3::X, Vec3::Z, hx, hz),  // 4 front (-y)
        (v3(c.x, c.y + hy, c.z), Vec3::Z, Vec3::X, hz, hx),  // 5 back (+y)
    ];
    let faces: Vec<Face> = face_defs
        .iter()
        .enumerate()
        .map(|(i, (origin, x_dir, y_dir, hu, hv))| Face {
            id: fid(i),
            surface: plane(*origin, *x_dir, *y_dir),
            uv_domain: UvDomain::new([-hu, *hu], [-hv, *hv]),
            loops: vec![],
            attrs: attrs.clone(),
        })
        .collect();

    // the twelve edges: (corner m0, corner m1, adjacent faces)
    let edges = [
        (0, 1, [0, 4]), // -z -y, along x
        (2, 3, [0, 5]), // -z +y
        (4, 5, [1, 4]), // +z -y
        (6, 7, [1, 5]), // +z +y
        (0, 2, [0, 2]), // -z -x, along y
        (1, 3, [0, 3]),
        (4, 6, [1, 2]),
        (5, 7, [1, 3]),
        (0, 4, [2, 4]), // -x -y, along z
        (1, 5, [3, 4]),
        (2, 6, [2, 5]),
        (3, 7, [3, 5]),
    ];
    let curves: Vec<Curve> = edges
        .iter()
        .enumerate()
        .map(|(i, (m0, m1, fs))| line(corner(*m0), corner(*m1), fs, i))
        .collect();

    BRepPart {
        id,
        faces,
        curves,
    }
}

/// Cylinder with flat caps, centered at the origin, axis +z.
/// 3 faces, 2 edge circles, 1 seam (single adjacency).
pub fn build_capped_cylinder(
    id: PartId,
    radius: f64,
    height: f64,
    attrs: BTreeMap<String, AttrValue>,
) -> BRepPart {
    let hz = height / 2.0;
    let faces = vec![
        Face {
            id: fid(0),
            surface: plane(v3(0.0, 0.0, -hz), Vec3::X, -Vec3::Y),
            uv_domain: UvDomain::new([-radius, radius], [-radius, radius]),
            loops: vec![vec![cid(0)]],
            attrs: attrs.clone(),
        },
        Face {
            id: fid(1),
            surface: plane(v3(0.0, 0.0, hz), Vec3::X, Vec3::Y),
            uv_domain: UvDomain::new([-radius, radius], [-radius, radius]),
            loops: vec![vec![cid(1)]],
            attrs: attrs.clone(),
        },
        Face {
            id: fid(2),
            surface: SurfaceGeometry::new(SurfaceKind::Cylinder {
                origin: v3(0.0, 0.0, -hz),
                axis: Vec3::Z,
                x_ref: Vec3::X,
                radius,
                height,
            }),
            uv_domain: UvDomain::new([0.0, std::f64::consts::TAU], [0.0, 1.0]),
            loops: vec![],
            attrs,
        },
    ];
    let curves = vec![
        circle(v3(0.0, 0.0, -hz), Vec3::Z, Vec3::X, radius, &[0, 2], 0),
        circle(v3(0.0, 0.0, hz), Vec3::Z, Vec3::X, radius, &[1, 2], 1),
        line(v3(radius, 0.0, -hz), v3(radius, 0.0, hz), &[2], 2),
    ];
    BRepPart { id, faces, curves }
}

/// L-shaped prism: hexagonal profile extruded along z.
/// 8 faces (2 trimmed caps, 6 sides), 18 edges.
pub fn build_l_bracket(
    id: PartId,
    arm_x: f64,
    arm_y: f64,
    thickness: f64,
    depth: f64,
    attrs: BTreeMap<String, AttrValue>,
) -> Result<BRepPart> {
    if thickness >= arm_x || thickness >= arm_y {
        return Err(Error::FamilySpec(format!(
            "bracket thickness {thickness} must stay below arms ({arm_x}, {arm_y})"
        )));
    }
    // ccw profile in xy, bbox-centered
    let ox = -arm_x / 2.0;
    let oy = -arm_y / 2.0;
    let oz = -depth / 2.0;
    let profile = [
        v3(ox, oy, 0.0),
        v3(ox + arm_x, oy, 0.0),
        v3(ox + arm_x, oy + thickness, 0.0),
        v3(ox + thickness, oy + thickness, 0.0),
        v3(ox + thickness, oy + arm_y, 0.0),
        v3(ox, oy + arm_y, 0.0),
    ];
    let nseg = profile.len();
    let lift = |p: Vec3, z: f64| v3(p.x, p.y, z);

    let mut faces = Vec::new();
    // bottom cap (normal -z): u along y, v along x
    faces.push(Face {
        id: fid(0),
        surface: plane(v3(0.0, 0.0, oz), Vec3::Y, Vec3::X),
        uv_domain: UvDomain::new([oy, oy + arm_y], [ox, ox + arm_x]),
        loops: vec![(0..nseg).map(cid).collect()],
        attrs: attrs.clone(),
    });
    // top cap (normal +z)
    faces.push(Face {
        id: fid(1),
        surface: plane(v3(0.0, 0.0, -oz), Vec3::X, Vec3::Y),
        uv_domain: UvDomain::new([ox, ox + arm_x], [oy, oy + arm_y]),
        loops: vec![(nseg..2 * nseg).map(cid).collect()],
        attrs: attrs.clone(),
    });
    // side walls
    for i in 0..nseg {
        let a = profile[i];
        let b = profile[(i + 1) % nseg];
        let dir = (b - a).normalized().expect("profile edges non-degenerate");
        let len = (b - a).norm();
        faces.push(Face {
            id: fid(2 + i),
            surface: plane(lift(a, oz), dir, Vec3::Z),
            uv_domain: UvDomain::new([0.0, len], [0.0, depth]),
            loops: vec![],
            attrs: attrs.clone(),
        });
    }

    let mut curves = Vec::new();
    // bottom profile edges: c00..c05
    for i in 0..nseg {
        let a = lift(profile[i], oz);
        let b = lift(profile[(i + 1) % nseg], oz);
        curves.push(line(a, b, &[0, 2 + i], i));
    }
    // top profile edges: c06..c11
    for i in 0..nseg {
        let a = lift(profile[i], -oz);
        let b = lift(profile[(i + 1) % nseg], -oz);
        curves.push(line(a, b, &[1, 2 + i], nseg + i));
    }
    // vertical edges at each profile vertex: c12..c17
    for i in 0..nseg {
        let prev = (i + nseg - 1) % nseg;
        curves.push(line(
            lift(profile[i], oz),
            lift(profile[i], -oz),
            &[2 + prev, 2 + i],
            2 * nseg + i,
        ));
    }
    Ok(BRepPart { id, faces, curves })
}

/// Solid torus: one closed face plus two seam circles that touch only it.
pub fn build_ring(
    id: PartId,
    major_radius: f64,
    minor_radius: f64,
    attrs: BTreeMap<String, AttrValue>,
) -> Result<BRepPart> {
    if minor_radius >= major_radius {
        return Err(Error::FamilySpec(format!(
            "ring minor radius {minor_radius} must stay below major radius {major_radius}"
        )));
    }
    let tau = std::f64::consts::TAU;
    let faces = vec![Face {
        id: fid(0),
        surface: SurfaceGeometry::new(SurfaceKind::Torus {
            center: v3(0.0, 0.0, 0.0),
            axis: Vec3::Z,
            x_ref: Vec3::X,
            major_radius,
            minor_radius,
        }),
        uv_domain: UvDomain::new([0.0, tau], [0.0, tau]),
        loops: vec![],
        attrs,
    }];
    let curves = vec![
        // tube seam at u = 0: a circle of the minor radius in the xz plane
        circle(
            v3(major_radius, 0.0, 0.0),
            -Vec3::Y,
            Vec3::X,
            minor_radius,
            &[0],
            0,
        ),
        // outer equator at v = 0
        circle(
            v3(0.0, 0.0, 0.0),
            Vec3::Z,
            Vec3::X,
            major_radius + minor_radius,
            &[0],
            1,
        ),
    ];
    Ok(BRepPart { id, faces, curves })
}

/// Plate with a centered rectangular through-slot.
/// 10 faces (trimmed top/bottom, 4 outer sides, 4 slot walls), 24 edges.
pub fn build_slotted_plate(
    id: PartId,
    w: f64,
    d: f64,
    h: f64,
    slot_w: f64,
    slot_d: f64,
    attrs: BTreeMap<String, AttrValue>,
) -> Result<BRepPart> {
    if slot_w >= w || slot_d >= d {
        return Err(Error::FamilySpec(format!(
            "slot ({slot_w} x {slot_d}) does not fit in plate ({w} x {d})"
        )));
    }
    let hz = h / 2.0;
    let (sx, sy) = (slot_w / 2.0, slot_d / 2.0);
    let base = build_box(id.clone(), v3(0.0, 0.0, 0.0), w, d, h, attrs.clone());
    let mut faces = base.faces;
    let mut curves = base.curves;

    // trim caps with the outer rectangle plus the slot rectangle
    // bottom outer edges: c00 (-y), c01 (+y), c04 (-x), c05 (+x)
    faces[0].loops = vec![
        vec![cid(0), cid(5), cid(1), cid(4)],
        vec![cid(12), cid(13), cid(14), cid(15)],
    ];
    // top outer edges: c02, c03, c06, c07
    faces[1].loops = vec![
        vec![cid(2), cid(7), cid(3), cid(6)],
        vec![cid(16), cid(17), cid(18), cid(19)],
    ];

    // slot walls: normals point into the cavity
    let wall_defs = [
        (v3(-sx, 0.0, 0.0), Vec3::Y, Vec3::Z, sy, hz), // 6: wall at -x, normal +x
        (v3(sx, 0.0, 0.0), Vec3::Z, Vec3::Y, hz, sy),  // 7: wall at +x, normal -x
        (v3(0.0, -sy, 0.0), Vec3::Z, Vec3::X, hz, sx), // 8: wall at -y, normal +y
        (v3(0.0, sy, 0.0), Vec3::X, Vec3::Z, sx, hz),  // 9: wall at +y, normal -y
    ];
    for (i, (origin, x_dir, y_dir, hu, hv)) in wall_defs.iter().enumerate() {
        faces.push(Face {
            id: fid(6 + i),
            surface: plane(*origin, *x_dir, *y_dir),
            uv_domain: UvDomain::new([-hu, *hu], [-hv, *hv]),
            loops: vec![],
            attrs: attrs.clone(),
        });
    }

    let sc = |x: f64, y: f64, z: f64| v3(x, y, z);
    // slot rectangle corners
    let b = -hz;
    let t = hz;
    // bottom slot edges: c12..c15 (face 0 + wall)
    curves.push(line(sc(-sx, -sy, b), sc(-sx, sy, b), &[0, 6], 12));
    curves.push(line(sc(sx, -sy, b), sc(sx, sy, b), &[0, 7], 13));
    curves.push(line(sc(-sx, -sy, b), sc(sx, -sy, b), &[0, 8], 14));
    curves.push(line(sc(-sx, sy, b), sc(sx, sy, b), &[0, 9], 15));
    // top slot edges: c16..c19
    curves.push(line(sc(-sx, -sy, t), sc(-sx, sy, t), &[1, 6], 16));
    curves.push(line(sc(sx, -sy, t), sc(sx, sy, t), &[1, 7], 17));
    curves.push(line(sc(-sx, -sy, t), sc(sx, -sy, t), &[1, 8], 18));
    curves.push(line(sc(-sx, sy, t), sc(sx, sy, t), &[1, 9], 19));
    // vertical slot corners: c20..c23
    curves.push(line(sc(-sx, -sy, b), sc(-sx, -sy, t), &[6, 8], 20));
    curves.push(line(sc(-sx, sy, b), sc(-sx, sy, t), &[6, 9], 21));
    curves.push(line(sc(sx, -sy, b), sc(sx, -sy, t), &[7, 8], 22));
    curves.push(line(sc(sx, sy, b), sc(sx, sy, t), &[7, 9], 23));

    Ok(BRepPart { id, faces, curves })
}

/// Box with `n` cylindrical through-holes along the x axis.
/// 6 + n faces, 12 + 2n edges, n seams.
pub fn build_box_with_holes(
    id: PartId,
    w: f64,
    d: f64,
    h: f64,
    holes: usize,
    radius_frac: f64,
    attrs: BTreeMap<String, AttrValue>,
) -> Result<BRepPart> {
    let pitch = w / (holes as f64 + 1.0);
    let radius = radius_frac * pitch;
    if radius <= 0.0 || radius >= d / 2.0 || radius >= pitch / 2.0 {
        return Err(Error::FamilySpec(format!(
            "hole radius {radius} does not fit (pitch {pitch}, depth {d})"
        )));
    }
    let (hx, hz) = (w / 2.0, h / 2.0);
    let base = build_box(id.clone(), v3(0.0, 0.0, 0.0), w, d, h, attrs.clone());
    let mut faces = base.faces;
    let mut curves = base.curves;

    let mut bottom_loops = vec![vec![cid(0), cid(5), cid(1), cid(4)]];
    let mut top_loops = vec![vec![cid(2), cid(7), cid(3), cid(6)]];

    for k in 0..holes {
        let cx = -hx + pitch * (k as f64 + 1.0);
        let face_idx = 6 + k;
        faces.push(Face {
            id: fid(face_idx),
            surface: SurfaceGeometry::reversed(SurfaceKind::Cylinder {
                origin: v3(cx, 0.0, -hz),
                axis: Vec3::Z,
                x_ref: Vec3::X,
                radius,
                height: h,
            }),
            uv_domain: UvDomain::new([0.0, std::f64::consts::TAU], [0.0, 1.0]),
            loops: vec![],
            attrs: attrs.clone(),
        });
        let c_bot = 12 + 3 * k;
        let c_top = 12 + 3 * k + 1;
        let c_seam = 12 + 3 * k + 2;
        curves.push(circle(
            v3(cx, 0.0, -hz),
            Vec3::Z,
            Vec3::X,
            radius,
            &[0, face_idx],
            c_bot,
        ));
        curves.push(circle(
            v3(cx, 0.0, hz),
            Vec3::Z,
            Vec3::X,
            radius,
            &[1, face_idx],
            c_top,
        ));
        curves.push(line(
            v3(cx + radius, 0.0, -hz),
            v3(cx + radius, 0.0, hz),
            &[face_idx],
            c_seam,
        ));
        bottom_loops.push(vec![cid(c_bot)]);
        top_loops.push(vec![cid(c_top)]);
    }
    faces[0].loops = bottom_loops;
    faces[1].loops = top_loops;
    Ok(BRepPart { id, faces, curves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brep::to_graph;

    #[test]
    fn deterministic_generation() {
        let spec = FamilySpec::example_box();
        let a = generate_synthetic_family(&spec, 5, 42).unwrap();
        let b = generate_synthetic_family(&spec, 5, 42).unwrap();
        let ser = |parts: &[BRepPart]| serde_json::to_string(parts).unwrap();
        assert_eq!(ser(&a), ser(&b));
        let c = generate_synthetic_family(&spec, 5, 43).unwrap();
        assert_ne!(ser(&a), ser(&c));
    }

    #[test]
    fn box_family_topology_is_stable() {
        let spec = FamilySpec::example_box();
        let parts = generate_synthetic_family(&spec, 20, 7).unwrap();
        assert_eq!(parts.len(), 20);
        for part in &parts {
            let g = to_graph(part);
            assert_eq!((g.node_count(), g.edge_count()), (6, 12));
        }
    }

    #[test]
    fn bracket_family_same_topology_distinct_areas() {
        let spec = FamilySpec {
            name: "br".into(),
            template: TemplateSpec::LBracket {
                arm_x: Range2::new(1.2, 1.8),
                arm_y: Range2::new(1.0, 1.4),
                thickness: Range2::new(0.2, 0.3),
                depth: Range2::new(0.4, 0.6),
            },
            attrs: vec![],
            attr_placement: AttrPlacement::AllFaces,
        };
        let parts = generate_synthetic_family(&spec, 6, 9).unwrap();
        let mut topologies = std::collections::BTreeSet::new();
        let mut footprints = std::collections::BTreeSet::new();
        for part in &parts {
            let g = to_graph(part);
            topologies.insert((g.node_count(), g.edge_count()));
            // face count is fixed; the cap dimensions must differ
            let cap = &part.faces[1];
            footprints.insert(format!(
                "{:.12}x{:.12}",
                cap.uv_domain.u_span(),
                cap.uv_domain.v_span()
            ));
        }
        assert_eq!(topologies.len(), 1);
        assert_eq!(topologies.into_iter().next().unwrap(), (8, 18));
        assert_eq!(footprints.len(), 6, "dimensions should differ");
    }

    #[test]
    fn invalid_jitter_is_a_spec_error() {
        let spec = FamilySpec {
            name: "bad".into(),
            template: TemplateSpec::CappedCylinder {
                radius: Range2::new(-0.1, 0.4),
                height: Range2::new(1.0, 1.2),
            },
            attrs: vec![],
            attr_placement: AttrPlacement::AllFaces,
        };
        assert!(matches!(
            generate_synthetic_family(&spec, 1, 1),
            Err(Error::FamilySpec(_))
        ));
    }

    #[test]
    fn every_default_family_generates_and_validates() {
        for spec in FamilySpec::default_set() {
            let parts = generate_synthetic_family(&spec, 2, 5).unwrap();
            assert_eq!(parts.len(), 2);
            for part in parts {
                part.validate().unwrap();
                let g = to_graph(&part);
                assert!(g.node_count() >= 1);
            }
        }
    }

    #[test]
    fn slotted_plate_and_holes_topology() {
        let plate = build_slotted_plate(
            "p".into(),
            2.0,
            1.2,
            0.4,
            0.8,
            0.4,
            Default::default(),
        )
        .unwrap();
        plate.validate().unwrap();
        let g = to_graph(&plate);
        assert_eq!((g.node_count(), g.edge_count()), (10, 24));

        let holed = build_box_with_holes("h".into(), 2.0, 1.0, 0.5, 2, 0.3, Default::default())
            .unwrap();
        holed.validate().unwrap();
        let (g, report) = crate::brep::to_graph_with_report(&holed);
        assert_eq!((g.node_count(), g.edge_count()), (8, 16));
        assert_eq!(report.single_adjacency_skipped, 2);
    }

    #[test]
    fn ring_is_one_closed_face() {
        let ring = build_ring("r".into(), 1.0, 0.3, Default::default()).unwrap();
        ring.validate().unwrap();
        let (g, report) = crate::brep::to_graph_with_report(&ring);
        assert_eq!((g.node_count(), g.edge_count()), (1, 0));
        assert_eq!(report.single_adjacency_skipped, 2);
    }
}
