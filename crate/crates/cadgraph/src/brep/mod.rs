//! Boundary-representation data model.
//!
//! A [`BRepPart`] is a set of [`Face`]s (parametric surfaces with a uv
//! domain, optional trimming loops and product attributes) and [`Curve`]s
//! (parametric curves that record which faces they bound). Conversion to a
//! [`PartGraph`] keeps one node per face and connects faces that share a
//! curve; see [`graph`] for the adjacency rules.
//!
//! All types are immutable after construction and safe to share across
//! threads.

pub mod curve;
pub mod graph;
pub mod jsonl;
pub mod normalize;
pub mod surface;
pub mod synthetic;
pub mod vec3;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use curve::{CurveGeometry, CurveKind, NUM_CURVE_TYPES};
pub use graph::{to_graph, to_graph_with_report, ConversionReport, GraphEdge, PartGraph};
pub use normalize::normalize_part;
pub use surface::{SurfaceGeometry, SurfaceKind, NUM_SURFACE_TYPES};
pub use synthetic::{generate_synthetic_family, FamilySpec, TemplateSpec};
pub use vec3::{v3, Vec3};

macro_rules! string_id {
    ($name:ident) => {
        #[derive(
            Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_string())
            }
        }
    };
}

string_id!(PartId);
string_id!(FaceId);
string_id!(CurveId);

/// Product attribute value: categorical token or real measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Cat(String),
    Real(f64),
}

/// Rectangle in parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UvDomain {
    pub u: [f64; 2],
    pub v: [f64; 2],
}

impl UvDomain {
    pub fn new(u: [f64; 2], v: [f64; 2]) -> Self {
        UvDomain { u, v }
    }

    pub fn u_span(&self) -> f64 {
        self.u[1] - self.u[0]
    }

    pub fn v_span(&self) -> f64 {
        self.v[1] - self.v[0]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_span() > 0.0 && self.v_span() > 0.0) {
            return Err(Error::Domain(format!(
                "uv domain must have positive area: u {:?}, v {:?}",
                self.u, self.v
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Face {
    pub id: FaceId,
    pub surface: SurfaceGeometry,
    pub uv_domain: UvDomain,
    /// Trimming loops, each an ordered list of curve ids. Empty when the
    /// whole uv domain is visible.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub loops: Vec<Vec<CurveId>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attrs: BTreeMap<String, AttrValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub id: CurveId,
    pub geometry: CurveGeometry,
    pub adjacent_faces: Vec<FaceId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BRepPart {
    pub id: PartId,
    pub faces: Vec<Face>,
    pub curves: Vec<Curve>,
}

impl BRepPart {
    pub fn face(&self, id: &FaceId) -> Option<&Face> {
        self.faces.iter().find(|f| &f.id == id)
    }

    pub fn curve(&self, id: &CurveId) -> Option<&Curve> {
        self.curves.iter().find(|c| &c.id == id)
    }

    /// Check every structural invariant; returns the part id on failure.
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidPart {
                part: self.id.to_string(),
                reason,
            })
        };
        if self.faces.is_empty() {
            return fail("no faces".into());
        }
        let mut face_ids = BTreeSet::new();
        for face in &self.faces {
            if !face_ids.insert(&face.id) {
                return fail(format!("duplicate face id {}", face.id));
            }
        }
        let mut curve_ids = BTreeSet::new();
        for curve in &self.curves {
            if !curve_ids.insert(&curve.id) {
                return fail(format!("duplicate curve id {}", curve.id));
            }
        }
        for face in &self.faces {
            if let Err(e) = face.surface.validate() {
                return fail(format!("face {}: {e}", face.id));
            }
            if let Err(e) = face.uv_domain.validate() {
                return fail(format!("face {}: {e}", face.id));
            }
            for ring in &face.loops {
                for cid in ring {
                    if !curve_ids.contains(cid) {
                        return fail(format!(
                            "face {} loop references missing curve {cid}",
                            face.id
                        ));
                    }
                }
            }
        }
        for curve in &self.curves {
            if let Err(e) = curve.geometry.validate() {
                return fail(format!("curve {}: {e}", curve.id));
            }
            let mut seen = BTreeSet::new();
            for fid in &curve.adjacent_faces {
                if !face_ids.contains(fid) {
                    return fail(format!(
                        "curve {} adjacent to missing face {fid}",
                        curve.id
                    ));
                }
                if !seen.insert(fid) {
                    return fail(format!(
                        "curve {} lists face {fid} twice",
                        curve.id
                    ));
                }
            }
        }
        Ok(())
    }
}
