//! Per-object geometry statistics of a B-rep STEP file and the B-spline
//! ratio
//!
//! ```text
//! beta = (f_b / f + e_b / e) / 2
//! ```
//!
//! where `f` counts faces, `e` counts distinct edge geometry curves and the
//! `_b` counts are the B-spline ones among them. A zero denominator makes
//! its term zero; a model with neither faces nor curves is an error.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::step::{Entity, EntityGraph, EntityId, StepFile};

pub const FACE_KEYWORDS: &[&str] = &["ADVANCED_FACE", "FACE_SURFACE"];

pub const CURVE_KEYWORDS: &[&str] = &[
    "LINE",
    "CIRCLE",
    "ELLIPSE",
    "HYPERBOLA",
    "PARABOLA",
    "B_SPLINE_CURVE",
    "B_SPLINE_CURVE_WITH_KNOTS",
    "RATIONAL_B_SPLINE_CURVE",
    "BEZIER_CURVE",
    "QUASI_UNIFORM_CURVE",
    "UNIFORM_CURVE",
    "TRIMMED_CURVE",
    "POLYLINE",
];

pub const BSPLINE_SURFACE_KEYWORDS: &[&str] = &[
    "B_SPLINE_SURFACE",
    "B_SPLINE_SURFACE_WITH_KNOTS",
    "RATIONAL_B_SPLINE_SURFACE",
    "BEZIER_SURFACE",
    "QUASI_UNIFORM_SURFACE",
    "UNIFORM_SURFACE",
];

pub const BSPLINE_CURVE_KEYWORDS: &[&str] = &[
    "B_SPLINE_CURVE",
    "B_SPLINE_CURVE_WITH_KNOTS",
    "RATIONAL_B_SPLINE_CURVE",
    "BEZIER_CURVE",
    "QUASI_UNIFORM_CURVE",
    "UNIFORM_CURVE",
];

/// Edge geometry wrappers whose first reference is the 3D curve.
const CURVE_WRAPPERS: &[&str] = &["SURFACE_CURVE", "SEAM_CURVE", "INTERSECTION_CURVE"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("entity #{entity} refers to geometry #{target} that is missing or unusable")]
    UnresolvedGeometry { entity: EntityId, target: EntityId },
    #[error("entity #{0} has no geometry reference")]
    MissingGeometry(EntityId),
    #[error("model has no faces and no curves")]
    EmptyModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntityKind {
    Face,
    Curve,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntityClass {
    pub kind: EntityKind,
    pub is_bspline: bool,
}

impl EntityClass {
    const OTHER: EntityClass = EntityClass {
        kind: EntityKind::Other,
        is_bspline: false,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BRepStats {
    #[serde(rename = "f")]
    pub faces: usize,
    #[serde(rename = "fb")]
    pub bspline_faces: usize,
    #[serde(rename = "e")]
    pub curves: usize,
    #[serde(rename = "eb")]
    pub bspline_curves: usize,
    pub lines: usize,
    pub beta: f64,
}

impl BRepStats {
    /// Computes beta from the four counts. `None` when both denominators are
    /// zero.
    pub fn from_counts(
        faces: usize,
        bspline_faces: usize,
        curves: usize,
        bspline_curves: usize,
        lines: usize,
    ) -> Option<Self> {
        if faces == 0 && curves == 0 {
            return None;
        }
        let term = |b: usize, n: usize| if n == 0 { 0.0 } else { b as f64 / n as f64 };
        Some(BRepStats {
            faces,
            bspline_faces,
            curves,
            bspline_curves,
            lines,
            beta: (term(bspline_faces, faces) + term(bspline_curves, curves)) / 2.0,
        })
    }
}

fn any_keyword_in(entity: &Entity, set: &[&str]) -> bool {
    entity.keywords().any(|k| set.contains(&k))
}

/// Classifies one entity. Faces look through to their underlying surface,
/// trimmed curves to their basis curve.
pub fn classify_entity(entity: &Entity, graph: &EntityGraph) -> Result<EntityClass, MetricsError> {
    if any_keyword_in(entity, FACE_KEYWORDS) {
        let surface = face_surface(entity, graph)?;
        return Ok(EntityClass {
            kind: EntityKind::Face,
            is_bspline: any_keyword_in(surface, BSPLINE_SURFACE_KEYWORDS),
        });
    }
    if any_keyword_in(entity, CURVE_KEYWORDS) {
        return Ok(EntityClass {
            kind: EntityKind::Curve,
            is_bspline: curve_is_bspline(entity, graph)?,
        });
    }
    Ok(EntityClass::OTHER)
}

/// Underlying surface of a face: the first top-level reference of the face
/// record (`ADVANCED_FACE('', (bounds), #surface, .T.)`).
fn face_surface<'g>(face: &Entity, graph: &'g EntityGraph) -> Result<&'g Entity, MetricsError> {
    let target = face
        .records()
        .iter()
        .filter(|r| FACE_KEYWORDS.contains(&r.keyword.as_str()))
        .find_map(|r| r.first_ref())
        .ok_or(MetricsError::MissingGeometry(face.id))?;
    graph.get(target).ok_or(MetricsError::UnresolvedGeometry {
        entity: face.id,
        target,
    })
}

fn curve_is_bspline(curve: &Entity, graph: &EntityGraph) -> Result<bool, MetricsError> {
    let mut current = curve;
    // Bounded by graph size so a trimming cycle cannot loop forever.
    for _ in 0..=graph.len() {
        if any_keyword_in(current, BSPLINE_CURVE_KEYWORDS) {
            return Ok(true);
        }
        let Some(trim) = current.record("TRIMMED_CURVE") else {
            return Ok(false);
        };
        let basis = trim.first_ref().ok_or(MetricsError::MissingGeometry(current.id))?;
        current = graph.get(basis).ok_or(MetricsError::UnresolvedGeometry {
            entity: current.id,
            target: basis,
        })?;
    }
    Ok(false)
}

/// The geometry entity an EDGE_CURVE lies on, looking through surface-curve
/// wrappers.
fn edge_geometry<'g>(edge: &Entity, graph: &'g EntityGraph) -> Result<&'g Entity, MetricsError> {
    let rec = edge.record("EDGE_CURVE").expect("caller checked keyword");
    // EDGE_CURVE(name, start, end, geometry, same_sense)
    let target = rec
        .args
        .get(3)
        .and_then(|a| a.as_ref_id())
        .ok_or(MetricsError::MissingGeometry(edge.id))?;
    let mut geom = graph.get(target).ok_or(MetricsError::UnresolvedGeometry {
        entity: edge.id,
        target,
    })?;
    for _ in 0..=graph.len() {
        let Some(wrapper) = geom.records().iter().find(|r| CURVE_WRAPPERS.contains(&r.keyword.as_str()))
        else {
            break;
        };
        let inner = wrapper.first_ref().ok_or(MetricsError::MissingGeometry(geom.id))?;
        geom = graph.get(inner).ok_or(MetricsError::UnresolvedGeometry {
            entity: geom.id,
            target: inner,
        })?;
    }
    Ok(geom)
}

/// Face and curve counts plus beta for one file.
///
/// Curves are the distinct geometry entities that EDGE_CURVEs lie on, so an
/// edge shared by two faces (and used by two ORIENTED_EDGEs) counts once.
pub fn compute_stats(file: &StepFile) -> Result<BRepStats, MetricsError> {
    let graph = &file.data;
    let mut faces = 0;
    let mut bspline_faces = 0;
    for entity in graph.iter().filter(|e| any_keyword_in(e, FACE_KEYWORDS)) {
        faces += 1;
        if classify_entity(entity, graph)?.is_bspline {
            bspline_faces += 1;
        }
    }

    let mut curve_ids = BTreeSet::new();
    for edge in graph.with_keyword("EDGE_CURVE") {
        curve_ids.insert(edge_geometry(edge, graph)?.id);
    }
    let mut bspline_curves = 0;
    for id in &curve_ids {
        let curve = graph.get(*id).expect("collected from graph");
        if curve_is_bspline(curve, graph)? {
            bspline_curves += 1;
        }
    }

    BRepStats::from_counts(
        faces,
        bspline_faces,
        curve_ids.len(),
        bspline_curves,
        file.line_count,
    )
    .ok_or(MetricsError::EmptyModel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::step::parse_step;

    fn file(data: &str) -> StepFile {
        parse_step(&format!(
            "ISO-10303-21;\nHEADER;\nENDSEC;\nDATA;\n{data}\nENDSEC;\nEND-ISO-10303-21;\n"
        ))
        .unwrap()
    }

    #[test]
    fn eq1_hand_values() {
        assert_eq!(BRepStats::from_counts(4, 0, 8, 0, 1).unwrap().beta, 0.0);
        let s = BRepStats::from_counts(10, 3, 20, 5, 1).unwrap();
        assert!((s.beta - 0.275).abs() < 1e-15);
        assert_eq!(BRepStats::from_counts(7, 7, 9, 9, 1).unwrap().beta, 1.0);
    }

    #[test]
    fn degenerate_denominators() {
        assert_eq!(BRepStats::from_counts(0, 0, 4, 2, 1).unwrap().beta, 0.25);
        assert_eq!(BRepStats::from_counts(2, 1, 0, 0, 1).unwrap().beta, 0.25);
        assert!(BRepStats::from_counts(0, 0, 0, 0, 1).is_none());
    }

    #[test]
    fn planar_face_is_not_bspline() {
        let f = file("#1=PLANE('',#2);\n#2=AXIS2_PLACEMENT_3D('',$,$,$);\n#3=ADVANCED_FACE('',(),#1,.T.);");
        let class = classify_entity(f.data.get(3).unwrap(), &f.data).unwrap();
        assert_eq!(
            class,
            EntityClass {
                kind: EntityKind::Face,
                is_bspline: false
            }
        );
        assert_eq!(
            classify_entity(f.data.get(1).unwrap(), &f.data).unwrap(),
            EntityClass::OTHER
        );
    }

    #[test]
    fn complex_bspline_surface_makes_face_bspline() {
        let f = file(
            "#5=(BOUNDED_SURFACE() B_SPLINE_SURFACE(1,1,((#1,#1),(#1,#1)),.UNSPECIFIED.,.F.,.F.,.F.) \
             B_SPLINE_SURFACE_WITH_KNOTS((2),(2),(0.,1.),(0.,1.),.UNSPECIFIED.) GEOMETRIC_REPRESENTATION_ITEM());\n\
             #1=CARTESIAN_POINT('',(0.,0.,0.));\n#6=FACE_SURFACE('',(),#5,.T.);",
        );
        assert!(classify_entity(f.data.get(6).unwrap(), &f.data).unwrap().is_bspline);
    }

    #[test]
    fn unresolved_face_surface() {
        let f = file("#3=ADVANCED_FACE('',(),#40,.T.);");
        assert_eq!(
            classify_entity(f.data.get(3).unwrap(), &f.data),
            Err(MetricsError::UnresolvedGeometry {
                entity: 3,
                target: 40
            })
        );
        assert!(compute_stats(&f).is_err());
    }

    #[test]
    fn trimmed_curve_follows_basis() {
        let f = file(
            "#1=B_SPLINE_CURVE_WITH_KNOTS('',1,(#9,#9),.UNSPECIFIED.,.F.,.F.,(2,2),(0.,1.),.UNSPECIFIED.);\n\
             #2=TRIMMED_CURVE('',#1,(),(),.T.,.PARAMETER.);\n\
             #3=LINE('',#9,#9);\n#4=TRIMMED_CURVE('',#3,(),(),.T.,.PARAMETER.);\n#9=CARTESIAN_POINT('',(0.,0.,0.));",
        );
        let c = |id| classify_entity(f.data.get(id).unwrap(), &f.data).unwrap();
        assert!(c(2).is_bspline);
        assert_eq!(c(2).kind, EntityKind::Curve);
        assert!(!c(4).is_bspline);
    }

    #[test]
    fn shared_edge_geometry_counts_once() {
        let f = file(
            "#1=LINE('',$,$);\n#2=B_SPLINE_CURVE_WITH_KNOTS('',1,(),.UNSPECIFIED.,.F.,.F.,(2,2),(0.,1.),.UNSPECIFIED.);\n\
             #3=SURFACE_CURVE('',#2,(),.PCURVE_S1.);\n\
             #10=EDGE_CURVE('',$,$,#1,.T.);\n#11=EDGE_CURVE('',$,$,#1,.F.);\n#12=EDGE_CURVE('',$,$,#3,.T.);",
        );
        let s = compute_stats(&f).unwrap();
        assert_eq!((s.faces, s.curves, s.bspline_curves), (0, 2, 1));
        assert_eq!(s.beta, 0.25);
    }

    #[test]
    fn empty_model_is_an_error() {
        let f = file("#1=CARTESIAN_POINT('',(0.,0.,0.));");
        assert_eq!(compute_stats(&f), Err(MetricsError::EmptyModel));
    }
}
