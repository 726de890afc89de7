//! Structural validity of a B-rep: references resolve, solids are bounded
//! by closed shells, every edge of a closed shell is shared by exactly two
//! face uses traversing it in opposite directions, and there is something
//! to validate.
//!
//! Geometric closure (coincident vertices, sewing tolerance) is not checked
//! here; a kernel-level verdict can be folded in with
//! [`validate_with_kernel`].

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::step::{resolve_refs, Entity, EntityGraph, EntityId, Record, StepFile};

/// Minimum number of faces a closed model must have.
pub const MIN_FACES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// The exported file could not be parsed at all.
    Parse,
    ReferenceResolution,
    ShellClosure,
    EdgeManifold,
    OrientationConsistency,
    NonEmpty,
    KernelValidity,
}

impl Check {
    pub fn as_str(self) -> &'static str {
        match self {
            Check::Parse => "parse",
            Check::ReferenceResolution => "reference_resolution",
            Check::ShellClosure => "shell_closure",
            Check::EdgeManifold => "edge_manifold",
            Check::OrientationConsistency => "orientation_consistency",
            Check::NonEmpty => "non_empty",
            Check::KernelValidity => "kernel_validity",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub check: Check,
    pub entities: Vec<EntityId>,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.check, self.message)?;
        if !self.entities.is_empty() {
            let ids: Vec<String> = self.entities.iter().map(|id| format!("#{id}")).collect();
            write!(f, " [{}]", ids.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub verdict: Verdict,
    pub failures: Vec<Failure>,
    /// Advisory findings that do not affect the verdict.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn from_failures(failures: Vec<Failure>, warnings: Vec<String>) -> Self {
        let verdict = if failures.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Fail
        };
        ValidationReport {
            verdict,
            failures,
            warnings,
        }
    }

    /// Report for a file that could not be parsed.
    pub fn unparseable(message: impl Into<String>) -> Self {
        Self::from_failures(
            vec![Failure {
                check: Check::Parse,
                entities: vec![],
                message: message.into(),
            }],
            vec![],
        )
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn failed_checks(&self) -> BTreeSet<Check> {
        self.failures.iter().map(|f| f.check).collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.verdict {
            Verdict::Pass => writeln!(f, "verdict: pass")?,
            Verdict::Fail => writeln!(f, "verdict: fail ({} failures)", self.failures.len())?,
        }
        for failure in &self.failures {
            writeln!(f, "  {failure}")?;
        }
        for w in &self.warnings {
            writeln!(f, "  warning: {w}")?;
        }
        Ok(())
    }
}

/// Runs every graph check and collects all failures.
pub fn validate_structure(file: &StepFile) -> ValidationReport {
    validate_with_kernel(file, None)
}

/// Like [`validate_structure`]; a `Some(false)` kernel verdict adds a
/// failure, `None` leaves the graph checks to decide alone.
pub fn validate_with_kernel(file: &StepFile, kernel_valid: Option<bool>) -> ValidationReport {
    let graph = &file.data;
    let mut failures = Vec::new();
    let mut warnings = Vec::new();

    let missing = resolve_refs(file);
    if !missing.is_empty() {
        let mut entities: Vec<EntityId> = missing.iter().map(|(from, _)| *from).collect();
        entities.dedup();
        let targets: BTreeSet<String> = missing.iter().map(|(_, to)| format!("#{to}")).collect();
        failures.push(Failure {
            check: Check::ReferenceResolution,
            entities,
            message: format!(
                "{} unresolved reference(s) to {}",
                missing.len(),
                targets.into_iter().collect::<Vec<_>>().join(", ")
            ),
        });
    }

    check_shell_closure(graph, &mut failures);

    let shells: Vec<&Entity> = graph.with_keyword("CLOSED_SHELL").collect();
    let mut total_faces = 0;
    for shell in &shells {
        let uses = ShellUses::collect(shell, graph);
        total_faces += uses.faces.len();
        check_edges(shell.id, &uses, &mut failures);
        if let Some(w) = euler_warning(shell.id, &uses, graph) {
            warnings.push(w);
        }
    }

    if shells.is_empty() || total_faces < MIN_FACES {
        failures.push(Failure {
            check: Check::NonEmpty,
            entities: shells.iter().map(|s| s.id).collect(),
            message: format!(
                "{} closed shell(s) with {total_faces} face(s); need at least 1 and {MIN_FACES}",
                shells.len()
            ),
        });
    }

    if kernel_valid == Some(false) {
        failures.push(Failure {
            check: Check::KernelValidity,
            entities: vec![],
            message: "the CAD kernel reported the exported solid as invalid".into(),
        });
    }

    ValidationReport::from_failures(failures, warnings)
}

fn check_shell_closure(graph: &EntityGraph, failures: &mut Vec<Failure>) {
    let open: Vec<EntityId> = graph.with_keyword("OPEN_SHELL").map(|e| e.id).collect();
    if !open.is_empty() {
        failures.push(Failure {
            check: Check::ShellClosure,
            entities: open,
            message: "model contains open shells".into(),
        });
    }
    for solid in graph
        .iter()
        .filter(|e| e.has_keyword("MANIFOLD_SOLID_BREP") || e.has_keyword("BREP_WITH_VOIDS"))
    {
        let outer = solid
            .records()
            .iter()
            .find(|r| r.keyword == "MANIFOLD_SOLID_BREP" || r.keyword == "BREP_WITH_VOIDS")
            .and_then(|r| r.args.get(1))
            .and_then(|a| a.as_ref_id());
        let closed = outer
            .and_then(|id| graph.get(id))
            .is_some_and(|s| s.has_keyword("CLOSED_SHELL"));
        if !closed {
            failures.push(Failure {
                check: Check::ShellClosure,
                entities: vec![solid.id],
                message: "solid is not bounded by a CLOSED_SHELL".into(),
            });
        }
    }
}

/// One traversal of an edge by a face loop.
#[derive(Debug, Clone, Copy)]
struct EdgeUse {
    oriented_edge: EntityId,
    /// Direction of travel relative to the edge curve, after applying the
    /// bound and face orientation flags.
    forward: bool,
}

#[derive(Default)]
struct ShellUses {
    faces: Vec<EntityId>,
    uses: BTreeMap<EntityId, Vec<EdgeUse>>,
    has_inner_loops: bool,
}

fn record_of<'e>(entity: &'e Entity, keywords: &[&str]) -> Option<&'e Record> {
    entity
        .records()
        .iter()
        .find(|r| keywords.contains(&r.keyword.as_str()))
}

fn ref_list(rec: &Record, index: usize) -> Vec<EntityId> {
    rec.args
        .get(index)
        .and_then(|a| a.as_list())
        .map(|items| items.iter().filter_map(|a| a.as_ref_id()).collect())
        .unwrap_or_default()
}

fn flag(rec: &Record, index: usize) -> bool {
    rec.args.get(index).and_then(|a| a.as_bool()).unwrap_or(true)
}

impl ShellUses {
    /// Walks shell -> faces -> bounds -> loops -> oriented edges. Dangling
    /// references are skipped; the resolution check reports them.
    fn collect(shell: &Entity, graph: &EntityGraph) -> Self {
        let mut out = ShellUses::default();
        let Some(shell_rec) = shell.record("CLOSED_SHELL") else {
            return out;
        };
        for face_ref in ref_list(shell_rec, 1) {
            let Some(mut face) = graph.get(face_ref) else { continue };
            let mut face_forward = true;
            // ORIENTED_FACE(name, *, face_element, orientation)
            if let Some(of) = face.record("ORIENTED_FACE") {
                face_forward = flag(of, 3);
                match of.args.get(2).and_then(|a| a.as_ref_id()).and_then(|id| graph.get(id)) {
                    Some(inner) => face = inner,
                    None => continue,
                }
            }
            let Some(face_rec) = record_of(face, &["ADVANCED_FACE", "FACE_SURFACE", "FACE"]) else {
                continue;
            };
            out.faces.push(face.id);
            let bounds = ref_list(face_rec, 1);
            if bounds.len() > 1 {
                out.has_inner_loops = true;
            }
            for bound in bounds.iter().filter_map(|id| graph.get(*id)) {
                let Some(bound_rec) = record_of(bound, &["FACE_OUTER_BOUND", "FACE_BOUND"]) else {
                    continue;
                };
                let bound_forward = flag(bound_rec, 2);
                let Some(lp) = bound_rec
                    .args
                    .get(1)
                    .and_then(|a| a.as_ref_id())
                    .and_then(|id| graph.get(id))
                else {
                    continue;
                };
                let Some(loop_rec) = lp.record("EDGE_LOOP") else {
                    // Vertex and poly loops carry no edges.
                    continue;
                };
                for oe_id in ref_list(loop_rec, 1) {
                    let Some(oe) = graph.get(oe_id).and_then(|e| e.record("ORIENTED_EDGE")) else {
                        continue;
                    };
                    // ORIENTED_EDGE(name, *, *, edge_element, orientation)
                    let Some(edge) = oe.args.get(3).and_then(|a| a.as_ref_id()) else {
                        continue;
                    };
                    let forward = (flag(oe, 4) == bound_forward) == face_forward;
                    out.uses.entry(edge).or_default().push(EdgeUse {
                        oriented_edge: oe_id,
                        forward,
                    });
                }
            }
        }
        out
    }
}

fn check_edges(shell: EntityId, uses: &ShellUses, failures: &mut Vec<Failure>) {
    let mut bad_count = Vec::new();
    let mut bad_sense = Vec::new();
    for (edge, edge_uses) in &uses.uses {
        match edge_uses.as_slice() {
            [a, b] => {
                if a.forward == b.forward {
                    bad_sense.push((*edge, [a.oriented_edge, b.oriented_edge]));
                }
            }
            other => bad_count.push((*edge, other.len())),
        }
    }
    if !bad_count.is_empty() {
        let detail: Vec<String> = bad_count
            .iter()
            .map(|(e, n)| format!("#{e} used {n}x"))
            .collect();
        failures.push(Failure {
            check: Check::EdgeManifold,
            entities: bad_count.iter().map(|(e, _)| *e).collect(),
            message: format!(
                "shell #{shell}: {} edge(s) not used exactly twice ({})",
                bad_count.len(),
                detail.join(", ")
            ),
        });
    }
    if !bad_sense.is_empty() {
        failures.push(Failure {
            check: Check::OrientationConsistency,
            entities: bad_sense.iter().map(|(e, _)| *e).collect(),
            message: format!(
                "shell #{shell}: {} edge(s) traversed in the same direction by both uses",
                bad_sense.len()
            ),
        });
    }
}

/// V - E + F = 2 for a genus-0 shell whose faces have no holes.
fn euler_warning(shell: EntityId, uses: &ShellUses, graph: &EntityGraph) -> Option<String> {
    if uses.has_inner_loops || uses.faces.is_empty() {
        return None;
    }
    let mut vertices = BTreeSet::new();
    for edge in uses.uses.keys() {
        if let Some(rec) = graph.get(*edge).and_then(|e| e.record("EDGE_CURVE")) {
            vertices.extend(rec.args.iter().skip(1).take(2).filter_map(|a| a.as_ref_id()));
        }
    }
    let (v, e, f) = (vertices.len() as i64, uses.uses.len() as i64, uses.faces.len() as i64);
    let chi = v - e + f;
    (chi != 2).then(|| format!("shell #{shell}: V - E + F = {v} - {e} + {f} = {chi}, expected 2"))
}
