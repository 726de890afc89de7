#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use regex::Regex;
use splineaug::llm::{Cassette, Completion, LlmRequest, ReplayBackend, Usage};
use splineaug::runner::{mock_directive, MockAction, MockRunner};
use splineaug::step::{Arg, EntityId};
use splineaug::{
    BatchStats, Gateway, GenerationRecord, Orchestrator, OrchestratorConfig, PromptMode, Sample, StepFile,
};

pub fn fixture_dir(kind: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(kind)
}

/// `(file name, text)` for every corpus fixture, sorted by name.
pub fn corpus() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::fs::read_dir(fixture_dir("corpus"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "step"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, std::fs::read_to_string(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_dir("corpus").join(name)).unwrap()
}

// --- text-scan oracle -----------------------------------------------------

/// Counts produced by scanning the file text with regular expressions,
/// without the parser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleCounts {
    pub f: usize,
    pub fb: usize,
    pub e: usize,
    pub eb: usize,
    pub lines: usize,
    pub beta: f64,
}

pub struct Scan {
    /// Instance id to its body text (everything after `=`, before `;`).
    pub bodies: HashMap<u64, String>,
}

impl Scan {
    pub fn new(text: &str) -> Self {
        let data_start = text.find("DATA;").expect("DATA section") + "DATA;".len();
        let data_end = data_start + text[data_start..].rfind("ENDSEC;").expect("ENDSEC");
        let data = &text[data_start..data_end];
        let stmt = Regex::new(r"(?s)#(\d+)\s*=\s*(.*?);\s*(?:\n|$)").unwrap();
        let bodies = stmt
            .captures_iter(data)
            .map(|c| (c[1].parse().unwrap(), c[2].to_string()))
            .collect();
        Scan { bodies }
    }

    pub fn keyword(&self, id: u64) -> &str {
        let body = &self.bodies[&id];
        let end = body.find('(').unwrap_or(body.len());
        body[..end].trim()
    }

    fn refs(&self, id: u64) -> Vec<u64> {
        let r = Regex::new(r"#(\d+)").unwrap();
        r.captures_iter(&self.bodies[&id]).map(|c| c[1].parse().unwrap()).collect()
    }

    /// Follows curve wrappers (surface/seam/intersection/trimmed curves)
    /// through their first reference.
    fn unwrap_curve(&self, mut id: u64) -> u64 {
        for _ in 0..16 {
            match self.keyword(id) {
                "SURFACE_CURVE" | "SEAM_CURVE" | "INTERSECTION_CURVE" | "TRIMMED_CURVE" => {
                    id = self.refs(id)[0];
                }
                _ => return id,
            }
        }
        id
    }

    pub fn counts(&self, text: &str) -> OracleCounts {
        let mut f = 0;
        let mut fb = 0;
        let mut curves = BTreeSet::new();
        for &id in self.bodies.keys() {
            match self.keyword(id) {
                "ADVANCED_FACE" | "FACE_SURFACE" => {
                    f += 1;
                    // The surface is the last reference of the face body.
                    let surf = *self.refs(id).last().unwrap();
                    if self.bodies[&surf].contains("B_SPLINE_SURFACE") {
                        fb += 1;
                    }
                }
                "EDGE_CURVE" => {
                    curves.insert(self.unwrap_curve(*self.refs(id).last().unwrap()));
                }
                _ => {}
            }
        }
        let e = curves.len();
        let eb = curves
            .iter()
            .filter(|&&c| self.bodies[&c].contains("B_SPLINE_CURVE"))
            .count();
        let lines = text.split('\n').filter(|l| !l.trim().is_empty()).count();
        let term = |b: usize, n: usize| if n == 0 { 0.0 } else { b as f64 / n as f64 };
        OracleCounts {
            f,
            fb,
            e,
            eb,
            lines,
            beta: (term(fb, f) + term(eb, e)) / 2.0,
        }
    }

    /// True when no face, surface or curve instance uses the complex form.
    pub fn geometry_is_simple(&self) -> bool {
        self.bodies.values().all(|b| {
            !b.trim_start().starts_with('(')
                || !(b.contains("SURFACE") || b.contains("CURVE") || b.contains("FACE"))
        })
    }
}

pub fn oracle(text: &str) -> OracleCounts {
    Scan::new(text).counts(text)
}

// --- graph surgery ----------------------------------------------------------

pub fn ids_with(file: &StepFile, keyword: &str) -> Vec<EntityId> {
    file.data.with_keyword(keyword).map(|e| e.id).collect()
}

pub fn max_id(file: &StepFile) -> EntityId {
    file.data.ids().max().unwrap_or(0)
}

/// Rewrites every id through `map`, keeping instance order.
pub fn renumber(file: &StepFile, map: &BTreeMap<EntityId, EntityId>) -> StepFile {
    let mut data = splineaug::EntityGraph::new();
    for e in file.data.iter() {
        let mut e = e.clone();
        e.id = map[&e.id];
        for rec in e.records_mut() {
            for a in &mut rec.args {
                a.map_refs(&mut |r| *map.get(&r).unwrap_or(&r));
            }
        }
        data.insert(e).unwrap();
    }
    StepFile::from_graph(file.header.clone(), data)
}

pub fn set_enum(arg: &mut Arg, value: &str) {
    *arg = Arg::enumeration(value);
}

// --- scripted batch -----------------------------------------------------------

pub fn ok(fixture: &str) -> String {
    mock_directive(&MockAction::Export {
        fixture: fixture.into(),
        kernel_valid: None,
    })
}

pub fn fail(msg: &str) -> String {
    mock_directive(&MockAction::ExecError(msg.into()))
}

pub fn timeout() -> String {
    mock_directive(&MockAction::Timeout)
}

/// Ten samples. Eight pass within five iterations, `s08` passes on its
/// sixth, `s10` never passes. Each list is the directive per iteration; the
/// last one repeats.
pub fn scripted_plan() -> Vec<(&'static str, Vec<String>)> {
    vec![
        ("s01", vec![ok("cube")]),
        ("s02", vec![ok("gaussian_plate")]),
        ("s03", vec![fail("NameError: name 'cq' is not defined"), ok("cube")]),
        ("s04", vec![ok("cube_missing_face"), fail("fillet failed"), ok("cube")]),
        ("s05", vec![timeout(), ok("gaussian_plate")]),
        ("s06", vec![fail("a"), fail("b"), fail("c"), ok("cube")]),
        ("s07", vec![fail("a"), ok("cube_open_shell"), fail("c"), fail("d"), ok("cube")]),
        ("s08", vec![fail("1"), fail("2"), fail("3"), fail("4"), fail("5"), ok("cube")]),
        ("s09", vec![ok("saddle_face"), ok("cube")]),
        ("s10", vec![ok("cube_missing_face")]),
    ]
}

/// Gateway calls the plan implies under an iteration cap.
pub fn scripted_calls(plan: &[(&str, Vec<String>)], cap: usize) -> usize {
    plan.iter()
        .map(|(_, steps)| {
            let first_good = steps.iter().position(|s| {
                s.ends_with(" ok cube") || s.ends_with(" ok gaussian_plate")
            });
            first_good.map_or(cap, |i| (i + 1).min(cap))
        })
        .sum()
}

pub fn scripted_samples(plan: &[(&str, Vec<String>)]) -> Vec<Sample> {
    plan.iter()
        .map(|(id, _)| Sample {
            id: id.to_string(),
            mode: PromptMode::MinusR,
            description: format!("A mounting bracket, variant {id}, with two bolt holes."),
            surface: None,
        })
        .collect()
}

pub fn scripted_backend(
    plan: &[(&str, Vec<String>)],
) -> impl Fn(&LlmRequest) -> Result<Completion, splineaug::LlmError> + Send + Sync + 'static {
    let table: HashMap<String, Vec<String>> = plan.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    move |r: &LlmRequest| {
        let (sample, k) = r.request_tag.rsplit_once('/').unwrap();
        let k: usize = k.parse().unwrap();
        let steps = &table[sample];
        let d = &steps[(k - 1).min(steps.len() - 1)];
        Ok(Completion {
            raw_text: format!("Here is the program.\n```python\nimport cadquery as cq\n{d}\n```\n"),
            usage: Usage {
                prompt_tokens: r.user_text.len() as u64 / 4,
                completion_tokens: 12,
            },
        })
    }
}

pub fn orchestrator_with(gateway: Gateway, work_root: &Path) -> Orchestrator {
    Orchestrator::new(
        Arc::new(gateway),
        Arc::new(MockRunner::new()),
        OrchestratorConfig {
            work_root: work_root.to_path_buf(),
            ..Default::default()
        },
    )
}

/// Records the scripted batch into a cassette at `path`.
pub fn record_cassette(path: &Path, work_root: &Path) -> (Vec<GenerationRecord>, BatchStats) {
    let plan = scripted_plan();
    let cassette = Arc::new(Cassette::open(path).unwrap());
    let gw = Gateway::new(Arc::new(scripted_backend(&plan))).recording_to(cassette);
    orchestrator_with(gw, work_root)
        .run_batch(&scripted_samples(&plan), 4, None)
        .unwrap()
}

/// Replays the scripted batch from the cassette at `path`.
pub fn replay(path: &Path, work_root: &Path, parallelism: usize) -> (Vec<GenerationRecord>, BatchStats) {
    let plan = scripted_plan();
    let cassette = Arc::new(Cassette::open(path).unwrap());
    let gw = Gateway::new(Arc::new(ReplayBackend::new(cassette)));
    orchestrator_with(gw, work_root)
        .run_batch(&scripted_samples(&plan), parallelism, None)
        .unwrap()
}

// --- cube mutations -------------------------------------------------------

pub fn cube() -> StepFile {
    splineaug::parse_step(&fixture("cube.step")).unwrap()
}

fn shell_faces(file: &mut StepFile) -> &mut Vec<Arg> {
    let shell = ids_with(file, "CLOSED_SHELL")[0];
    match &mut file.data.get_mut(shell).unwrap().records_mut()[0].args[1] {
        Arg::List(items) => items,
        other => panic!("shell faces: {other:?}"),
    }
}

/// Removes the first face from the closed shell, and the face itself.
pub fn delete_face(file: &mut StepFile) {
    let face = shell_faces(file).remove(0).as_ref_id().unwrap();
    file.data.remove(face);
}

/// Copies one edge curve under a fresh id and points one of its two uses
/// at the copy.
pub fn duplicate_edge(file: &mut StepFile) {
    let oe = ids_with(file, "ORIENTED_EDGE")[0];
    let ec = file.data.get(oe).unwrap().records()[0].args[3].as_ref_id().unwrap();
    let mut copy = file.data.get(ec).unwrap().clone();
    copy.id = max_id(file) + 1;
    let new_id = copy.id;
    file.data.insert(copy).unwrap();
    file.data.get_mut(oe).unwrap().records_mut()[0].args[3] = Arg::Ref(new_id);
}

/// Flips the orientation flag of one oriented edge.
pub fn flip_sense(file: &mut StepFile) {
    let oe = ids_with(file, "ORIENTED_EDGE")[0];
    let arg = &mut file.data.get_mut(oe).unwrap().records_mut()[0].args[4];
    let flipped = if arg.as_bool() == Some(true) { "F" } else { "T" };
    set_enum(arg, flipped);
}

pub fn open_shell(file: &mut StepFile) {
    let shell = ids_with(file, "CLOSED_SHELL")[0];
    file.data.get_mut(shell).unwrap().records_mut()[0].keyword = "OPEN_SHELL".into();
}

/// Points a face at a surface id that does not exist.
pub fn dangling_ref(file: &mut StepFile) {
    let face = ids_with(file, "ADVANCED_FACE")[0];
    let missing = max_id(file) + 1000;
    let rec = &mut file.data.get_mut(face).unwrap().records_mut()[0];
    rec.args[2] = Arg::Ref(missing);
}

/// Empties the shell's face list.
pub fn empty_shell(file: &mut StepFile) {
    shell_faces(file).clear();
}

pub type Mutation = fn(&mut StepFile);

/// `(name, mutation, check that must fail)`.
pub fn mutations() -> Vec<(&'static str, Mutation, splineaug::Check)> {
    use splineaug::Check;
    vec![
        ("face deleted", delete_face as Mutation, Check::EdgeManifold),
        ("edge duplicated", duplicate_edge, Check::EdgeManifold),
        ("sense flipped", flip_sense, Check::OrientationConsistency),
        ("shell opened", open_shell, Check::ShellClosure),
        ("dangling ref", dangling_ref, Check::ReferenceResolution),
        ("shell emptied", empty_shell, Check::NonEmpty),
    ]
}
