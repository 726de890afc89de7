//! The generate, execute, validate, repair loop.
//!
//! Each sample gets a composed prompt. Every iteration asks the gateway for
//! a program, runs it, parses the exported STEP file and checks its
//! topology. Any failure feeds its error text into the next prompt, until
//! an iteration passes or the iteration cap is reached.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{Gateway, LlmRequest, ReasoningEffort, Usage};
use crate::prompt::{compose, repair_prompt, CategoryConfig, PromptBundle, PromptError, PromptMode, RepairBudget};
use crate::runner::{ExecRequest, ExecStatus, Runner};
use crate::step::parse_step;
use crate::surface::{sample_specs, Family, SamplingRanges, SurfaceError, SurfaceSpec};
use crate::topology::{validate_with_kernel, ValidationReport};

/// Iteration count above which a record is flagged `exceeded_five`.
pub const EXCEEDED_THRESHOLD: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrchestratorConfig {
    pub max_iterations: usize,
    pub timeout_s: f64,
    pub want_kernel_check: bool,
    pub model_id: String,
    pub reasoning_effort: ReasoningEffort,
    pub max_output_tokens: u32,
    pub system_text: String,
    pub category: CategoryConfig,
    pub budget: RepairBudget,
    /// Runner working directories go under `<work_root>/<sample_id>/iter_<k>`.
    pub work_root: PathBuf,
}

impl Default for OrchestratorConfig {
    fn default() -> Self {
        OrchestratorConfig {
            max_iterations: 8,
            timeout_s: 120.0,
            want_kernel_check: true,
            model_id: "o3-2025-04-16".into(),
            reasoning_effort: ReasoningEffort::High,
            max_output_tokens: 32_768,
            system_text: String::new(),
            category: CategoryConfig::bracket(),
            budget: RepairBudget::default(),
            work_root: PathBuf::from("work"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub mode: PromptMode,
    pub description: String,
    pub surface: Option<SurfaceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecOutcome {
    Ok {
        step_path: PathBuf,
        stl_path: Option<PathBuf>,
        kernel_valid: Option<bool>,
    },
    ExecError {
        stderr_tail: String,
    },
    Timeout,
    /// Nothing was executed because the gateway or the runner itself
    /// failed. Only ever the last iteration of a hard failure.
    Unavailable {
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum IterationVerdict {
    Pass,
    Fail(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationOutcome {
    pub program_text: String,
    pub exec_result: ExecOutcome,
    /// Present exactly when `exec_result` is `Ok`.
    pub structure_report: Option<ValidationReport>,
    pub verdict: IterationVerdict,
    pub usage: Usage,
}

impl IterationOutcome {
    pub fn passed(&self) -> bool {
        self.verdict == IterationVerdict::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FinalStatus {
    Accepted,
    ExhaustedRetries,
    HardFailure,
}

impl FinalStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            FinalStatus::Accepted => "Accepted",
            FinalStatus::ExhaustedRetries => "ExhaustedRetries",
            FinalStatus::HardFailure => "HardFailure",
        }
    }
}

impl fmt::Display for FinalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Artifacts {
    pub program_path: Option<PathBuf>,
    pub step_path: Option<PathBuf>,
    pub stl_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub sample_id: String,
    pub mode: PromptMode,
    pub family: Option<Family>,
    pub surface_params: Option<BTreeMap<String, f64>>,
    pub prompt: PromptBundle,
    pub iterations: Vec<IterationOutcome>,
    pub final_status: FinalStatus,
    pub iteration_count: usize,
    pub exceeded_five: bool,
    pub artifacts: Artifacts,
}

impl GenerationRecord {
    pub fn accepted(&self) -> bool {
        self.final_status == FinalStatus::Accepted
    }

    /// Why the last iteration could not be evaluated, for hard failures.
    pub fn unavailable_reason(&self) -> Option<&str> {
        match &self.iterations.last()?.exec_result {
            ExecOutcome::Unavailable { reason } => Some(reason),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchStats {
    pub n: usize,
    pub accepted: usize,
    pub exhausted: usize,
    pub hard_failures: usize,
    pub acceptance_rate: f64,
    /// Records with more than five iterations, any final status.
    pub exceeded_five: usize,
    pub exceeded_five_rate: f64,
    /// The same cut restricted to accepted records.
    pub accepted_exceeded_five: usize,
    pub accepted_exceeded_five_rate: f64,
    pub gateway_calls: usize,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl BatchStats {
    pub fn from_records(records: &[GenerationRecord]) -> Self {
        let count = |f: &dyn Fn(&GenerationRecord) -> bool| records.iter().filter(|r| f(r)).count();
        let n = records.len();
        let accepted = count(&|r| r.accepted());
        let exceeded_five = count(&|r| r.exceeded_five);
        let accepted_exceeded_five = count(&|r| r.accepted() && r.exceeded_five);
        let usage = records.iter().flat_map(|r| &r.iterations).map(|i| i.usage);
        let (prompt_tokens, completion_tokens) = usage.fold((0, 0), |(p, c), u| {
            (p + u.prompt_tokens, c + u.completion_tokens)
        });
        BatchStats {
            n,
            accepted,
            exhausted: count(&|r| r.final_status == FinalStatus::ExhaustedRetries),
            hard_failures: count(&|r| r.final_status == FinalStatus::HardFailure),
            acceptance_rate: ratio(accepted, n),
            exceeded_five,
            exceeded_five_rate: ratio(exceeded_five, n),
            accepted_exceeded_five,
            accepted_exceeded_five_rate: ratio(accepted_exceeded_five, accepted),
            gateway_calls: records.iter().map(|r| r.iteration_count).sum(),
            prompt_tokens,
            completion_tokens,
        }
    }
}

impl fmt::Display for BatchStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "samples: {}", self.n)?;
        writeln!(f, "accepted: {} ({:.1}%)", self.accepted, 100.0 * self.acceptance_rate)?;
        writeln!(f, "exhausted_retries: {}", self.exhausted)?;
        writeln!(f, "hard_failures: {}", self.hard_failures)?;
        writeln!(f, "exceeded_5: {:.1}%", 100.0 * self.exceeded_five_rate)?;
        writeln!(f, "exceeded_5_accepted: {:.1}%", 100.0 * self.accepted_exceeded_five_rate)?;
        writeln!(f, "gateway_calls: {}", self.gateway_calls)?;
        write!(f, "tokens: {} prompt, {} completion", self.prompt_tokens, self.completion_tokens)
    }
}

#[derive(Debug, Error)]
pub enum OrchestratorError {
    #[error("sample {sample_id}: {source}")]
    Prompt {
        sample_id: String,
        #[source]
        source: PromptError,
    },
    #[error("duplicate sample id {0:?}")]
    DuplicateSample(String),
    #[error("max_iterations must be at least 1")]
    NoIterations,
    #[error("batch has no samples")]
    EmptyBatch,
}

/// Reads a descriptions file: one design per line, either plain text or a
/// JSON object `{"id": ..., "description": ...}`. Blank lines and lines
/// starting with `#` are skipped. Plain lines get ids `d0001`, `d0002`, ...
/// by line position among the kept lines.
pub fn parse_descriptions(text: &str) -> Result<Vec<(String, String)>, String> {
    #[derive(Deserialize)]
    struct Entry {
        id: Option<String>,
        description: String,
    }
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let index = out.len() + 1;
        if line.starts_with('{') {
            let e: Entry = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", n + 1))?;
            out.push((e.id.unwrap_or_else(|| format!("d{index:04}")), e.description));
        } else {
            out.push((format!("d{index:04}"), line.to_string()));
        }
    }
    Ok(out)
}

/// Turns descriptions into samples. In full mode, sample `i` gets a
/// reference surface of family `families[i % len]` drawn with seed
/// `seed + i`, so any prefix of a batch gets the same surfaces.
pub fn make_samples(
    entries: &[(String, String)],
    mode: PromptMode,
    families: &[Family],
    seed: u64,
    ranges: &SamplingRanges,
) -> Result<Vec<Sample>, SurfaceError> {
    entries
        .iter()
        .enumerate()
        .map(|(i, (id, description))| {
            let surface = match (mode, families.is_empty()) {
                (PromptMode::Full, true) => {
                    return Err(SurfaceError::BadParams("full mode needs at least one surface family".into()))
                }
                (PromptMode::Full, false) => {
                    let family = families[i % families.len()];
                    let mut specs = sample_specs(family, 1, seed.wrapping_add(i as u64), ranges)?;
                    specs.pop()
                }
                _ => None,
            };
            Ok(Sample {
                id: id.clone(),
                mode,
                description: description.clone(),
                surface,
            })
        })
        .collect()
}

pub struct Orchestrator {
    gateway: Arc<Gateway>,
    runner: Arc<dyn Runner>,
    config: OrchestratorConfig,
}

/// Error text fed back to the model after a failed iteration.
fn failure_text(outcome: &IterationOutcome) -> String {
    match (&outcome.exec_result, &outcome.structure_report) {
        (ExecOutcome::ExecError { stderr_tail }, _) => stderr_tail.clone(),
        (ExecOutcome::Timeout, _) => "The program did not finish before the time limit.".into(),
        (ExecOutcome::Ok { .. }, Some(report)) => format!("The exported B-rep failed structure validation.\n{report}"),
        (_, _) => match &outcome.verdict {
            IterationVerdict::Fail(reason) => reason.clone(),
            IterationVerdict::Pass => String::new(),
        },
    }
}

impl Orchestrator {
    pub fn new(gateway: Arc<Gateway>, runner: Arc<dyn Runner>, config: OrchestratorConfig) -> Self {
        Orchestrator {
            gateway,
            runner,
            config,
        }
    }

    pub fn config(&self) -> &OrchestratorConfig {
        &self.config
    }

    pub fn prompt_for(&self, sample: &Sample) -> Result<PromptBundle, OrchestratorError> {
        compose(
            sample.mode,
            &self.config.category,
            &sample.description,
            sample.surface.as_ref().map(|s| s.script_text.as_str()),
        )
        .map_err(|source| OrchestratorError::Prompt {
            sample_id: sample.id.clone(),
            source,
        })
    }

    fn workdir(&self, sample_id: &str, iteration: usize) -> PathBuf {
        self.config.work_root.join(sample_id).join(format!("iter_{iteration}"))
    }

    /// Runs one program and validates what it exported.
    fn evaluate(&self, program: &str, workdir: &Path) -> Result<IterationOutcome, String> {
        let request = ExecRequest {
            program_text: program.to_string(),
            timeout_s: self.config.timeout_s,
            workdir: workdir.to_path_buf(),
            want_kernel_check: self.config.want_kernel_check,
        };
        let result = self.runner.execute(&request).map_err(|e| e.to_string())?;
        let outcome = |exec_result, verdict| IterationOutcome {
            program_text: program.to_string(),
            exec_result,
            structure_report: None,
            verdict,
            usage: Usage::default(),
        };
        let step_path = match (result.status, result.step_path) {
            (ExecStatus::Ok, Some(p)) => p,
            (ExecStatus::Ok, None) => {
                let msg = "The program ran but exported no STEP file.".to_string();
                return Ok(outcome(ExecOutcome::ExecError { stderr_tail: msg.clone() }, IterationVerdict::Fail(msg)));
            }
            (ExecStatus::Timeout, _) => {
                return Ok(outcome(ExecOutcome::Timeout, IterationVerdict::Fail("timeout".into())));
            }
            (ExecStatus::ExecError, _) | (ExecStatus::ProtocolError, _) => {
                let tail = result.stderr_tail;
                return Ok(outcome(
                    ExecOutcome::ExecError { stderr_tail: tail },
                    IterationVerdict::Fail("execution failed".into()),
                ));
            }
        };
        let kernel_valid = if self.config.want_kernel_check { result.kernel_valid } else { None };
        let report = match std::fs::read_to_string(&step_path) {
            Err(e) => ValidationReport::unparseable(format!("cannot read {}: {e}", step_path.display())),
            Ok(text) => match parse_step(&text) {
                Ok(file) => validate_with_kernel(&file, kernel_valid),
                Err(e) => ValidationReport::unparseable(e.to_string()),
            },
        };
        let verdict = if report.passed() {
            IterationVerdict::Pass
        } else {
            let checks: Vec<&str> = report.failed_checks().into_iter().map(|c| c.as_str()).collect();
            IterationVerdict::Fail(format!("structure validation failed: {}", checks.join(", ")))
        };
        Ok(IterationOutcome {
            program_text: program.to_string(),
            exec_result: ExecOutcome::Ok {
                step_path,
                stl_path: result.stl_path,
                kernel_valid,
            },
            structure_report: Some(report),
            verdict,
            usage: Usage::default(),
        })
    }

    pub fn run_sample(&self, sample: &Sample) -> Result<GenerationRecord, OrchestratorError> {
        if self.config.max_iterations == 0 {
            return Err(OrchestratorError::NoIterations);
        }
        let base = self.prompt_for(sample)?;
        let mut prompt = base.clone();
        let mut iterations: Vec<IterationOutcome> = Vec::new();
        let mut final_status = FinalStatus::ExhaustedRetries;
        for k in 1..=self.config.max_iterations {
            let request = LlmRequest {
                model_id: self.config.model_id.clone(),
                system_text: self.config.system_text.clone(),
                user_text: prompt.rendered.clone(),
                reasoning_effort: self.config.reasoning_effort,
                max_output_tokens: self.config.max_output_tokens,
                request_tag: format!("{}/{k}", sample.id),
            };
            let response = match self.gateway.generate(&request) {
                Ok(r) => r,
                Err(e) => {
                    log::error!("{}: gateway failed: {e}", request.request_tag);
                    let reason = format!("gateway: {e}");
                    iterations.push(IterationOutcome {
                        program_text: String::new(),
                        exec_result: ExecOutcome::Unavailable { reason: reason.clone() },
                        structure_report: None,
                        verdict: IterationVerdict::Fail(reason),
                        usage: Usage::default(),
                    });
                    final_status = FinalStatus::HardFailure;
                    break;
                }
            };
            let mut outcome = if response.is_empty_program() {
                let msg = "The reply contained no program.".to_string();
                IterationOutcome {
                    program_text: String::new(),
                    exec_result: ExecOutcome::ExecError { stderr_tail: msg.clone() },
                    structure_report: None,
                    verdict: IterationVerdict::Fail(msg),
                    usage: Usage::default(),
                }
            } else {
                match self.evaluate(&response.program_text, &self.workdir(&sample.id, k)) {
                    Ok(o) => o,
                    Err(reason) => {
                        log::error!("{}: runner failed: {reason}", request.request_tag);
                        let reason = format!("runner: {reason}");
                        iterations.push(IterationOutcome {
                            program_text: response.program_text,
                            exec_result: ExecOutcome::Unavailable { reason: reason.clone() },
                            structure_report: None,
                            verdict: IterationVerdict::Fail(reason),
                            usage: response.usage,
                        });
                        final_status = FinalStatus::HardFailure;
                        break;
                    }
                }
            };
            outcome.usage = response.usage;
            log::info!(
                "{}: {}",
                request.request_tag,
                match &outcome.verdict {
                    IterationVerdict::Pass => "pass",
                    IterationVerdict::Fail(r) => r.as_str(),
                }
            );
            let passed = outcome.passed();
            if !passed {
                prompt = repair_prompt(&base, &outcome.program_text, &failure_text(&outcome), &self.config.budget);
            }
            iterations.push(outcome);
            if passed {
                final_status = FinalStatus::Accepted;
                break;
            }
        }

        let mut artifacts = Artifacts::default();
        if final_status == FinalStatus::Accepted {
            let k = iterations.len();
            let dir = self.workdir(&sample.id, k);
            let program_path = dir.join("program.py");
            if std::fs::create_dir_all(&dir)
                .and_then(|_| std::fs::write(&program_path, &iterations[k - 1].program_text))
                .is_ok()
            {
                artifacts.program_path = Some(program_path);
            }
            if let ExecOutcome::Ok { step_path, stl_path, .. } = &iterations[k - 1].exec_result {
                artifacts.step_path = Some(step_path.clone());
                artifacts.stl_path = stl_path.clone();
            }
        }
        let iteration_count = iterations.len();
        Ok(GenerationRecord {
            sample_id: sample.id.clone(),
            mode: sample.mode,
            family: sample.surface.as_ref().map(|s| s.family()),
            surface_params: sample.surface.as_ref().map(|s| s.params.to_map()),
            prompt: base,
            iterations,
            final_status,
            iteration_count,
            exceeded_five: iteration_count > EXCEEDED_THRESHOLD,
            artifacts,
        })
    }

    /// Runs every sample with up to `parallelism` in flight. Records come
    /// back in input order whatever the completion order. `on_record` is
    /// called once per finished record, from worker threads, one at a time.
    pub fn run_batch(
        &self,
        samples: &[Sample],
        parallelism: usize,
        on_record: Option<&(dyn Fn(&GenerationRecord) + Sync)>,
    ) -> Result<(Vec<GenerationRecord>, BatchStats), OrchestratorError> {
        if samples.is_empty() {
            return Err(OrchestratorError::EmptyBatch);
        }
        if self.config.max_iterations == 0 {
            return Err(OrchestratorError::NoIterations);
        }
        let mut seen = std::collections::HashSet::new();
        for s in samples {
            if !seen.insert(s.id.as_str()) {
                return Err(OrchestratorError::DuplicateSample(s.id.clone()));
            }
            self.prompt_for(s)?;
        }
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<Option<GenerationRecord>>> = samples.iter().map(|_| Mutex::new(None)).collect();
        let sink_lock = Mutex::new(());
        std::thread::scope(|scope| {
            for _ in 0..parallelism.clamp(1, samples.len()) {
                scope.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(sample) = samples.get(i) else { break };
                    let record = self.run_sample(sample).expect("prompts checked before the batch");
                    if let Some(cb) = on_record {
                        let _guard = sink_lock.lock().unwrap_or_else(|e| e.into_inner());
                        cb(&record);
                    }
                    *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(record);
                });
            }
        });
        let records: Vec<GenerationRecord> = slots
            .into_iter()
            .map(|m| m.into_inner().unwrap_or_else(|e| e.into_inner()).expect("every slot filled"))
            .collect();
        let stats = BatchStats::from_records(&records);
        Ok((records, stats))
    }
}
