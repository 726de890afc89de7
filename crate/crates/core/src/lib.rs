//! Organic CAD data augmentation: STEP parsing and B-rep statistics,
//! topology validation, reference-surface programs, prompt composition,
//! an LLM gateway with cassette replay, and the generate/execute/validate
//! loop that ties them together.

pub mod config;
pub mod llm;
pub mod metrics;
pub mod orchestrator;
pub mod prompt;
pub mod report;
pub mod runner;
pub mod step;
pub mod surface;
pub mod topology;

pub use config::PipelineConfig;
pub use llm::{Cassette, Gateway, LlmBackend, LlmError, LlmRequest, LlmResponse, ReasoningEffort};
pub use metrics::{compute_stats, BRepStats, MetricsError};
pub use orchestrator::{
    BatchStats, FinalStatus, GenerationRecord, IterationOutcome, Orchestrator, OrchestratorConfig, Sample,
};
pub use prompt::{compose, repair_prompt, CategoryConfig, PromptBundle, PromptMode};
pub use report::{analyze_corpus, emit_report, CorpusReport, RunStore};
pub use runner::{ExecRequest, ExecResult, ExecStatus, MockRunner, Runner, RunnerError, SubprocessRunner};
pub use step::{parse_step, serialize_step, Entity, EntityGraph, StepError, StepFile};
pub use surface::{Family, SurfaceParams, SurfaceSpec};
pub use topology::{validate_structure, validate_with_kernel, Check, ValidationReport};
