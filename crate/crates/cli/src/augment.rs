use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use sha2::{Digest, Sha256};
use splineaug::llm::{HttpBackend, ReplayBackend};
use splineaug::orchestrator::{make_samples, parse_descriptions};
use splineaug::report::RunStore;
use splineaug::{
    BatchStats, Cassette, CategoryConfig, Family, Gateway, GenerationRecord, LlmBackend, MockRunner, Orchestrator,
    PipelineConfig, Runner, SubprocessRunner,
};

use crate::{fail, AugmentArgs, BackendKind, CmdResult, GlobalArgs, OrExit, RunnerKind};

fn effective_config(global: &GlobalArgs, args: &AugmentArgs) -> Result<PipelineConfig, crate::Failure> {
    let mut config = global.load_config()?;
    if let Some(path) = &args.category {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read category config {}", path.display()))
            .usage()?;
        let category: CategoryConfig = category_from_toml(&text)
            .with_context(|| format!("invalid category config {}", path.display()))
            .usage()?;
        config.prompt_engine.category = category;
    }
    if let Some(n) = args.parallelism {
        config.generation_orchestrator.parallelism = n;
    }
    if let Some(n) = args.max_iterations {
        config.generation_orchestrator.max_iterations = n;
    }
    if let Some(out) = &args.out {
        config.dataset_reporter.runs_dir = out.clone();
    }
    if config.generation_orchestrator.max_iterations == 0 || config.generation_orchestrator.parallelism == 0 {
        return Err(fail(2, anyhow!("max_iterations and parallelism must be at least 1")));
    }
    Ok(config)
}

/// Parses a category file as the `[prompt_engine.category]` table.
fn category_from_toml(text: &str) -> anyhow::Result<CategoryConfig> {
    let wrapped = format!("[prompt_engine.category]\n{text}");
    Ok(PipelineConfig::from_toml(&wrapped, &[])?.prompt_engine.category)
}

fn default_run_id(descriptions: &str, families: &[Family], args: &AugmentArgs, snapshot: &str) -> String {
    let mut h = Sha256::new();
    for part in [descriptions, args.mode.as_str(), &args.seed.to_string(), snapshot] {
        h.update(part.as_bytes());
        h.update([0]);
    }
    for f in families {
        h.update(f.name().as_bytes());
    }
    format!("run-{}", &hex::encode(h.finalize())[..12])
}

fn backend(args: &AugmentArgs, config: &PipelineConfig) -> Result<Gateway, crate::Failure> {
    let gateway = match args.backend {
        BackendKind::Replay => {
            let path = args
                .cassette
                .as_ref()
                .ok_or_else(|| fail(2, anyhow!("--backend replay needs --cassette")))?;
            if !path.is_file() {
                return Err(fail(2, anyhow!("cassette {} does not exist", path.display())));
            }
            let cassette = Arc::new(Cassette::open(path).usage()?);
            Gateway::new(Arc::new(ReplayBackend::new(cassette)) as Arc<dyn LlmBackend>)
        }
        BackendKind::Live => {
            let http = HttpBackend::from_env(config.llm_gateway.http.clone()).env()?;
            let gw = Gateway::new(Arc::new(http) as Arc<dyn LlmBackend>);
            match &args.cassette {
                Some(path) => gw.recording_to(Arc::new(Cassette::open(path).env()?)),
                None => gw,
            }
        }
    };
    Ok(gateway.max_in_flight(config.llm_gateway.max_in_flight.max(1)))
}

fn runner(kind: RunnerKind, config: &PipelineConfig) -> Arc<dyn Runner> {
    match kind {
        RunnerKind::Mock => Arc::new(MockRunner::new()),
        RunnerKind::Subprocess => Arc::new(SubprocessRunner::new(config.cad_runner.clone())),
    }
}

fn exit_for(records: &[GenerationRecord], stats: &BatchStats) -> CmdResult {
    if stats.accepted > 0 {
        return Ok(ExitCode::SUCCESS);
    }
    let unreachable = records
        .iter()
        .filter_map(GenerationRecord::unavailable_reason)
        .find(|r| r.contains("runner unreachable"));
    match unreachable {
        Some(reason) => Err(fail(3, anyhow!("{reason}"))),
        None => Ok(ExitCode::from(1)),
    }
}

pub fn run(global: &GlobalArgs, args: &AugmentArgs) -> CmdResult {
    let config = effective_config(global, args)?;
    let text = std::fs::read_to_string(&args.descriptions)
        .with_context(|| format!("cannot read descriptions {}", args.descriptions.display()))
        .usage()?;
    let entries = parse_descriptions(&text)
        .map_err(|e| anyhow!("{}: {e}", args.descriptions.display()))
        .usage()?;
    if entries.is_empty() {
        return Err(fail(2, anyhow!("{} has no descriptions", args.descriptions.display())));
    }
    let families = if args.family.is_empty() {
        Family::ALL.to_vec()
    } else {
        args.family.clone()
    };
    let samples = make_samples(&entries, args.mode, &families, args.seed, &config.surface_catalog.ranges).usage()?;

    let snapshot = config.to_toml();
    let run_id = match &args.run_id {
        Some(id) => id.clone(),
        None => default_run_id(&text, &families, args, &snapshot),
    };
    let runs_dir = &config.dataset_reporter.runs_dir;
    let manifest = runs_dir.join(&run_id).join("manifest.jsonl");
    if manifest.metadata().is_ok_and(|m| m.len() > 0) {
        return Err(fail(2, anyhow!("run {run_id} already exists under {}; pass another --run-id", runs_dir.display())));
    }

    let gateway = backend(args, &config)?;
    let store = RunStore::open(runs_dir, &run_id, &snapshot).env()?;
    let work_root: PathBuf = store.root().join(".work");
    let orchestrator = Orchestrator::new(
        Arc::new(gateway),
        runner(args.runner, &config),
        config.orchestrator_config(work_root.clone()),
    );

    let progress = |r: &GenerationRecord| {
        log::info!("{}: {} after {} iteration(s)", r.sample_id, r.final_status, r.iteration_count);
    };
    let (records, stats) = orchestrator
        .run_batch(&samples, config.generation_orchestrator.parallelism, Some(&progress))
        .usage()?;
    for r in &records {
        store.persist_record(r).env()?;
    }
    store.write_summary(&stats).env()?;
    if let Err(e) = std::fs::remove_dir_all(&work_root) {
        log::debug!("leaving {}: {e}", work_root.display());
    }

    println!("{stats}");
    println!("run: {}", store.root().display());
    exit_for(&records, &stats)
}
