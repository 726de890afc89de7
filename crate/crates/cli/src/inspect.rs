use std::process::ExitCode;

use anyhow::Context;
use splineaug::report::{render_text, ReportError};
use splineaug::runner::serve;
use splineaug::{analyze_corpus, emit_report, parse_step, validate_structure, MockRunner, ValidationReport};

use crate::{fail, AnalyzeArgs, CmdResult, OrExit, ValidateArgs};

pub fn analyze(args: &AnalyzeArgs) -> CmdResult {
    let report = match analyze_corpus(&args.step_dir) {
        Ok(r) => r,
        Err(e @ (ReportError::EmptyCorpus { .. } | ReportError::Io { .. })) => return Err(fail(2, e)),
        Err(e) => return Err(fail(1, e)),
    };
    for s in &report.skipped {
        log::warn!("skipped {}: {}", s.path.display(), s.reason);
    }
    let written = emit_report(&report, &args.out).env()?;
    print!("{}", render_text(&report));
    println!("skipped: {}", report.skipped.len());
    for p in written {
        log::info!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

pub fn validate(args: &ValidateArgs) -> CmdResult {
    let text = std::fs::read_to_string(&args.step_file)
        .with_context(|| format!("cannot read {}", args.step_file.display()))
        .usage()?;
    let report = match parse_step(&text) {
        Ok(file) => validate_structure(&file),
        Err(e) => ValidationReport::unparseable(e.to_string()),
    };
    print!("{report}");
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

pub fn mock_runner() -> CmdResult {
    let stdin = std::io::stdin();
    serve(&MockRunner::new(), stdin.lock(), std::io::stdout().lock()).env()?;
    Ok(ExitCode::SUCCESS)
}
