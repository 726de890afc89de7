//! Corpus statistics and run artifacts.
//!
//! [`analyze_corpus`] folds per-file [`BRepStats`] over a directory tree
//! into a [`CorpusReport`]; [`emit_report`] writes it as text, CSV and a
//! histogram table. [`RunStore`] lays out generation runs on disk and keeps
//! the append-only manifest.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use crate::metrics::{compute_stats, BRepStats};
use crate::orchestrator::{BatchStats, GenerationRecord};
use crate::prompt::PromptMode;
use crate::step::parse_step;

pub const HISTOGRAM_BINS: usize = 10;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no parseable STEP files under {dir} ({skipped} skipped)")]
    EmptyCorpus { dir: PathBuf, skipped: usize },
    #[error("sample {0:?} is already in the manifest")]
    DuplicateSample(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileStats {
    /// Path relative to the analyzed directory.
    pub path: PathBuf,
    pub stats: BRepStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub n: usize,
    pub avg_lines: f64,
    pub avg_faces: f64,
    pub avg_curves: f64,
    pub pct_with_bspline_faces: f64,
    pub pct_with_bspline_curves: f64,
    pub mean_beta: f64,
    pub histogram: Vec<HistogramBin>,
    /// Sorted by path.
    pub files: Vec<FileStats>,
    /// Sorted by path.
    pub skipped: Vec<SkippedFile>,
}

/// Bin of `beta` among `bins` equal bins on [0, 1]: left-closed, with 1.0
/// in the last bin.
pub fn bin_index(beta: f64, bins: usize) -> usize {
    ((beta * bins as f64).floor() as usize).min(bins - 1)
}

fn percent(count: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * count as f64 / n as f64
    }
}

impl CorpusReport {
    /// Aggregates per-file stats. Files are sorted by path first so the
    /// result does not depend on input order.
    pub fn from_stats(mut files: Vec<FileStats>, mut skipped: Vec<SkippedFile>) -> Self {
        files.sort_by(|a, b| a.path.cmp(&b.path));
        skipped.sort_by(|a, b| a.path.cmp(&b.path));
        let n = files.len();
        let mean = |f: &dyn Fn(&BRepStats) -> f64| {
            if n == 0 {
                0.0
            } else {
                files.iter().map(|x| f(&x.stats)).sum::<f64>() / n as f64
            }
        };
        let mut counts = [0usize; HISTOGRAM_BINS];
        for f in &files {
            counts[bin_index(f.stats.beta, HISTOGRAM_BINS)] += 1;
        }
        let histogram = counts
            .iter()
            .enumerate()
            .map(|(i, &count)| HistogramBin {
                lo: i as f64 / HISTOGRAM_BINS as f64,
                hi: (i + 1) as f64 / HISTOGRAM_BINS as f64,
                count,
                percent: percent(count, n),
            })
            .collect();
        CorpusReport {
            n,
            avg_lines: mean(&|s| s.lines as f64),
            avg_faces: mean(&|s| s.faces as f64),
            avg_curves: mean(&|s| s.curves as f64),
            pct_with_bspline_faces: percent(files.iter().filter(|f| f.stats.bspline_faces >= 1).count(), n),
            pct_with_bspline_curves: percent(files.iter().filter(|f| f.stats.bspline_curves >= 1).count(), n),
            mean_beta: mean(&|s| s.beta),
            histogram,
            files,
            skipped,
        }
    }

    /// The six comparison rows, in table order.
    pub fn metric_rows(&self) -> [(&'static str, f64); 6] {
        [
            ("avg. #lines (STEP)", self.avg_lines),
            ("avg. #faces", self.avg_faces),
            ("avg. #curves", self.avg_curves),
            ("w/ B-Spline faces", self.pct_with_bspline_faces),
            ("w/ B-Spline curves", self.pct_with_bspline_curves),
            ("B-Spline Ratio", self.mean_beta),
        ]
    }
}

fn is_step(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("step") || e.eq_ignore_ascii_case("stp"))
}

fn is_hidden(entry: &walkdir::DirEntry) -> bool {
    entry.depth() > 0 && entry.file_name().to_str().is_some_and(|s| s.starts_with('.'))
}

/// Recursively collects `.step`/`.stp` files, skipping hidden directories.
pub fn find_step_files(dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut out = Vec::new();
    for entry in WalkDir::new(dir).into_iter().filter_entry(|e| !is_hidden(e)) {
        let entry = entry.map_err(|e| ReportError::Io {
            path: e.path().unwrap_or(dir).to_path_buf(),
            source: e.into_io_error().unwrap_or_else(|| std::io::Error::other("directory loop")),
        })?;
        if entry.file_type().is_file() && is_step(entry.path()) {
            out.push(entry.into_path());
        }
    }
    out.sort();
    Ok(out)
}

pub fn file_stats(path: &Path) -> Result<BRepStats, String> {
    let bytes = std::fs::read(path).map_err(|e| e.to_string())?;
    let text = String::from_utf8_lossy(&bytes);
    let file = parse_step(&text).map_err(|e| e.to_string())?;
    compute_stats(&file).map_err(|e| e.to_string())
}

/// Parses every STEP file under `dir`. Files that fail to parse or have no
/// faces and no curves are listed in `skipped`.
pub fn analyze_corpus(dir: &Path) -> Result<CorpusReport, ReportError> {
    let paths = find_step_files(dir)?;
    let results: Vec<(PathBuf, Result<BRepStats, String>)> = paths
        .par_iter()
        .map(|p| {
            let rel = p.strip_prefix(dir).unwrap_or(p).to_path_buf();
            (rel, file_stats(p))
        })
        .collect();
    let mut files = Vec::new();
    let mut skipped = Vec::new();
    for (path, r) in results {
        match r {
            Ok(stats) => files.push(FileStats { path, stats }),
            Err(reason) => {
                log::warn!("skipping {}: {reason}", path.display());
                skipped.push(SkippedFile { path, reason });
            }
        }
    }
    if files.is_empty() {
        return Err(ReportError::EmptyCorpus {
            dir: dir.to_path_buf(),
            skipped: skipped.len(),
        });
    }
    Ok(CorpusReport::from_stats(files, skipped))
}

pub fn render_text(report: &CorpusReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<22}{}", "n", report.n);
    for (name, value) in report.metric_rows() {
        let cell = match name {
            "w/ B-Spline faces" | "w/ B-Spline curves" => format!("{value:.2}%"),
            "B-Spline Ratio" => format!("{value:.4}"),
            _ => format!("{value:.2}"),
        };
        let _ = writeln!(s, "{name:<22}{cell}");
    }
    s
}

fn csv_bytes(rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn render_csv(report: &CorpusReport) -> Vec<u8> {
    let mut rows = vec![
        vec!["metric".to_string(), "value".to_string()],
        vec!["n".to_string(), report.n.to_string()],
    ];
    for (name, value) in report.metric_rows() {
        rows.push(vec![name.to_string(), value.to_string()]);
    }
    rows.push(vec!["skipped".to_string(), report.skipped.len().to_string()]);
    csv_bytes(&rows)
}

pub fn render_histogram(report: &CorpusReport) -> Vec<u8> {
    let mut rows = vec![vec!["bin_start", "bin_end", "count", "percent"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>()];
    for b in &report.histogram {
        rows.push(vec![
            format!("{:.1}", b.lo),
            format!("{:.1}", b.hi),
            b.count.to_string(),
            format!("{:.4}", b.percent),
        ]);
    }
    csv_bytes(&rows)
}

/// Writes `report.txt`, `report.csv` and `hist.csv` into `out_dir` and
/// returns their paths.
pub fn emit_report(report: &CorpusReport, out_dir: &Path) -> Result<[PathBuf; 3], ReportError> {
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let files = [
        (out_dir.join("report.txt"), render_text(report).into_bytes()),
        (out_dir.join("report.csv"), render_csv(report)),
        (out_dir.join("hist.csv"), render_histogram(report)),
    ];
    for (path, bytes) in &files {
        std::fs::write(path, bytes).map_err(io_err(path))?;
    }
    let [(a, _), (b, _), (c, _)] = files;
    Ok([a, b, c])
}

// --- run store ------------------------------------------------------------

/// One manifest line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub sample_id: String,
    pub mode: PromptMode,
    pub family: Option<String>,
    pub params: Option<std::collections::BTreeMap<String, f64>>,
    pub status: String,
    pub iterations: usize,
    pub beta: Option<f64>,
    pub f: Option<usize>,
    pub fb: Option<usize>,
    pub e: Option<usize>,
    pub eb: Option<usize>,
    pub lines: Option<usize>,
    /// Empty unless the record was accepted.
    pub step_path: String,
    pub stl_path: String,
}

struct StoreState {
    manifest: File,
    seen: HashSet<String>,
}

/// Artifacts of one run under `<runs_dir>/<run_id>/`: a directory per
/// sample plus `manifest.jsonl` and `config.toml`. Appends are serialized.
pub struct RunStore {
    root: PathBuf,
    manifest_path: PathBuf,
    state: Mutex<StoreState>,
}

impl RunStore {
    /// Opens the run directory, creating it if needed. An existing
    /// manifest is kept and its sample ids count as already persisted.
    pub fn open(runs_dir: &Path, run_id: &str, config_snapshot: &str) -> Result<Self, ReportError> {
        let root = runs_dir.join(run_id);
        std::fs::create_dir_all(&root).map_err(io_err(&root))?;
        let config_path = root.join("config.toml");
        std::fs::write(&config_path, config_snapshot).map_err(io_err(&config_path))?;
        let manifest_path = root.join("manifest.jsonl");
        let mut seen = HashSet::new();
        if manifest_path.exists() {
            for row in read_manifest(&manifest_path)? {
                seen.insert(row.sample_id);
            }
        }
        let manifest = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&manifest_path)
            .map_err(io_err(&manifest_path))?;
        Ok(RunStore {
            root,
            manifest_path,
            state: Mutex::new(StoreState { manifest, seen }),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest_path(&self) -> &Path {
        &self.manifest_path
    }

    /// Writes the record's artifacts and appends its manifest row.
    pub fn persist_record(&self, record: &GenerationRecord) -> Result<ManifestRow, ReportError> {
        let mut state = self.state.lock().unwrap_or_else(|e| e.into_inner());
        if state.seen.contains(&record.sample_id) {
            return Err(ReportError::DuplicateSample(record.sample_id.clone()));
        }
        let dir = self.root.join(&record.sample_id);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for (k, it) in record.iterations.iter().enumerate() {
            let p = dir.join(format!("iter_{}.py", k + 1));
            std::fs::write(&p, &it.program_text).map_err(io_err(&p))?;
        }
        let record_path = dir.join("record.json");
        let json = serde_json::to_vec_pretty(record).expect("record serializes");
        std::fs::write(&record_path, json).map_err(io_err(&record_path))?;

        let mut step_path = String::new();
        let mut stl_path = String::new();
        let mut stats = None;
        if record.accepted() {
            if let Some(src) = &record.artifacts.step_path {
                let dst = dir.join("output.step");
                std::fs::copy(src, &dst).map_err(io_err(src))?;
                stats = file_stats(&dst).ok();
                step_path = dst.to_string_lossy().into_owned();
            }
            if let Some(src) = &record.artifacts.stl_path {
                let dst = dir.join("output.stl");
                std::fs::copy(src, &dst).map_err(io_err(src))?;
                stl_path = dst.to_string_lossy().into_owned();
            }
        }
        let row = ManifestRow {
            sample_id: record.sample_id.clone(),
            mode: record.mode,
            family: record.family.map(|f| f.name().to_string()),
            params: record.surface_params.clone(),
            status: record.final_status.to_string(),
            iterations: record.iteration_count,
            beta: stats.map(|s: BRepStats| s.beta),
            f: stats.map(|s| s.faces),
            fb: stats.map(|s| s.bspline_faces),
            e: stats.map(|s| s.curves),
            eb: stats.map(|s| s.bspline_curves),
            lines: stats.map(|s| s.lines),
            step_path,
            stl_path,
        };
        let mut line = serde_json::to_string(&row).expect("row serializes");
        line.push('\n');
        state
            .manifest
            .write_all(line.as_bytes())
            .and_then(|_| state.manifest.flush())
            .map_err(io_err(&self.manifest_path))?;
        state.seen.insert(record.sample_id.clone());
        Ok(row)
    }

    /// Writes `summary.txt` (batch statistics) and `summary.csv` (one row
    /// per manifest line).
    pub fn write_summary(&self, stats: &BatchStats) -> Result<(), ReportError> {
        let txt = self.root.join("summary.txt");
        std::fs::write(&txt, format!("{stats}\n")).map_err(io_err(&txt))?;
        let rows = read_manifest(&self.manifest_path)?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        let mut table = vec![["sample_id", "mode", "family", "status", "iterations", "beta", "f", "fb", "e", "eb", "lines", "step_path"]
            .map(String::from)
            .to_vec()];
        for r in rows {
            table.push(vec![
                r.sample_id,
                r.mode.to_string(),
                opt(r.family),
                r.status,
                r.iterations.to_string(),
                opt(r.beta.map(|b| b.to_string())),
                opt(r.f.map(|v| v.to_string())),
                opt(r.fb.map(|v| v.to_string())),
                opt(r.e.map(|v| v.to_string())),
                opt(r.eb.map(|v| v.to_string())),
                opt(r.lines.map(|v| v.to_string())),
                r.step_path,
            ]);
        }
        let csv_path = self.root.join("summary.csv");
        std::fs::write(&csv_path, csv_bytes(&table)).map_err(io_err(&csv_path))
    }
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>, ReportError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut rows = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| ReportError::Manifest {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", n + 1),
        })?);
    }
    Ok(rows)
}
