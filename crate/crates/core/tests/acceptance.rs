//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use splineaug::report::{analyze_corpus, emit_report};
use splineaug::surface::{emit_script, make_net, Shape, SurfaceParams};
use splineaug::{compute_stats, parse_step, serialize_step, validate_structure};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parser_round_trip() -> Outcome {
    let files = common::corpus();
    ensure(files.len() >= 20, || format!("only {} fixtures", files.len()))?;
    let start = Instant::now();
    for (name, text) in &files {
        let a = parse_step(text).map_err(|e| format!("{name}: {e}"))?;
        let b = parse_step(&serialize_step(&a)).map_err(|e| format!("{name} reparse: {e}"))?;
        ensure(a.structurally_eq(&b), || format!("{name}: graphs differ"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("{} files in {:.0?}", files.len(), elapsed))
}

fn ratio_oracle() -> Outcome {
    let files = common::corpus();
    for (name, text) in &files {
        let s = compute_stats(&parse_step(text).map_err(|e| e.to_string())?).map_err(|e| format!("{name}: {e}"))?;
        let o = common::oracle(text);
        let got = (s.faces, s.bspline_faces, s.curves, s.bspline_curves);
        let want = (o.f, o.fb, o.e, o.eb);
        ensure(got == want && s.beta == o.beta, || {
            format!("{name}: {got:?} beta {} vs oracle {want:?} beta {}", s.beta, o.beta)
        })?;
    }
    let designated = [
        ("cube_bspline_top.step", 1.0 / 12.0),
        ("cube_trimmed_edge.step", 1.0 / 24.0),
        ("gaussian_plate.step", 5.0 / 6.0),
    ];
    for (name, beta) in designated {
        let s = compute_stats(&parse_step(&common::fixture(name)).unwrap()).unwrap();
        ensure((s.beta - beta).abs() <= 1e-12, || format!("{name}: {} vs {beta}", s.beta))?;
    }
    Ok(format!("{} files match, 3 hand ratios", files.len()))
}

fn mutation_suite() -> Outcome {
    let base = validate_structure(&common::cube());
    ensure(base.passed(), || format!("cube fails: {base}"))?;
    let muts = common::mutations();
    ensure(muts.len() >= 5, || "fewer than 5 mutations".into())?;
    for (name, mutate, expected) in &muts {
        let mut file = common::cube();
        mutate(&mut file);
        let report = validate_structure(&file);
        ensure(report.failed_checks().contains(expected), || {
            format!("{name}: expected {expected:?}, got {report}")
        })?;
    }
    Ok(format!("{} mutations caught", muts.len()))
}

fn orchestrator_exactness() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cassette = dir.path().join("scripted.jsonl");
    common::record_cassette(&cassette, &dir.path().join("record"));
    let run = || {
        let (records, stats) = common::replay(&cassette, &dir.path().join("replay"), 4);
        let bytes = serde_json::to_vec(&(&records, &stats)).unwrap();
        (stats, bytes)
    };
    let (stats, first) = run();
    let (_, second) = run();
    let calls = common::scripted_calls(&common::scripted_plan(), 8);
    ensure(stats.n == 10, || format!("n = {}", stats.n))?;
    ensure(stats.acceptance_rate == 0.9, || format!("acceptance {}", stats.acceptance_rate))?;
    ensure(stats.exceeded_five == 2 && stats.exceeded_five_rate == 0.2, || {
        format!("exceeded_5 {} ({})", stats.exceeded_five, stats.exceeded_five_rate)
    })?;
    ensure(stats.exhausted == 1, || format!("exhausted {}", stats.exhausted))?;
    ensure(stats.gateway_calls == calls, || format!("calls {} vs scripted {calls}", stats.gateway_calls))?;
    ensure(stats.to_string().contains("exceeded_5: 20.0%"), || "summary line".into())?;
    ensure(first == second, || "replays differ".into())?;
    Ok(format!("90% accepted, 20% exceeded_5, {calls} calls, replays identical"))
}

fn surface_math() -> Outcome {
    let gauss = Shape::Gaussian { height: 7.0 };
    ensure(gauss.height(0.0, 0.0, 50.0) == 7.0, || "gaussian center".into())?;
    let odd = SurfaceParams { u: 301, v: 301, span: 50.0, shape: gauss };
    let net = make_net(&odd).map_err(|e| e.to_string())?;
    ensure(net.points[150][150][2] == 7.0, || "gaussian lattice center".into())?;

    let (curv, span, n) = (0.004, 50.0, 300usize);
    let saddle = SurfaceParams { u: n, v: n, span, shape: Shape::Saddle { curvature: curv } };
    let sum: f64 = make_net(&saddle).map_err(|e| e.to_string())?.iter().map(|p| p[2]).sum();
    let tol = 1e-9 * curv * span * span * (n * n) as f64;
    ensure(sum.abs() <= tol, || format!("saddle sum {sum} > {tol}"))?;
    let corner = saddle.shape.height(25.0, 0.0, span);
    ensure((corner - 2.5).abs() <= 1e-12, || format!("saddle (25, 0) = {corner}"))?;
    ensure(emit_script(&saddle).contains("U, V, SPAN, CURV = 300, 300, 50, 0.004"), || {
        "saddle script constants".into()
    })?;
    Ok(format!("center 7, sum {sum:.1e}, corner {corner}"))
}

fn report_shape() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let report = analyze_corpus(&common::fixture_dir("corpus")).map_err(|e| e.to_string())?;
    let [txt, _, hist] = emit_report(&report, dir.path()).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(txt).unwrap();
    let labels = [
        "avg. #lines (STEP)",
        "avg. #faces",
        "avg. #curves",
        "w/ B-Spline faces",
        "w/ B-Spline curves",
        "B-Spline Ratio",
    ];
    for label in labels {
        ensure(text.lines().any(|l| l.starts_with(label)), || format!("missing row {label:?}"))?;
    }
    let mut rdr = csv::Reader::from_path(hist).map_err(|e| e.to_string())?;
    let percents: Vec<f64> = rdr
        .records()
        .map(|r| r.unwrap()[3].parse::<f64>().unwrap())
        .collect();
    ensure(percents.len() == 10, || format!("{} bins", percents.len()))?;
    let total: f64 = percents.iter().sum();
    ensure((total - 100.0).abs() <= 0.01, || format!("bins sum to {total}"))?;
    Ok(format!("n = {}, 6 rows, 10 bins sum {total:.4}", report.n))
}

fn main() {
    let criteria: [Criterion; 6] = [
        ("parser round-trip", parser_round_trip),
        ("B-spline ratio oracle", ratio_oracle),
        ("topology mutations", mutation_suite),
        ("orchestrator exactness", orchestrator_exactness),
        ("surface math", surface_math),
        ("report shape", report_shape),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL {name}: panicked");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
