mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use splineaug::llm::extract_program;
use splineaug::metrics::BRepStats;
use splineaug::prompt::{compose, repair_overhead, repair_prompt, CategoryConfig, PromptMode, RepairBudget};
use splineaug::report::{CorpusReport, FileStats};
use splineaug::step::{Arg, Entity, EntityGraph, Record};
use splineaug::surface::{make_net, sample_specs, Family, SamplingRanges, Shape, SurfaceParams};
use splineaug::{compute_stats, parse_step, serialize_step, validate_structure, StepFile};

// --- STEP ---------------------------------------------------------------

fn keyword() -> impl Strategy<Value = String> {
    "[A-Z][A-Z0-9_]{0,12}"
}

fn arg() -> impl Strategy<Value = Arg> {
    let leaf = prop_oneof![
        (-1_000_000_000i64..1_000_000_000).prop_map(Arg::integer),
        prop_oneof![
            -1e6f64..1e6,
            (-300i32..300).prop_map(|e| 1.5 * 10f64.powi(e)),
            Just(0.0),
        ]
        .prop_map(Arg::real),
        "[ -&(-\\[\\]-~']{0,12}".prop_map(Arg::String),
        "[0-3][0-9A-F]{0,8}".prop_map(Arg::Binary),
        "[A-Z][A-Z0-9_]{0,8}".prop_map(Arg::Enum),
        (1u64..60).prop_map(Arg::Ref),
        Just(Arg::Star),
        Just(Arg::Dollar),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Arg::List),
            (keyword(), inner).prop_map(|(keyword, a)| Arg::Typed {
                keyword,
                arg: Box::new(a)
            }),
        ]
    })
}

fn record() -> impl Strategy<Value = Record> {
    (keyword(), prop::collection::vec(arg(), 0..5)).prop_map(|(k, args)| Record::new(k, args))
}

fn graph() -> impl Strategy<Value = EntityGraph> {
    prop::collection::btree_map(
        1u64..10_000,
        prop_oneof![
            3 => record().prop_map(Ok),
            1 => prop::collection::vec(record(), 2..4).prop_map(Err),
        ],
        1..20,
    )
    .prop_map(|m| {
        m.into_iter()
            .map(|(id, body)| match body {
                Ok(r) => Entity::simple(id, r.keyword, r.args),
                Err(parts) => Entity::complex(id, parts),
            })
            .collect()
    })
}

fn header() -> Vec<Record> {
    parse_step(&common::fixture("cube.step")).unwrap().header
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn generated_graphs_round_trip(data in graph()) {
        let file = StepFile::from_graph(header(), data);
        let text = serialize_step(&file);
        let back = parse_step(&text).unwrap();
        prop_assert!(file.structurally_eq(&back));
        prop_assert_eq!(back.line_count, file.line_count);
        prop_assert!(back.line_count >= 1);
    }

    #[test]
    fn renumbering_keeps_stats_and_verdict(
        fixture_ix in 0usize..4,
        mutation in proptest::option::of(0usize..6),
        perm in Just((0..400u64).collect::<Vec<_>>()).prop_shuffle(),
    ) {
        let name = ["cube.step", "gaussian_plate.step", "holed_block.step", "cube_bspline_complex.step"][fixture_ix];
        let mut file = parse_step(&common::fixture(name)).unwrap();
        if let (Some(m), "cube.step") = (mutation, name) {
            (common::mutations()[m].1)(&mut file);
        }
        let ids: Vec<u64> = file.data.ids().collect();
        prop_assume!(ids.len() <= perm.len());
        let map: BTreeMap<u64, u64> = ids.iter().zip(&perm).map(|(&a, &b)| (a, 3 + 7 * b)).collect();
        let renamed = common::renumber(&file, &map);
        // Line count follows layout, which renumbering reflows.
        let key = |f: &StepFile| compute_stats(f).ok().map(|s| (s.faces, s.bspline_faces, s.curves, s.bspline_curves, s.beta));
        prop_assert_eq!(key(&file), key(&renamed));
        prop_assert_eq!(
            validate_structure(&file).failed_checks(),
            validate_structure(&renamed).failed_checks()
        );
    }

    #[test]
    fn beta_is_a_mean_of_fractions(f in 0usize..500, e in 0usize..500, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let fb = (f as f64 * a) as usize;
        let eb = (e as f64 * b) as usize;
        match BRepStats::from_counts(f, fb, e, eb, 1) {
            None => prop_assert!(f == 0 && e == 0),
            Some(s) => {
                prop_assert!((0.0..=1.0).contains(&s.beta));
                let ff = if f == 0 { 0.0 } else { fb as f64 / f as f64 };
                let ee = if e == 0 { 0.0 } else { eb as f64 / e as f64 };
                prop_assert_eq!(s.beta, (ff + ee) / 2.0);
            }
        }
    }
}

// --- surfaces -------------------------------------------------------------

fn params(shape: Shape, u: usize, span: f64) -> SurfaceParams {
    SurfaceParams { u, v: u, span, shape }
}

proptest! {
    #[test]
    fn saddle_is_antisymmetric_and_sums_to_zero(curv in 0.001f64..0.01, span in 50.0f64..300.0, u in 2usize..80) {
        let net = make_net(&params(Shape::Saddle { curvature: curv }, u, span)).unwrap();
        let mut sum = 0.0;
        for i in 0..u {
            for j in 0..u {
                prop_assert_eq!(net.points[i][j][2], -net.points[j][i][2]);
                sum += net.points[i][j][2];
            }
        }
        prop_assert!(sum.abs() <= 1e-9 * curv * span * span * (u * u) as f64);
    }

    #[test]
    fn gaussian_is_bounded_and_symmetric(h in 2.0f64..15.0, span in 50.0f64..300.0, u in 2usize..80) {
        let net = make_net(&params(Shape::Gaussian { height: h }, u, span)).unwrap();
        for i in 0..u {
            for j in 0..u {
                let z = net.points[i][j][2];
                prop_assert!(z > 0.0 && z <= h);
                prop_assert_eq!(z, net.points[j][i][2]);
                prop_assert!((z - net.points[u - 1 - i][j][2]).abs() <= 1e-12 * h);
            }
        }
        if u % 2 == 1 {
            prop_assert_eq!(net.points[u / 2][u / 2][2], h);
        }
    }

    #[test]
    fn wave_and_ripple_are_bounded(a in 1.0f64..8.0, frac in (1.0f64 / 6.0)..0.5, k in 0.1f64..0.5, d in 0.0f64..0.05, span in 50.0f64..300.0, u in 2usize..60) {
        let wave = make_net(&params(Shape::Wave { amplitude: a, wavelength: span * frac }, u, span)).unwrap();
        for row in &wave.points {
            prop_assert!(row.iter().all(|p| p[2].abs() <= a));
            // Constant along y.
            prop_assert!(row.iter().all(|p| p[2] == row[0][2]));
        }
        let ripple = make_net(&params(Shape::Ripple { amplitude: a, frequency: k, decay: d }, u, span)).unwrap();
        prop_assert!(ripple.iter().all(|p| p[2].abs() <= a));
    }

    #[test]
    fn lattice_spans_the_patch(span in 1.0f64..500.0, u in 2usize..50) {
        let net = make_net(&params(Shape::Saddle { curvature: 0.0 }, u, span)).unwrap();
        prop_assert_eq!(net.dims(), (u, u));
        prop_assert_eq!(net.points[0][0][0], -span / 2.0);
        prop_assert_eq!(net.points[u - 1][u - 1][1], span / 2.0);
    }

    #[test]
    fn seeded_draws_stay_in_range(seed in any::<u64>(), fam in 0usize..4) {
        let ranges = SamplingRanges::default();
        let family = Family::ALL[fam];
        let a = sample_specs(family, 3, seed, &ranges).unwrap();
        prop_assert_eq!(&a, &sample_specs(family, 3, seed, &ranges).unwrap());
        for spec in &a {
            let p = spec.params;
            prop_assert!(ranges.resolutions.contains(&p.u) && p.u == p.v);
            prop_assert!(p.span >= ranges.span.lo && p.span <= ranges.span.hi);
            match p.shape {
                Shape::Saddle { curvature } => prop_assert!((0.001..=0.01).contains(&curvature)),
                Shape::Gaussian { height } => prop_assert!((2.0..=15.0).contains(&height)),
                Shape::Wave { amplitude, wavelength } => {
                    prop_assert!((1.0..=8.0).contains(&amplitude));
                    prop_assert!(wavelength >= p.span / 6.0 - 1e-9 && wavelength <= p.span / 2.0 + 1e-9);
                }
                Shape::Ripple { amplitude, frequency, decay } => {
                    prop_assert!((1.0..=6.0).contains(&amplitude));
                    prop_assert!((0.1..=0.5).contains(&frequency));
                    prop_assert!((0.0..=0.05).contains(&decay));
                }
            }
            prop_assert!(spec.script_text.contains("cq.exporters.export"));
        }
    }
}

// --- prompts and extraction -------------------------------------------------

fn positions_in_order(hay: &str, needles: &[&str]) -> bool {
    let mut from = 0;
    for n in needles {
        match hay[from..].find(n) {
            Some(i) => from += i + n.len(),
            None => return false,
        }
    }
    true
}

proptest! {
    #[test]
    fn full_prompt_keeps_part_order(desc in "[A-Za-z][A-Za-z0-9 ,.]{0,80}[a-z.]", body in "[a-z0-9 =\n]{1,200}") {
        let script = format!("# reference-script-marker\n{body}");
        let cat = CategoryConfig::bracket();
        let b = compose(PromptMode::Full, &cat, &desc, Some(&script)).unwrap();
        prop_assert!(positions_in_order(&b.rendered, &[&b.prefix, &b.description, &b.context, &b.postfix, &script]));
        let rt = compose(PromptMode::MinusRt, &cat, &desc, Some(&script)).unwrap();
        prop_assert!(!rt.rendered.contains(&b.context));
        prop_assert!(!rt.rendered.contains(&script));
        prop_assert!(positions_in_order(&rt.rendered, &[&rt.prefix, &rt.description, &rt.postfix]));
    }

    #[test]
    fn repair_prompt_is_bounded(
        program in "\\PC{0,600}",
        errors in "\\PC{0,600}",
        program_bytes in 1usize..256,
        error_bytes in 1usize..256,
    ) {
        let budget = RepairBudget { error_bytes, program_bytes };
        let b = compose(PromptMode::MinusR, &CategoryConfig::bracket(), "A hinge.", None).unwrap();
        let r = repair_prompt(&b, &program, &errors, &budget);
        prop_assert!(r.rendered.len() <= b.rendered.len() + repair_overhead() + error_bytes + program_bytes);
        prop_assert!(r.rendered.starts_with(&b.rendered));
        let kept = splineaug::prompt::tail_bytes(&errors, error_bytes);
        prop_assert!(r.rendered.ends_with(kept));
        // A second repair replaces the first.
        let again = repair_prompt(&r, "x = 1", "boom", &budget);
        prop_assert_eq!(again.rendered, repair_prompt(&b, "x = 1", "boom", &budget).rendered);
    }

    #[test]
    fn fenced_body_is_recovered(body in "[a-z0-9 =()\n]{1,200}", lang in "(python|py|)") {
        let body = body.trim_matches('\n').to_string();
        prop_assume!(!body.is_empty());
        let raw = format!("Sure.\n```{lang}\n{body}\n```\nThat is all.");
        prop_assert_eq!(extract_program(&raw), body);
    }

    #[test]
    fn histogram_sums_to_one_hundred(betas in prop::collection::vec(0.0f64..=1.0, 1..200)) {
        let files = betas
            .iter()
            .enumerate()
            .map(|(i, &beta)| FileStats {
                path: format!("{i}.step").into(),
                stats: BRepStats { faces: 1, bspline_faces: 0, curves: 1, bspline_curves: 0, lines: 1, beta },
            })
            .collect();
        let r = CorpusReport::from_stats(files, vec![]);
        let total: f64 = r.histogram.iter().map(|b| b.percent).sum();
        prop_assert!((total - 100.0).abs() <= 0.01);
        prop_assert_eq!(r.histogram.iter().map(|b| b.count).sum::<usize>(), betas.len());
        prop_assert!((0.0..=1.0).contains(&r.mean_beta));
    }
}
