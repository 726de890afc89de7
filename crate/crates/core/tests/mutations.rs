mod common;

use common::{cube, mutations};
use splineaug::{parse_step, serialize_step, validate_structure, validate_with_kernel, Check};

#[test]
fn cube_passes() {
    let report = validate_structure(&cube());
    assert!(report.passed(), "{report}");
    assert!(report.warnings.is_empty());
}

#[test]
fn each_mutation_fails_its_check() {
    for (name, mutate, check) in mutations() {
        let mut file = cube();
        mutate(&mut file);
        let report = validate_structure(&file);
        assert!(!report.passed(), "{name}");
        assert!(report.failed_checks().contains(&check), "{name}: {report}");
        assert!(report.to_string().contains(check.as_str()), "{name}");
    }
}

#[test]
fn mutations_survive_serialization() {
    // The verdict must come from the file content, not parser state.
    for (name, mutate, check) in mutations() {
        let mut file = cube();
        mutate(&mut file);
        let reparsed = parse_step(&serialize_step(&file)).unwrap();
        assert!(validate_structure(&reparsed).failed_checks().contains(&check), "{name}");
    }
}

#[test]
fn flipped_sense_names_the_edge() {
    let mut file = cube();
    common::flip_sense(&mut file);
    let report = validate_structure(&file);
    let failure = report
        .failures
        .iter()
        .find(|f| f.check == Check::OrientationConsistency)
        .unwrap();
    assert!(!failure.entities.is_empty());
    for id in &failure.entities {
        assert!(file.data.contains(*id));
    }
}

#[test]
fn face_deletion_reports_every_open_edge() {
    let mut file = cube();
    common::delete_face(&mut file);
    let report = validate_structure(&file);
    let open: Vec<_> = report
        .failures
        .iter()
        .filter(|f| f.check == Check::EdgeManifold)
        .flat_map(|f| f.entities.iter())
        .collect();
    // A square face has four edges, each now used once.
    assert_eq!(open.len(), 4, "{report}");
}

#[test]
fn kernel_flag() {
    let file = cube();
    assert!(validate_with_kernel(&file, Some(true)).passed());
    assert!(validate_with_kernel(&file, None).passed());
    let bad = validate_with_kernel(&file, Some(false));
    assert_eq!(bad.failed_checks().into_iter().collect::<Vec<_>>(), [Check::KernelValidity]);
}

#[test]
fn mutations_leave_cube_stats_sane() {
    // Graph damage other than a dangling geometry ref must not stop metrics.
    for (name, mutate, _) in mutations() {
        if name == "dangling ref" {
            continue;
        }
        let mut file = cube();
        mutate(&mut file);
        let _ = splineaug::compute_stats(&file);
    }
}
