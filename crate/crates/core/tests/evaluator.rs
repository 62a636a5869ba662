mod common;

use common::{brute_auroc, brute_fpr, rng};
use oodkit::evaluator::{build_report, parse_csv, render_report, EvalCell, Format, ReportMeta};
use oodkit::{auroc, fpr_at_tpr, EvalReport};
use proptest::prelude::*;
use rand::Rng;

fn tied_scores(r: &mut impl Rng, n: usize) -> Vec<f64> {
    // small integer grid forces many ties
    (0..n).map(|_| r.gen_range(0..20) as f64 * 0.25).collect()
}

#[test]
fn auroc_matches_pairwise_oracle_with_ties() {
    let mut r = rng(1);
    for _ in 0..50 {
        let (a, b) = (r.gen_range(1..300), r.gen_range(1..300));
        let id = tied_scores(&mut r, a);
        let ood = tied_scores(&mut r, b);
        assert!((auroc(&id, &ood).unwrap() - brute_auroc(&id, &ood)).abs() <= 1e-12);
    }
}

#[test]
fn fpr_matches_threshold_sweep() {
    let mut r = rng(2);
    for _ in 0..100 {
        let (a, b) = (r.gen_range(1..200), r.gen_range(1..200));
        let id = tied_scores(&mut r, a);
        let ood: Vec<f64> = (0..b).map(|_| r.gen_range(-1.0..4.0)).collect();
        for tpr in [0.5, 0.9, 0.95, 1.0] {
            assert_eq!(
                fpr_at_tpr(&id, &ood, tpr).unwrap(),
                brute_fpr(&id, &ood, tpr)
            );
        }
    }
}

#[test]
fn anchors() {
    assert_eq!(auroc(&[1.0, 2.0], &[0.0]).unwrap(), 1.0);
    assert_eq!(auroc(&[3.0; 7], &[3.0; 4]).unwrap(), 0.5);
    assert_eq!(fpr_at_tpr(&[5.0, 6.0], &[1.0, 2.0], 0.95).unwrap(), 0.0);
}

#[test]
fn identical_multisets_give_tpr_quantized_fpr() {
    let s: Vec<f64> = (0..100).map(f64::from).collect();
    assert_eq!(fpr_at_tpr(&s, &s, 0.95).unwrap(), 0.95);
}

#[test]
fn empty_inputs_are_errors() {
    assert!(auroc(&[], &[1.0]).is_err());
    assert!(auroc(&[1.0], &[]).is_err());
    assert!(fpr_at_tpr(&[1.0], &[1.0], 0.0).is_err());
}

proptest! {
    #[test]
    fn affine_invariance(id in prop::collection::vec(-1e3f64..1e3, 1..60),
                         ood in prop::collection::vec(-1e3f64..1e3, 1..60)) {
        let f = |v: &[f64]| v.iter().map(|s| 2.0 * s + 1.0).collect::<Vec<_>>();
        prop_assert_eq!(auroc(&id, &ood).unwrap(), auroc(&f(&id), &f(&ood)).unwrap());
    }

    #[test]
    fn complement_symmetry_and_bounds(id in prop::collection::vec(0i32..10, 1..80),
                                      ood in prop::collection::vec(0i32..10, 1..80)) {
        let id: Vec<f64> = id.into_iter().map(f64::from).collect();
        let ood: Vec<f64> = ood.into_iter().map(f64::from).collect();
        let a = auroc(&id, &ood).unwrap();
        let b = auroc(&ood, &id).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((a + b - 1.0).abs() <= 1e-15);
        prop_assert!((a - brute_auroc(&id, &ood)).abs() <= 1e-12);
    }
}

fn cell(method: &str, split: &str, auroc: f64) -> EvalCell {
    EvalCell {
        method: method.into(),
        ood_split: split.into(),
        auroc,
        fpr95: 0.25,
        n_id: 10,
        n_ood: 8,
    }
}

fn meta() -> ReportMeta {
    ReportMeta {
        dataset: "toy".into(),
        id_accuracy: Some(0.875),
        failures: Vec::new(),
        config: serde_json::json!({"seed": 3}),
    }
}

#[test]
fn text_report_marks_column_maximum() {
    let report = build_report(
        vec![cell("MSP", "far", 0.5), cell("KNN", "far", 0.93)],
        meta(),
    )
    .unwrap();
    let text = String::from_utf8(render_report(&report, Format::Text).unwrap()).unwrap();
    assert!(text.contains("50.00"), "{text}");
    assert!(text.contains("93.00*"), "{text}");
    assert!(!text.contains("50.00*"), "{text}");
}

#[test]
fn duplicate_cells_are_rejected() {
    assert!(build_report(
        vec![cell("MSP", "far", 0.5), cell("MSP", "far", 0.6)],
        meta()
    )
    .is_err());
}

#[test]
fn json_and_csv_round_trip() {
    let report = build_report(
        vec![
            cell("MSP", "far", 0.1 + 0.2),
            cell("KNN", "near", 1.0 / 3.0),
        ],
        meta(),
    )
    .unwrap();
    let json = render_report(&report, Format::Json).unwrap();
    let back: EvalReport = serde_json::from_slice(&json).unwrap();
    assert_eq!(back, report);
    let csv = render_report(&report, Format::Csv).unwrap();
    assert_eq!(parse_csv(&csv).unwrap(), report.cells);
    assert!(String::from_utf8(csv)
        .unwrap()
        .starts_with("method,ood_split,auroc,fpr95,n_id,n_ood\n"));
}
