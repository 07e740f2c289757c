mod common;

use common::*;
use rand::Rng;
use repsim_core::engine::LayerSimilarity;
use repsim_core::prediction::prediction_similarity;
use repsim_core::report::{aggregate_folds, emit, Emit, FoldRun, Format, SimilarityReport};

fn synthetic_folds(folds: usize, layers: usize, seed: u64) -> Vec<FoldRun> {
    let mut r = rng(seed);
    (0..folds)
        .map(|_| {
            (0..layers)
                .map(|l| {
                    let per_repeat: Vec<f64> = (0..5).map(|_| r.random::<f64>()).collect();
                    LayerSimilarity {
                        layer_name: format!("block{l}"),
                        rho_mean: per_repeat.iter().sum::<f64>() / 5.0,
                        rho_std: 0.0,
                        per_repeat,
                        retained_dims: 64.0,
                    }
                })
                .collect::<Vec<_>>()
                .into()
        })
        .collect()
}

#[test]
fn five_folds_match_direct_recomputation() {
    let runs = synthetic_folds(5, 4, 41);
    let report = aggregate_folds("ImageNet-vs-FT-ImageNet", &runs).unwrap();
    for (i, layer) in report.layers.iter().enumerate() {
        let values: Vec<f64> = runs.iter().map(|r| r.layers[i].rho_mean).collect();
        let mean = values.iter().sum::<f64>() / 5.0;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((layer.mean - mean).abs() < 1e-12);
        assert!((layer.std - var.sqrt()).abs() < 1e-12);
        assert_eq!(layer.folds, values);
    }
}

#[test]
fn aggregation_ignores_fold_order() {
    let runs = synthetic_folds(5, 3, 42);
    let forward = aggregate_folds("x", &runs).unwrap();
    let mut reversed_runs = runs.clone();
    reversed_runs.reverse();
    let reversed = aggregate_folds("x", &reversed_runs).unwrap();
    for (a, b) in forward.layers.iter().zip(&reversed.layers) {
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std, b.std);
    }
}

#[test]
fn json_round_trip_and_recomputable_stats() {
    let report = aggregate_folds("x", &synthetic_folds(3, 6, 43)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    emit(&report, Format::Json, &path).unwrap();
    let back = SimilarityReport::load(&path).unwrap();
    assert_eq!(back, report);
    for layer in &back.layers {
        let mean = layer.folds.iter().sum::<f64>() / layer.folds.len() as f64;
        assert!((layer.mean - mean).abs() < 1e-12);
    }
}

#[test]
fn stacking_reports_concatenates_folds() {
    let runs = synthetic_folds(4, 2, 44);
    let whole = aggregate_folds("x", &runs).unwrap();
    let parts: Vec<_> = runs
        .chunks(2)
        .map(|c| aggregate_folds("x", c).unwrap())
        .collect();
    let stacked = SimilarityReport::stack("x", &parts).unwrap();
    assert_eq!(stacked.layers, whole.layers);
    assert_eq!(stacked.metadata.fold_count, 4);
}

#[test]
fn emission_is_byte_identical() {
    let report = aggregate_folds("x", &synthetic_folds(2, 5, 45)).unwrap();
    let (a, b) = ten_example_fixture();
    let agreement = prediction_similarity(&a, &b).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for format in [Format::Csv, Format::Json] {
        let p1 = dir.path().join("one");
        let p2 = dir.path().join("two");
        emit(&report, format, &p1).unwrap();
        emit(&report, format, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        emit(&agreement, format, &p1).unwrap();
        emit(&agreement, format, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
    assert_eq!(report.to_csv().lines().count(), 5 + 1);
}

#[test]
fn agreement_csv_schema() {
    let (a, b) = ten_example_fixture();
    let csv = prediction_similarity(&a, &b).unwrap().to_csv();
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(
        lines[0],
        "model_a,model_b,n,similarity,baseline,acc_a,acc_b,both_correct,a_only,b_only,both_wrong"
    );
    assert_eq!(
        lines[1],
        "ft-imagenet,ft-radimagenet,10,0.700000000,0.540000000,0.600000000,0.700000000,5,1,2,2"
    );
}
