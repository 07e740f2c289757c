//! Agreement of per-example mistakes between two classifiers.
//!
//! Two models agree on an example when both classify it correctly or both
//! misclassify it. The observed agreement rate is compared with the rate
//! expected if their mistakes were independent given their accuracies.

mod auc;
mod dump;

pub use auc::{auc_binary, auc_summary, AucSummary};
pub use dump::{format_predictions, parse_predictions, read_predictions, write_predictions};

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("prediction dump has no header line")]
    MissingHeader,
    #[error("num_classes must be at least 1")]
    NoClasses,
    #[error("duplicate example_id {0:?}")]
    DuplicateId(String),
    #[error("example {example_id:?}: label {label} outside [0, {num_classes})")]
    LabelOutOfRange {
        example_id: String,
        label: i64,
        num_classes: usize,
    },
    #[error("example {example_id:?}: {got} scores for {expected} classes")]
    ScoreCount {
        example_id: String,
        expected: usize,
        got: usize,
    },
    #[error("example {example_id:?}: non-finite score")]
    NonFiniteScore { example_id: String },
    #[error("example {example_id:?}: predicted label {pred} but scores argmax is {argmax}")]
    ArgmaxMismatch {
        example_id: String,
        pred: usize,
        argmax: usize,
    },
    #[error("prediction sets contain no examples")]
    Empty,
    #[error("example sets differ: {example_id:?} appears in only one dump")]
    ExampleSetMismatch { example_id: String },
    #[error("example {example_id:?}: true labels disagree ({a} vs {b})")]
    TrueLabelMismatch {
        example_id: String,
        a: usize,
        b: usize,
    },
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("non-finite score at index {0}")]
    NonFiniteValue(usize),
    #[error("AUC needs both positive and negative examples")]
    SingleClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub example_id: String,
    pub true_label: usize,
    pub predicted_label: usize,
    pub scores: Vec<f64>,
}

/// One model's predictions on a test set, sorted by `example_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    model_id: String,
    num_classes: usize,
    records: Vec<PredictionRecord>,
}

/// Index of the largest score, ties to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl PredictionSet {
    pub fn new(
        model_id: impl Into<String>,
        num_classes: usize,
        mut records: Vec<PredictionRecord>,
    ) -> Result<Self, PredictionError> {
        if num_classes == 0 {
            return Err(PredictionError::NoClasses);
        }
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.example_id.as_str()) {
                return Err(PredictionError::DuplicateId(r.example_id.clone()));
            }
            for label in [r.true_label, r.predicted_label] {
                if label >= num_classes {
                    return Err(PredictionError::LabelOutOfRange {
                        example_id: r.example_id.clone(),
                        label: label as i64,
                        num_classes,
                    });
                }
            }
            if r.scores.len() != num_classes {
                return Err(PredictionError::ScoreCount {
                    example_id: r.example_id.clone(),
                    expected: num_classes,
                    got: r.scores.len(),
                });
            }
            if r.scores.iter().any(|s| !s.is_finite()) {
                return Err(PredictionError::NonFiniteScore {
                    example_id: r.example_id.clone(),
                });
            }
            let best = argmax(&r.scores);
            if best != r.predicted_label {
                return Err(PredictionError::ArgmaxMismatch {
                    example_id: r.example_id.clone(),
                    pred: r.predicted_label,
                    argmax: best,
                });
            }
        }
        records.sort_by(|a, b| a.example_id.cmp(&b.example_id));
        Ok(Self {
            model_id: model_id.into(),
            num_classes,
            records,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn records(&self) -> &[PredictionRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn accuracy(&self) -> f64 {
        let correct = self
            .records
            .iter()
            .filter(|r| r.true_label == r.predicted_label)
            .count();
        correct as f64 / self.records.len() as f64
    }
}

/// `true` where the prediction is wrong, in `example_id` order.
pub fn mistake_vector(p: &PredictionSet) -> Vec<bool> {
    p.records
        .iter()
        .map(|r| r.predicted_label != r.true_label)
        .collect()
}

/// Expected agreement of two classifiers whose mistakes are independent.
pub fn independence_baseline(acc_a: f64, acc_b: f64) -> f64 {
    acc_a * acc_b + (1.0 - acc_a) * (1.0 - acc_b)
}

/// Per-example outcome counts; "only" means only that model was correct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JointCounts {
    pub both_correct: usize,
    pub a_only: usize,
    pub b_only: usize,
    pub both_wrong: usize,
}

impl JointCounts {
    pub fn total(&self) -> usize {
        self.both_correct + self.a_only + self.b_only + self.both_wrong
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub model_a: String,
    pub model_b: String,
    pub n_examples: usize,
    pub similarity: f64,
    pub independence_baseline: f64,
    pub accuracy_a: f64,
    pub accuracy_b: f64,
    pub joint_counts: JointCounts,
}

/// Probability that the two models' mistake indicators agree.
pub fn prediction_similarity(
    a: &PredictionSet,
    b: &PredictionSet,
) -> Result<AgreementReport, PredictionError> {
    if let Some(example_id) = first_unshared_id(a, b) {
        return Err(PredictionError::ExampleSetMismatch { example_id });
    }
    if a.is_empty() {
        return Err(PredictionError::Empty);
    }
    let mut counts = JointCounts {
        both_correct: 0,
        a_only: 0,
        b_only: 0,
        both_wrong: 0,
    };
    for (ra, rb) in a.records.iter().zip(&b.records) {
        if ra.true_label != rb.true_label {
            return Err(PredictionError::TrueLabelMismatch {
                example_id: ra.example_id.clone(),
                a: ra.true_label,
                b: rb.true_label,
            });
        }
        let ok_a = ra.predicted_label == ra.true_label;
        let ok_b = rb.predicted_label == rb.true_label;
        match (ok_a, ok_b) {
            (true, true) => counts.both_correct += 1,
            (true, false) => counts.a_only += 1,
            (false, true) => counts.b_only += 1,
            (false, false) => counts.both_wrong += 1,
        }
    }
    let n = counts.total() as f64;
    let accuracy_a = (counts.both_correct + counts.a_only) as f64 / n;
    let accuracy_b = (counts.both_correct + counts.b_only) as f64 / n;
    Ok(AgreementReport {
        model_a: a.model_id.clone(),
        model_b: b.model_id.clone(),
        n_examples: counts.total(),
        similarity: (counts.both_correct + counts.both_wrong) as f64 / n,
        independence_baseline: independence_baseline(accuracy_a, accuracy_b),
        accuracy_a,
        accuracy_b,
        joint_counts: counts,
    })
}

/// Smallest example id present in exactly one of the sets.
fn first_unshared_id(a: &PredictionSet, b: &PredictionSet) -> Option<String> {
    let (mut i, mut j) = (0, 0);
    let (ra, rb) = (&a.records, &b.records);
    while i < ra.len() && j < rb.len() {
        match ra[i].example_id.cmp(&rb[j].example_id) {
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => return Some(ra[i].example_id.clone()),
            std::cmp::Ordering::Greater => return Some(rb[j].example_id.clone()),
        }
    }
    ra.get(i).or(rb.get(j)).map(|r| r.example_id.clone())
}
