use serde::{Deserialize, Serialize};

use crate::prediction::{PredictionError, PredictionSet};
use crate::scalar::Real;

/// Area under the ROC curve as the Mann-Whitney probability that a random
/// positive scores above a random negative, ties counting one half.
///
/// Counts are accumulated in half-pair units as integers, so the result is
/// the exact ratio `wins / (positives · negatives)` rounded once.
pub fn auc_binary<T: Real>(scores: &[T], labels: &[bool]) -> Result<f64, PredictionError> {
    if scores.len() != labels.len() {
        return Err(PredictionError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(PredictionError::NonFiniteValue(i));
    }
    let positives = labels.iter().filter(|&&l| l).count() as u128;
    let negatives = labels.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(PredictionError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    let mut half_wins: u128 = 0;
    let mut negatives_below: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let pos = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        let neg = (end - start) as u128 - pos;
        half_wins += 2 * pos * negatives_below + pos * neg;
        negatives_below += neg;
        start = end;
    }
    Ok(half_wins as f64 / (2 * positives * negatives) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucSummary {
    pub model_id: String,
    pub num_classes: usize,
    pub n_examples: usize,
    /// Binary AUC for two classes, macro one-vs-rest otherwise.
    pub auc: f64,
    /// One-vs-rest AUC per class; `None` where the class is absent or the
    /// only class present.
    pub per_class: Vec<Option<f64>>,
}

/// AUC of a prediction set: the positive-class score for binary problems,
/// macro-averaged one-vs-rest over evaluable classes otherwise.
pub fn auc_summary(set: &PredictionSet) -> Result<AucSummary, PredictionError> {
    let records = set.records();
    if records.is_empty() {
        return Err(PredictionError::Empty);
    }
    let per_class: Vec<Option<f64>> = (0..set.num_classes())
        .map(|c| {
            let scores: Vec<f64> = records.iter().map(|r| r.scores[c]).collect();
            let labels: Vec<bool> = records.iter().map(|r| r.true_label == c).collect();
            auc_binary(&scores, &labels).ok()
        })
        .collect();

    let auc = if set.num_classes() == 2 {
        per_class[1].ok_or(PredictionError::SingleClass)?
    } else {
        let evaluable: Vec<f64> = per_class.iter().flatten().copied().collect();
        if evaluable.is_empty() {
            return Err(PredictionError::SingleClass);
        }
        evaluable.iter().sum::<f64>() / evaluable.len() as f64
    };
    Ok(AucSummary {
        model_id: set.model_id().to_owned(),
        num_classes: set.num_classes(),
        n_examples: records.len(),
        auc,
        per_class,
    })
}
