//! JSON Lines prediction dumps: a header line followed by one record per example.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::prediction::{PredictionError, PredictionRecord, PredictionSet};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model_id: String,
    num_classes: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRecord {
    example_id: String,
    #[serde(rename = "true")]
    true_label: i64,
    #[serde(rename = "pred")]
    predicted_label: i64,
    scores: Vec<f64>,
}

pub fn read_predictions(path: &Path) -> Result<PredictionSet, PredictionError> {
    let text = fs::read_to_string(path).map_err(|source| PredictionError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_predictions(&text)
}

pub fn parse_predictions(text: &str) -> Result<PredictionSet, PredictionError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, first) = lines.next().ok_or(PredictionError::MissingHeader)?;
    let header: Header =
        serde_json::from_str(first).map_err(|source| PredictionError::Json { line, source })?;

    let mut records = Vec::new();
    for (line, raw) in lines {
        let wire: WireRecord =
            serde_json::from_str(raw).map_err(|source| PredictionError::Json { line, source })?;
        let label = |v: i64| {
            usize::try_from(v)
                .ok()
                .filter(|&l| l < header.num_classes)
                .ok_or_else(|| PredictionError::LabelOutOfRange {
                    example_id: wire.example_id.clone(),
                    label: v,
                    num_classes: header.num_classes,
                })
        };
        records.push(PredictionRecord {
            true_label: label(wire.true_label)?,
            predicted_label: label(wire.predicted_label)?,
            example_id: wire.example_id,
            scores: wire.scores,
        });
    }
    PredictionSet::new(header.model_id, header.num_classes, records)
}

pub fn format_predictions(set: &PredictionSet) -> String {
    let mut out = String::new();
    let header = Header {
        model_id: set.model_id().to_owned(),
        num_classes: set.num_classes(),
    };
    writeln!(
        out,
        "{}",
        serde_json::to_string(&header).expect("header serializes")
    )
    .unwrap();
    for r in set.records() {
        let wire = WireRecord {
            example_id: r.example_id.clone(),
            true_label: r.true_label as i64,
            predicted_label: r.predicted_label as i64,
            scores: r.scores.clone(),
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string(&wire).expect("record serializes")
        )
        .unwrap();
    }
    out
}

pub fn write_predictions(set: &PredictionSet, path: &Path) -> Result<(), PredictionError> {
    fs::write(path, format_predictions(set)).map_err(|source| PredictionError::Io {
        path: path.to_owned(),
        source,
    })
}
