//! Fold aggregation and deterministic CSV/JSON emission.
//!
//! CSV numbers use nine significant digits. JSON numbers use the shortest
//! representation that parses back to the same `f64`, so a JSON report can
//! be re-read and re-aggregated without drift.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{mean_and_population_std, LayerSimilarity};
use crate::prediction::{AgreementReport, AucSummary};
use crate::sampling::SamplePlan;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no folds to aggregate")]
    NoFolds,
    #[error("fold {fold} layer grid {found:?} differs from fold 0 grid {expected:?}")]
    GridMismatch {
        fold: usize,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: invalid report JSON: {source}", path.display())]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Format implied by a `.csv` or `.json` extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        path.extension()?.to_str()?.parse().ok()
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format {other:?}, expected csv or json")),
        }
    }
}

/// Where one fold's numbers came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldProvenance {
    pub model_a: String,
    pub checkpoint_a: String,
    pub manifest_seed_a: i64,
    pub model_b: String,
    pub checkpoint_b: String,
    pub manifest_seed_b: i64,
    pub stimulus_source: String,
    pub plan: SamplePlan,
    pub trunc: f64,
}

/// One fold's layer similarities with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRun {
    pub provenance: Option<FoldProvenance>,
    pub layers: Vec<LayerSimilarity>,
}

impl From<Vec<LayerSimilarity>> for FoldRun {
    fn from(layers: Vec<LayerSimilarity>) -> Self {
        Self {
            provenance: None,
            layers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSeries {
    pub layer_name: String,
    /// Mean over folds.
    pub mean: f64,
    /// Population standard deviation over folds.
    pub std: f64,
    /// Per-fold layer similarity.
    pub folds: Vec<f64>,
    /// Per-fold dispersion over sampling repeats.
    pub repeat_std: Vec<f64>,
    pub retained_dims: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub tool_version: String,
    pub fold_count: usize,
    pub layer_grid: Vec<String>,
    pub folds: Vec<Option<FoldProvenance>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub comparison_label: String,
    pub layers: Vec<LayerSeries>,
    pub metadata: ReportMetadata,
}

/// Stacks per-fold results into per-layer series with mean and population
/// std across folds.
///
/// Statistics are summed in sorted order, so they do not depend on the
/// order of `runs`.
pub fn aggregate_folds(label: &str, runs: &[FoldRun]) -> Result<SimilarityReport, ReportError> {
    let first = runs.first().ok_or(ReportError::NoFolds)?;
    let grid: Vec<String> = first.layers.iter().map(|l| l.layer_name.clone()).collect();
    for (fold, run) in runs.iter().enumerate().skip(1) {
        let found: Vec<String> = run.layers.iter().map(|l| l.layer_name.clone()).collect();
        if found != grid {
            return Err(ReportError::GridMismatch {
                fold,
                expected: grid,
                found,
            });
        }
    }

    let layers = grid
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let folds: Vec<f64> = runs.iter().map(|r| r.layers[i].rho_mean).collect();
            let (mean, std) = order_free_stats(&folds);
            LayerSeries {
                layer_name: name.clone(),
                mean,
                std,
                folds,
                repeat_std: runs.iter().map(|r| r.layers[i].rho_std).collect(),
                retained_dims: runs.iter().map(|r| r.layers[i].retained_dims).collect(),
            }
        })
        .collect();

    Ok(SimilarityReport {
        comparison_label: label.to_owned(),
        layers,
        metadata: ReportMetadata {
            tool_version: TOOL_VERSION.to_owned(),
            fold_count: runs.len(),
            layer_grid: grid,
            folds: runs.iter().map(|r| r.provenance.clone()).collect(),
        },
    })
}

fn order_free_stats(values: &[f64]) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    mean_and_population_std(&sorted)
}

impl SimilarityReport {
    /// Recovers each fold of this report as a [`FoldRun`].
    pub fn fold_runs(&self) -> Vec<FoldRun> {
        (0..self.metadata.fold_count)
            .map(|f| FoldRun {
                provenance: self.metadata.folds.get(f).cloned().flatten(),
                layers: self
                    .layers
                    .iter()
                    .map(|l| LayerSimilarity {
                        layer_name: l.layer_name.clone(),
                        rho_mean: l.folds[f],
                        rho_std: l.repeat_std[f],
                        per_repeat: Vec::new(),
                        retained_dims: l.retained_dims[f],
                    })
                    .collect(),
            })
            .collect()
    }

    /// Concatenates the folds of several reports into one.
    pub fn stack(label: &str, reports: &[SimilarityReport]) -> Result<Self, ReportError> {
        let runs: Vec<FoldRun> = reports
            .iter()
            .flat_map(SimilarityReport::fold_runs)
            .collect();
        aggregate_folds(label, &runs)
    }

    pub fn from_json(json: &str, origin: &Path) -> Result<Self, ReportError> {
        serde_json::from_str(json).map_err(|source| ReportError::Json {
            path: origin.to_owned(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let json = fs::read_to_string(path).map_err(|source| ReportError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_json(&json, path)
    }
}

/// Nine significant digits, fixed notation for ordinary magnitudes.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0.00000000".to_owned();
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-5..9).contains(&exponent) {
        format!("{:.*}", (8 - exponent) as usize, x)
    } else {
        format!("{x:.8e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Something that can be written as a CSV table or a JSON document.
pub trait Emit: Serialize {
    fn to_csv(&self) -> String;

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

impl Emit for SimilarityReport {
    /// `layer_name, mean, std, fold_0, …, fold_{F-1}`.
    fn to_csv(&self) -> String {
        let mut out = String::from("layer_name,mean,std");
        for f in 0..self.metadata.fold_count {
            write!(out, ",fold_{f}").unwrap();
        }
        out.push('\n');
        for layer in &self.layers {
            out.push_str(&csv_field(&layer.layer_name));
            for v in [layer.mean, layer.std].iter().chain(&layer.folds) {
                write!(out, ",{}", format_sig9(*v)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

impl Emit for AgreementReport {
    fn to_csv(&self) -> String {
        let c = &self.joint_counts;
        format!(
            "model_a,model_b,n,similarity,baseline,acc_a,acc_b,both_correct,a_only,b_only,both_wrong\n\
             {},{},{},{},{},{},{},{},{},{},{}\n",
            csv_field(&self.model_a),
            csv_field(&self.model_b),
            self.n_examples,
            format_sig9(self.similarity),
            format_sig9(self.independence_baseline),
            format_sig9(self.accuracy_a),
            format_sig9(self.accuracy_b),
            c.both_correct,
            c.a_only,
            c.b_only,
            c.both_wrong
        )
    }
}

impl Emit for AucSummary {
    /// `model_id, num_classes, n, auc, auc_class_0, …`; absent classes are empty.
    fn to_csv(&self) -> String {
        let mut out = String::from("model_id,num_classes,n,auc");
        for c in 0..self.per_class.len() {
            write!(out, ",auc_class_{c}").unwrap();
        }
        write!(
            out,
            "\n{},{},{},{}",
            csv_field(&self.model_id),
            self.num_classes,
            self.n_examples,
            format_sig9(self.auc)
        )
        .unwrap();
        for v in &self.per_class {
            out.push(',');
            if let Some(v) = v {
                out.push_str(&format_sig9(*v));
            }
        }
        out.push('\n');
        out
    }
}

pub fn emit<R: Emit>(report: &R, format: Format, path: &Path) -> Result<(), ReportError> {
    fs::write(path, report.render(format)).map_err(|source| ReportError::Io {
        path: path.to_owned(),
        source,
    })
}
