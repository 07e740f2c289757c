use std::fmt;
use std::process::ExitCode;

use repsim_core::engine::EngineError;
use repsim_core::prediction::PredictionError;
use repsim_core::report::ReportError;
use repsim_core::store::{NpyError, StoreError};
use serde_json::{json, Map, Value};

/// A failed run. Printed to stderr as one line of JSON.
#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
    context: Map<String, Value>,
    usage: bool,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: "usage",
            message: message.into(),
            context: Map::new(),
            usage: true,
        }
    }

    fn data(kind: &'static str, message: impl fmt::Display) -> Self {
        CliError {
            kind,
            message: message.to_string(),
            context: Map::new(),
            usage: false,
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.context.insert(key.to_owned(), value.into());
        self
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(if self.usage { 2 } else { 1 })
    }

    pub fn to_line(&self) -> String {
        let mut obj = Map::new();
        obj.insert("error".into(), json!(self.kind));
        obj.insert("message".into(), json!(self.message));
        obj.extend(self.context.clone());
        Value::Object(obj).to_string()
    }
}

fn store_context(mut err: CliError, e: &StoreError) -> CliError {
    match e {
        StoreError::Layer { layer, source } => {
            store_context(err.with("layer", layer.as_str()), source)
        }
        StoreError::ShapeMismatch { layer, .. } => err.with("layer", layer.as_str()),
        StoreError::NonFinite { index }
        | StoreError::Npy {
            source: NpyError::NonFinite { index },
            ..
        } => err.with("index", *index),
        StoreError::Io { path, .. } | StoreError::ManifestJson { path, .. } => {
            if !err.context.contains_key("path") {
                err = err.with("path", path.display().to_string());
            }
            err
        }
        StoreError::Npy { path, .. } => err.with("path", path.display().to_string()),
        _ => err,
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        store_context(CliError::data("store", &e), &e)
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match &e {
            EngineError::Store(inner) => store_context(CliError::data("store", &e), inner),
            EngineError::Sampling { layer, .. } | EngineError::Linalg { layer, .. } => {
                CliError::data("engine", &e).with("layer", layer.as_str())
            }
            EngineError::GridShape { layer_a, .. } => {
                CliError::data("engine", &e).with("layer", layer_a.as_str())
            }
            _ => CliError::data("engine", &e),
        }
    }
}

impl From<PredictionError> for CliError {
    fn from(e: PredictionError) -> Self {
        let err = CliError::data("prediction", &e);
        match &e {
            PredictionError::ExampleSetMismatch { example_id }
            | PredictionError::TrueLabelMismatch { example_id, .. }
            | PredictionError::DuplicateId(example_id)
            | PredictionError::LabelOutOfRange { example_id, .. }
            | PredictionError::ScoreCount { example_id, .. }
            | PredictionError::NonFiniteScore { example_id }
            | PredictionError::ArgmaxMismatch { example_id, .. } => {
                err.with("example_id", example_id.as_str())
            }
            PredictionError::Io { path, .. } => err.with("path", path.display().to_string()),
            PredictionError::Json { line, .. } => err.with("line", *line),
            _ => err,
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        let err = CliError::data("report", &e);
        match &e {
            ReportError::Io { path, .. } | ReportError::Json { path, .. } => {
                err.with("path", path.display().to_string())
            }
            _ => err,
        }
    }
}
