//! Layer-wise CCA similarity between two checkpoints.
//!
//! A layer's similarity is the mean canonical correlation between the two
//! networks' sampled activations, averaged over the plan's sampling repeats.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{cca, LinalgError};
use crate::sampling::{sample_pair_with_streams, ChannelStream, SamplePlan, SamplingError};
use crate::store::{Activations, Manifest, StoreError, TensorShape};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("layer {layer:?}: {source}")]
    Sampling {
        layer: String,
        source: SamplingError,
    },
    #[error("layer {layer:?}: {source}")]
    Linalg { layer: String, source: LinalgError },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Plan(SamplingError),
    #[error("truncation {0} outside [0, 1)")]
    InvalidTruncation(f64),
    #[error("layer grids differ in length: {a} vs {b}")]
    GridLength { a: usize, b: usize },
    #[error("layer {index} ({layer_a:?} vs {layer_b:?}): shapes {a} and {b} are not comparable")]
    GridShape {
        index: usize,
        layer_a: String,
        layer_b: String,
        a: TensorShape,
        b: TensorShape,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSimilarity {
    pub layer_name: String,
    pub rho_mean: f64,
    /// Population standard deviation over sampling repeats.
    pub rho_std: f64,
    pub per_repeat: Vec<f64>,
    /// Mean number of retained canonical directions over repeats.
    pub retained_dims: f64,
}

impl LayerSimilarity {
    fn from_repeats(layer_name: String, per_repeat: Vec<f64>, dims: &[usize]) -> Self {
        let (rho_mean, rho_std) = mean_and_population_std(&per_repeat);
        let retained_dims = dims.iter().sum::<usize>() as f64 / dims.len() as f64;
        Self {
            layer_name,
            rho_mean,
            rho_std,
            per_repeat,
            retained_dims,
        }
    }
}

pub(crate) fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Two checkpoints plus the sampling and truncation settings to compare them with.
#[derive(Debug, Clone)]
pub struct ComparisonSpec {
    pub manifest_a: Manifest,
    pub manifest_b: Manifest,
    pub plan: SamplePlan,
    pub trunc: f64,
}

impl ComparisonSpec {
    /// Checks grid length, per-layer comparability and settings from the
    /// declared shapes, without reading any tensor.
    pub fn validate(&self) -> Result<(), EngineError> {
        self.plan.validate().map_err(EngineError::Plan)?;
        if !(0.0..1.0).contains(&self.trunc) {
            return Err(EngineError::InvalidTruncation(self.trunc));
        }
        let (la, lb) = (&self.manifest_a.layers, &self.manifest_b.layers);
        if la.len() != lb.len() {
            return Err(EngineError::GridLength {
                a: la.len(),
                b: lb.len(),
            });
        }
        for (index, (ea, eb)) in la.iter().zip(lb).enumerate() {
            let (a, b) = (ea.shape, eb.shape);
            if a.n != b.n || a.h != b.h || a.w != b.w {
                return Err(EngineError::GridShape {
                    index,
                    layer_a: ea.name.clone(),
                    layer_b: eb.name.clone(),
                    a,
                    b,
                });
            }
        }
        Ok(())
    }

    /// Channel streams keyed by the checkpoints' canonical order rather than
    /// argument position, so that swapping the sides swaps the streams too.
    /// Identical checkpoints share a stream.
    pub fn channel_streams(&self) -> [ChannelStream; 2] {
        match self
            .manifest_a
            .checkpoint_key()
            .cmp(&self.manifest_b.checkpoint_key())
        {
            Ordering::Equal => [ChannelStream(0), ChannelStream(0)],
            Ordering::Less => [ChannelStream(0), ChannelStream(1)],
            Ordering::Greater => [ChannelStream(1), ChannelStream(0)],
        }
    }
}

/// Layer similarity with channel streams assigned by argument position.
pub fn layer_similarity<A: Activations, B: Activations>(
    a: &A,
    b: &B,
    plan: &SamplePlan,
    trunc: f64,
) -> Result<LayerSimilarity, EngineError> {
    layer_similarity_with_streams(a, b, plan, trunc, [ChannelStream(0), ChannelStream(1)])
}

pub fn layer_similarity_with_streams<A: Activations, B: Activations>(
    a: &A,
    b: &B,
    plan: &SamplePlan,
    trunc: f64,
    streams: [ChannelStream; 2],
) -> Result<LayerSimilarity, EngineError> {
    let layer = a.layer_name().to_owned();
    let mut per_repeat = Vec::with_capacity(plan.repeats);
    let mut dims = Vec::with_capacity(plan.repeats);
    for repeat_id in 0..plan.repeats {
        let (x, y) =
            sample_pair_with_streams(a, b, plan, repeat_id, streams).map_err(|source| {
                EngineError::Sampling {
                    layer: layer.clone(),
                    source,
                }
            })?;
        let result = cca(&x.matrix, &y.matrix, trunc).map_err(|source| EngineError::Linalg {
            layer: layer.clone(),
            source,
        })?;
        per_repeat.push(result.mean_correlation());
        dims.push(result.k());
    }
    Ok(LayerSimilarity::from_repeats(layer, per_repeat, &dims))
}

/// Similarity for every layer of the grid, in manifest order.
///
/// Layers run on the current rayon pool. A failing layer aborts the whole
/// comparison; when several fail, the first in manifest order is reported.
pub fn compare_models(spec: &ComparisonSpec) -> Result<Vec<LayerSimilarity>, EngineError> {
    spec.validate()?;
    let streams = spec.channel_streams();
    let results: Vec<Result<LayerSimilarity, EngineError>> = (0..spec.manifest_a.layers.len())
        .into_par_iter()
        .map(|i| {
            let a = spec.manifest_a.load_layer(i)?;
            let b = spec.manifest_b.load_layer(i)?;
            layer_similarity_with_streams(&a, &b, &spec.plan, spec.trunc, streams)
        })
        .collect();
    results.into_iter().collect()
}
