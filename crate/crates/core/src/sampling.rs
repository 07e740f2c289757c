//! Stimulus and channel subsampling that brings layers of different shapes
//! to a comparable CCA problem size.
//!
//! For each repeat, one set of stimuli is drawn and shared by both networks
//! (rows must correspond), while each network's channels are drawn from its
//! own stream. Every draw comes from a ChaCha8 generator whose key is built
//! from `(seed, repeat_id)` and whose stream number selects the purpose, so
//! the trace depends on nothing but the plan, the repeat and the shapes.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::Matrix;
use crate::store::{Activations, TensorShape};

pub const DEFAULT_TARGET_ROWS: usize = 20_000;
pub const DEFAULT_CHANNEL_CAP: usize = 64;
pub const DEFAULT_REPEATS: usize = 5;

const STIMULUS_STREAM: u64 = 0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SamplingError {
    #[error("invalid sample plan: {0}")]
    InvalidPlan(String),
    #[error(
        "layer shapes are not comparable: {a} vs {b} (stimulus count and spatial dims must match)"
    )]
    ShapeMismatch { a: TensorShape, b: TensorShape },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub target_rows: usize,
    pub channel_cap: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            target_rows: DEFAULT_TARGET_ROWS,
            channel_cap: DEFAULT_CHANNEL_CAP,
            repeats: DEFAULT_REPEATS,
            seed: 0,
        }
    }
}

impl SamplePlan {
    pub fn new(
        target_rows: usize,
        channel_cap: usize,
        repeats: usize,
        seed: u64,
    ) -> Result<Self, SamplingError> {
        let plan = Self {
            target_rows,
            channel_cap,
            repeats,
            seed,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.channel_cap == 0 {
            return Err(SamplingError::InvalidPlan(
                "channel cap must be at least 1".into(),
            ));
        }
        if self.repeats == 0 {
            return Err(SamplingError::InvalidPlan(
                "repeats must be at least 1".into(),
            ));
        }
        if self.target_rows < self.channel_cap * 10 {
            return Err(SamplingError::InvalidPlan(format!(
                "target rows {} must be at least 10x the channel cap {}",
                self.target_rows, self.channel_cap
            )));
        }
        Ok(())
    }
}

/// A flattened, subsampled activation matrix and the indices it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMatrix {
    pub matrix: Matrix<f64>,
    pub stimulus_indices: Vec<usize>,
    pub channel_indices: Vec<usize>,
    pub repeat_id: usize,
}

/// Number of stimuli such that `n · h · w` is close to the row target:
/// `round(target / (h·w))`, ties to even, clamped to `[1, available_n]`.
pub fn plan_stimuli(available_n: usize, h: usize, w: usize, plan: &SamplePlan) -> usize {
    let ideal = (plan.target_rows as f64 / (h * w) as f64).round_ties_even();
    (ideal as usize).clamp(1, available_n.max(1))
}

/// Generator for one purpose within one repeat.
fn stream(seed: u64, repeat_id: usize, stream_id: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(repeat_id as u64).to_le_bytes());
    key[16..24].copy_from_slice(b"repsim\x00\x01");
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream_id);
    rng
}

/// Sorted draw of `amount` distinct indices from `0..length`.
fn draw(rng: &mut ChaCha8Rng, length: usize, amount: usize) -> Vec<usize> {
    if amount >= length {
        return (0..length).collect();
    }
    let mut picked = index::sample(rng, length, amount).into_vec();
    picked.sort_unstable();
    picked
}

/// Channel stream for a side; equal ids draw identical channel sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChannelStream(pub u64);

/// [`sample_pair_with_streams`] with channel streams assigned by argument
/// position (`a` → 0, `b` → 1).
pub fn sample_pair<A: Activations + ?Sized, B: Activations + ?Sized>(
    a: &A,
    b: &B,
    plan: &SamplePlan,
    repeat_id: usize,
) -> Result<(SampledMatrix, SampledMatrix), SamplingError> {
    sample_pair_with_streams(a, b, plan, repeat_id, [ChannelStream(0), ChannelStream(1)])
}

/// Draws one shared stimulus set and an independent channel set per side,
/// and gathers the corresponding flattened matrices.
pub fn sample_pair_with_streams<A: Activations + ?Sized, B: Activations + ?Sized>(
    a: &A,
    b: &B,
    plan: &SamplePlan,
    repeat_id: usize,
    channel_streams: [ChannelStream; 2],
) -> Result<(SampledMatrix, SampledMatrix), SamplingError> {
    plan.validate()?;
    let (sa, sb) = (a.shape(), b.shape());
    if sa.n != sb.n || sa.h != sb.h || sa.w != sb.w {
        return Err(SamplingError::ShapeMismatch { a: sa, b: sb });
    }

    let n_star = plan_stimuli(sa.n, sa.h, sa.w, plan);
    let stimuli = draw(
        &mut stream(plan.seed, repeat_id, STIMULUS_STREAM),
        sa.n,
        n_star,
    );

    let side = |t: &dyn Activations, shape: TensorShape, ChannelStream(id): ChannelStream| {
        let mut rng = stream(plan.seed, repeat_id, 1 + id);
        let channels = draw(&mut rng, shape.c, shape.c.min(plan.channel_cap));
        SampledMatrix {
            matrix: t.gather(&stimuli, &channels),
            stimulus_indices: stimuli.clone(),
            channel_indices: channels,
            repeat_id,
        }
    };
    let left = side(&Wrap(a), sa, channel_streams[0]);
    let right = side(&Wrap(b), sb, channel_streams[1]);
    Ok((left, right))
}

/// Sized adapter so unsized `Activations` can be passed as a trait object.
struct Wrap<'a, T: ?Sized>(&'a T);

impl<T: Activations + ?Sized> Activations for Wrap<'_, T> {
    fn layer_name(&self) -> &str {
        self.0.layer_name()
    }

    fn shape(&self) -> TensorShape {
        self.0.shape()
    }

    fn gather(&self, stimuli: &[usize], channels: &[usize]) -> Matrix<f64> {
        self.0.gather(stimuli, channels)
    }
}
