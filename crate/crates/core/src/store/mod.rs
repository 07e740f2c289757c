//! Activation tensors on disk and in memory.
//!
//! A layer dump is an `(n, h, w, c)` array: `n` stimuli, `h × w` spatial
//! positions and `c` channels, stored C-order in the NPY subset handled by
//! [`npy`]. [`Manifest`] binds a checkpoint to its ordered list of layer dumps.

mod manifest;
pub mod npy;

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use manifest::{LayerEntry, Manifest};
pub use npy::{Dtype, NpyError, NpyHeader};

use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Npy { path: PathBuf, source: NpyError },
    #[error("tensor shape {shape} has a zero dimension")]
    ZeroDimension { shape: TensorShape },
    #[error("tensor shape {shape} needs {} values, got {len}", shape.len())]
    ValueCount { shape: TensorShape, len: usize },
    #[error("non-finite activation at flat index {index}")]
    NonFinite { index: usize },
    #[error("{}: invalid manifest JSON: {source}", path.display())]
    ManifestJson {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("manifest lists no layers")]
    EmptyManifest,
    #[error("duplicate layer name {0:?} in manifest")]
    DuplicateLayer(String),
    #[error("layer {layer:?}: declared shape {declared} but file header says {actual}")]
    ShapeMismatch {
        layer: String,
        declared: TensorShape,
        actual: TensorShape,
    },
    #[error("layer {layer:?}: {source}")]
    Layer {
        layer: String,
        source: Box<StoreError>,
    },
}

/// `(n, h, w, c)` dimensions of an activation tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 4]", into = "[usize; 4]")]
pub struct TensorShape {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub c: usize,
}

impl TensorShape {
    pub const fn new(n: usize, h: usize, w: usize, c: usize) -> Self {
        Self { n, h, w, c }
    }

    pub fn dims(&self) -> [usize; 4] {
        [self.n, self.h, self.w, self.c]
    }

    /// Total number of values.
    pub fn len(&self) -> usize {
        self.n * self.h * self.w * self.c
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spatial(&self) -> usize {
        self.h * self.w
    }

    /// Row index of stimulus `i` at spatial position `(r, s)` after flattening.
    pub fn row_index(&self, i: usize, r: usize, s: usize) -> usize {
        i * self.h * self.w + r * self.w + s
    }
}

impl From<[usize; 4]> for TensorShape {
    fn from([n, h, w, c]: [usize; 4]) -> Self {
        Self { n, h, w, c }
    }
}

impl From<TensorShape> for [usize; 4] {
    fn from(s: TensorShape) -> Self {
        s.dims()
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.n, self.h, self.w, self.c)
    }
}

/// Scalar types that can be stored in a tensor file.
pub trait Element: Real {
    const DTYPE: Dtype;

    fn from_le(bytes: &[u8]) -> Self;
    fn write_le(self, out: &mut Vec<u8>);
}

impl Element for f32 {
    const DTYPE: Dtype = Dtype::F32;

    fn from_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte chunk"))
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

impl Element for f64 {
    const DTYPE: Dtype = Dtype::F64;

    fn from_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte chunk"))
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
}

/// One layer's activations over `n` stimuli, C-order `(n, h, w, c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTensor<T> {
    layer_name: String,
    shape: TensorShape,
    values: Vec<T>,
}

impl<T: Element> ActivationTensor<T> {
    pub fn new(
        layer_name: impl Into<String>,
        shape: TensorShape,
        values: Vec<T>,
    ) -> Result<Self, StoreError> {
        if shape.dims().contains(&0) {
            return Err(StoreError::ZeroDimension { shape });
        }
        if values.len() != shape.len() {
            return Err(StoreError::ValueCount {
                shape,
                len: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(StoreError::NonFinite { index });
        }
        Ok(Self {
            layer_name: layer_name.into(),
            shape,
            values,
        })
    }

    pub fn layer_name(&self) -> &str {
        &self.layer_name
    }

    pub fn shape(&self) -> TensorShape {
        self.shape
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, i: usize, r: usize, s: usize, ch: usize) -> T {
        self.values[self.shape.row_index(i, r, s) * self.shape.c + ch]
    }

    /// Reshapes to `(n·h·w, c)`, stimulus-major then spatial raster order,
    /// promoting values to `f64`.
    pub fn flatten(&self) -> Matrix<f64> {
        let rows = self.shape.n * self.shape.spatial();
        Matrix::new(
            rows,
            self.shape.c,
            self.values.iter().map(|v| v.as_f64()).collect(),
        )
        .expect("tensor invariants guarantee a valid matrix")
    }

    /// Flattened sub-matrix over the given stimuli (all spatial positions)
    /// and channels, in the order given.
    pub fn gather(&self, stimuli: &[usize], channels: &[usize]) -> Matrix<f64> {
        let TensorShape { h, w, c, .. } = self.shape;
        let hw = h * w;
        let mut data = Vec::with_capacity(stimuli.len() * hw * channels.len());
        for &i in stimuli {
            for pos in 0..hw {
                let base = (i * hw + pos) * c;
                data.extend(channels.iter().map(|&ch| self.values[base + ch].as_f64()));
            }
        }
        Matrix::new(stimuli.len() * hw, channels.len(), data)
            .expect("non-empty selection of finite values")
    }
}

/// A tensor as loaded from disk, in whichever precision the file used.
#[derive(Debug, Clone, PartialEq)]
pub enum StoredTensor {
    F32(ActivationTensor<f32>),
    F64(ActivationTensor<f64>),
}

impl StoredTensor {
    pub fn layer_name(&self) -> &str {
        match self {
            StoredTensor::F32(t) => t.layer_name(),
            StoredTensor::F64(t) => t.layer_name(),
        }
    }

    pub fn set_layer_name(&mut self, name: impl Into<String>) {
        match self {
            StoredTensor::F32(t) => t.layer_name = name.into(),
            StoredTensor::F64(t) => t.layer_name = name.into(),
        }
    }

    pub fn dtype(&self) -> Dtype {
        match self {
            StoredTensor::F32(_) => Dtype::F32,
            StoredTensor::F64(_) => Dtype::F64,
        }
    }

    pub fn flatten(&self) -> Matrix<f64> {
        match self {
            StoredTensor::F32(t) => t.flatten(),
            StoredTensor::F64(t) => t.flatten(),
        }
    }
}

impl From<ActivationTensor<f32>> for StoredTensor {
    fn from(t: ActivationTensor<f32>) -> Self {
        StoredTensor::F32(t)
    }
}

impl From<ActivationTensor<f64>> for StoredTensor {
    fn from(t: ActivationTensor<f64>) -> Self {
        StoredTensor::F64(t)
    }
}

/// Read access shared by typed and dynamically typed tensors.
pub trait Activations: Sync {
    fn layer_name(&self) -> &str;
    fn shape(&self) -> TensorShape;
    fn gather(&self, stimuli: &[usize], channels: &[usize]) -> Matrix<f64>;
}

impl<T: Element> Activations for ActivationTensor<T> {
    fn layer_name(&self) -> &str {
        &self.layer_name
    }

    fn shape(&self) -> TensorShape {
        self.shape
    }

    fn gather(&self, stimuli: &[usize], channels: &[usize]) -> Matrix<f64> {
        ActivationTensor::gather(self, stimuli, channels)
    }
}

impl Activations for StoredTensor {
    fn layer_name(&self) -> &str {
        StoredTensor::layer_name(self)
    }

    fn shape(&self) -> TensorShape {
        match self {
            StoredTensor::F32(t) => t.shape,
            StoredTensor::F64(t) => t.shape,
        }
    }

    fn gather(&self, stimuli: &[usize], channels: &[usize]) -> Matrix<f64> {
        match self {
            StoredTensor::F32(t) => t.gather(stimuli, channels),
            StoredTensor::F64(t) => t.gather(stimuli, channels),
        }
    }
}

/// Reads only the header of a tensor file.
pub fn read_tensor_header(path: &Path) -> Result<NpyHeader, StoreError> {
    let file = fs::File::open(path).map_err(|source| StoreError::Io {
        path: path.to_owned(),
        source,
    })?;
    npy::read_header(BufReader::new(file)).map_err(|source| StoreError::Npy {
        path: path.to_owned(),
        source,
    })
}

/// Loads a tensor file; the layer name defaults to the file stem.
pub fn read_tensor(path: &Path) -> Result<StoredTensor, StoreError> {
    let bytes = fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_owned(),
        source,
    })?;
    let npy_err = |source| StoreError::Npy {
        path: path.to_owned(),
        source,
    };
    let header = npy::read_header(bytes.as_slice()).map_err(npy_err)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tensor = match header.dtype {
        Dtype::F32 => StoredTensor::F32(ActivationTensor {
            layer_name: name,
            shape: header.shape,
            values: npy::decode_payload(&header, &bytes).map_err(npy_err)?,
        }),
        Dtype::F64 => StoredTensor::F64(ActivationTensor {
            layer_name: name,
            shape: header.shape,
            values: npy::decode_payload(&header, &bytes).map_err(npy_err)?,
        }),
    };
    Ok(tensor)
}

pub fn write_tensor<T: Element>(
    tensor: &ActivationTensor<T>,
    path: &Path,
) -> Result<(), StoreError> {
    write_array(tensor.shape, &tensor.values, path)
}

/// Writes raw C-order values; refuses non-finite values.
pub fn write_array<T: Element>(
    shape: TensorShape,
    values: &[T],
    path: &Path,
) -> Result<(), StoreError> {
    let bytes = npy::encode(shape, values).map_err(|source| StoreError::Npy {
        path: path.to_owned(),
        source,
    })?;
    fs::write(path, bytes).map_err(|source| StoreError::Io {
        path: path.to_owned(),
        source,
    })
}
