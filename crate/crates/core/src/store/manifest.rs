use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::store::{read_tensor, read_tensor_header, StoreError, StoredTensor, TensorShape};

/// One entry of a manifest's layer grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub name: String,
    /// Relative paths resolve against the manifest's directory.
    pub path: PathBuf,
    pub shape: TensorShape,
}

/// Checkpoint description: which activation dump belongs to which layer.
///
/// Layer order is significant: it is the order of every report built from
/// the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub model_id: String,
    pub checkpoint_tag: String,
    pub seed: i64,
    pub stimulus_source: String,
    pub layers: Vec<LayerEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl Manifest {
    pub fn new(
        model_id: impl Into<String>,
        checkpoint_tag: impl Into<String>,
        seed: i64,
        stimulus_source: impl Into<String>,
        layers: Vec<LayerEntry>,
        base_dir: impl Into<PathBuf>,
    ) -> Result<Self, StoreError> {
        let m = Self {
            model_id: model_id.into(),
            checkpoint_tag: checkpoint_tag.into(),
            seed,
            stimulus_source: stimulus_source.into(),
            layers,
            base_dir: base_dir.into(),
        };
        m.check_structure()?;
        Ok(m)
    }

    /// Parses a manifest without touching the layer files.
    pub fn parse(
        json: &str,
        base_dir: impl Into<PathBuf>,
        origin: &Path,
    ) -> Result<Self, StoreError> {
        let mut m: Manifest =
            serde_json::from_str(json).map_err(|source| StoreError::ManifestJson {
                path: origin.to_owned(),
                source,
            })?;
        m.base_dir = base_dir.into();
        m.check_structure()?;
        Ok(m)
    }

    /// Loads a manifest and checks every layer file's header against the
    /// declared shape.
    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let json = fs::read_to_string(path).map_err(|source| StoreError::Io {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self::parse(&json, base, path)?;
        m.check_headers()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json + "\n").map_err(|source| StoreError::Io {
            path: path.to_owned(),
            source,
        })
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn resolve(&self, entry: &LayerEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    /// `model_id` and `checkpoint_tag`; identifies the checkpoint independently
    /// of argument position.
    pub fn checkpoint_key(&self) -> (&str, &str) {
        (&self.model_id, &self.checkpoint_tag)
    }

    fn check_structure(&self) -> Result<(), StoreError> {
        if self.layers.is_empty() {
            return Err(StoreError::EmptyManifest);
        }
        let mut seen = HashSet::new();
        for layer in &self.layers {
            if !seen.insert(layer.name.as_str()) {
                return Err(StoreError::DuplicateLayer(layer.name.clone()));
            }
            if layer.shape.dims().contains(&0) {
                return Err(StoreError::Layer {
                    layer: layer.name.clone(),
                    source: Box::new(StoreError::ZeroDimension { shape: layer.shape }),
                });
            }
        }
        Ok(())
    }

    pub fn check_headers(&self) -> Result<(), StoreError> {
        for layer in &self.layers {
            let header =
                read_tensor_header(&self.resolve(layer)).map_err(|e| StoreError::Layer {
                    layer: layer.name.clone(),
                    source: Box::new(e),
                })?;
            if header.shape != layer.shape {
                return Err(StoreError::ShapeMismatch {
                    layer: layer.name.clone(),
                    declared: layer.shape,
                    actual: header.shape,
                });
            }
        }
        Ok(())
    }

    /// Loads the full tensor for `layers[index]`, named after the entry.
    pub fn load_layer(&self, index: usize) -> Result<StoredTensor, StoreError> {
        let entry = &self.layers[index];
        let mut tensor = read_tensor(&self.resolve(entry)).map_err(|e| StoreError::Layer {
            layer: entry.name.clone(),
            source: Box::new(e),
        })?;
        let actual = crate::store::Activations::shape(&tensor);
        if actual != entry.shape {
            return Err(StoreError::ShapeMismatch {
                layer: entry.name.clone(),
                declared: entry.shape,
                actual,
            });
        }
        tensor.set_layer_name(entry.name.clone());
        Ok(tensor)
    }
}
