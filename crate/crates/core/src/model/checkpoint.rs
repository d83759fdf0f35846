use super::{ModelConfig, ModelError, ModelParams, Result};
use crate::features::{Normalizer, AUX_DIM};
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_SCHEMA_VERSION: &str = "1.0";

/// Trained model plus the normalizers its inputs and targets were scaled with.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub feature_normalizer: Normalizer,
    pub aux_normalizer: Normalizer,
}

#[derive(Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    schema_version: String,
    config: ModelConfig,
    feature_normalizer: Normalizer,
    aux_normalizer: Normalizer,
    tensors: Vec<NamedTensor>,
}

fn err(msg: impl Into<String>) -> ModelError {
    ModelError::Checkpoint(msg.into())
}

impl Checkpoint {
    pub fn to_json(&self) -> String {
        let doc = Document {
            schema_version: CHECKPOINT_SCHEMA_VERSION.into(),
            config: self.config.clone(),
            feature_normalizer: self.feature_normalizer.clone(),
            aux_normalizer: self.aux_normalizer.clone(),
            tensors: self
                .params
                .named(&self.config)
                .into_iter()
                .map(|(name, t)| NamedTensor {
                    name,
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                })
                .collect(),
        };
        serde_json::to_string(&doc).expect("checkpoint serializes")
    }

    /// Parses a checkpoint, checking every tensor against the shapes its config implies.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Document = serde_json::from_str(text).map_err(|e| err(format!("invalid document: {e}")))?;
        if doc.schema_version.split('.').next() != Some("1") {
            return Err(err(format!("unsupported schema version {}", doc.schema_version)));
        }
        doc.config.validate()?;
        for (label, n, dim) in [
            ("feature_normalizer", &doc.feature_normalizer, doc.config.input_dim),
            ("aux_normalizer", &doc.aux_normalizer, AUX_DIM),
        ] {
            if n.mu.len() != dim || n.sigma.len() != dim || n.sigma.iter().any(|&s| !(s > 0.0)) {
                return Err(err(format!("{label} must have {dim} components with positive sigma")));
            }
        }
        let mut by_name: BTreeMap<String, NamedTensor> =
            doc.tensors.into_iter().map(|t| (t.name.clone(), t)).collect();
        let mut params = ModelParams::init(&doc.config, 0)?;
        for (name, slot) in params.named_mut(&doc.config) {
            let t = by_name.remove(&name).ok_or_else(|| err(format!("missing tensor {name}")))?;
            if t.shape != slot.shape() {
                return Err(err(format!("{name}: shape {:?}, config expects {:?}", t.shape, slot.shape())));
            }
            *slot = Tensor::new(t.shape, t.data).map_err(|e| err(format!("{name}: {e}")))?;
        }
        if let Some(extra) = by_name.keys().next() {
            return Err(err(format!("unexpected tensor {extra}")));
        }
        Ok(Self {
            config: doc.config,
            params,
            feature_normalizer: doc.feature_normalizer,
            aux_normalizer: doc.aux_normalizer,
        })
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CoreKind;

    fn sample(core: CoreKind) -> Checkpoint {
        let config = ModelConfig::miniature(core);
        Checkpoint {
            params: ModelParams::init(&config, 3).unwrap(),
            config,
            feature_normalizer: Normalizer {
                mu: vec![0.5; 25],
                sigma: vec![2.0; 25],
            },
            aux_normalizer: Normalizer {
                mu: vec![0.0; 3],
                sigma: vec![1.0; 3],
            },
        }
    }

    #[test]
    fn round_trip_is_exact() {
        for core in CoreKind::ALL {
            let c = sample(core);
            assert_eq!(Checkpoint::from_json(&c.to_json()).unwrap(), c);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let c = sample(CoreKind::Rk4);
        let text = c.to_json().replace("\"shape\":[25,8]", "\"shape\":[8,25]");
        let e = Checkpoint::from_json(&text).unwrap_err();
        assert!(e.to_string().contains("proj.w"), "{e}");
    }

    #[test]
    fn missing_tensor_rejected() {
        let mut doc: serde_json::Value = serde_json::from_str(&sample(CoreKind::Lstm).to_json()).unwrap();
        doc["tensors"].as_array_mut().unwrap().pop();
        assert!(Checkpoint::from_json(&doc.to_string()).is_err());
    }
}
