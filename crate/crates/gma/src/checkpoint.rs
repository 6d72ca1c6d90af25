//! JSON checkpoints: every parameter tensor of every trained model, with
//! its name and shape, plus the configuration that produced it.

use std::path::Path;

use gma_core::model::{Model, ModelSpec};
use gma_core::trainer::{stream_rng, TrainConfig};
use gma_core::Matrix;
use serde::{Deserialize, Serialize};

use crate::error::{GmaError, Result};
use crate::io::{read_json, write_json};

pub const FORMAT: &str = "gma-checkpoint";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub params: Vec<Tensor>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub dataset: String,
    pub config: TrainConfig,
    pub spec: ModelSpec,
    /// Degree-feature cap applied to the training data, if any.
    #[serde(default)]
    pub degree_features: Option<usize>,
    /// One model for unsupervised runs, one per fold for semi-supervised.
    pub models: Vec<ModelParams>,
}

impl Checkpoint {
    pub fn new(dataset: &str, config: &TrainConfig, models: &[Model]) -> Result<Self> {
        let spec = models
            .first()
            .ok_or_else(|| GmaError::Usage("no models to checkpoint".into()))?
            .spec
            .clone();
        let models = models
            .iter()
            .map(|m| ModelParams {
                params: m
                    .store
                    .iter()
                    .map(|(name, v)| Tensor {
                        name: name.into(),
                        shape: [v.rows(), v.cols()],
                        data: v.as_slice().to_vec(),
                    })
                    .collect(),
            })
            .collect();
        Ok(Checkpoint {
            format: FORMAT.into(),
            version: VERSION,
            dataset: dataset.into(),
            config: config.clone(),
            spec,
            degree_features: None,
            models,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ck: Checkpoint = read_json(path)?;
        if ck.format != FORMAT || ck.version != VERSION {
            return Err(GmaError::Usage(format!(
                "{}: expected {FORMAT} version {VERSION}, found {} version {}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        Ok(ck)
    }

    /// Rebuilds every stored model.
    pub fn models(&self) -> Result<Vec<Model>> {
        self.models
            .iter()
            .map(|mp| {
                // Initial values are overwritten by `load`.
                let mut model = Model::new(self.spec.clone(), &mut stream_rng(0, 0))?;
                let entries = mp
                    .params
                    .iter()
                    .map(|t| {
                        Ok((t.name.clone(), Matrix::from_vec(t.shape[0], t.shape[1], t.data.clone())?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                model.store.load(entries)?;
                Ok(model)
            })
            .collect()
    }
}
