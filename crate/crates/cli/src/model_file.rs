//! On-disk model: the trained parameters of any method plus the resolved
//! config that produced them.

use std::path::Path;

use clsvm_core::baselines::{FasConfig, FasModel, FsModel};
use clsvm_core::clsvm::{RoundSummary, TrainConfig};
use clsvm_core::io::{read_json, write_json};
use clsvm_core::svr::SvrConfig;
use clsvm_core::{AttributeSchema, ClsvmModel, Error, Result};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

// read and written once per command; boxing the large variant buys nothing
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "method")]
pub enum TrainedModel {
    #[serde(rename = "clsvm")]
    Clsvm {
        config: TrainConfig,
        rounds: Vec<RoundSummary>,
        model: ClsvmModel,
    },
    #[serde(rename = "f-s")]
    Fs {
        config: SvrConfig,
        schema: AttributeSchema,
        model: FsModel,
    },
    #[serde(rename = "f-a-s")]
    Fas {
        config: FasConfig,
        schema: AttributeSchema,
        model: FasModel,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(flatten)]
    pub trained: TrainedModel,
}

impl ModelFile {
    pub fn new(trained: TrainedModel) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            trained,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: ModelFile = read_json(path)?;
        if file.format_version != FORMAT_VERSION {
            return Err(Error::Model(format!(
                "{}: model format {} is not supported (expected {FORMAT_VERSION})",
                path.display(),
                file.format_version
            )));
        }
        if let TrainedModel::Clsvm { model, .. } = &file.trained {
            model.validate()?;
        }
        Ok(file)
    }

    pub fn schema(&self) -> &AttributeSchema {
        match &self.trained {
            TrainedModel::Clsvm { model, .. } => &model.schema,
            TrainedModel::Fs { schema, .. } | TrainedModel::Fas { schema, .. } => schema,
        }
    }

    pub fn feature_dim(&self) -> usize {
        match &self.trained {
            TrainedModel::Clsvm { model, .. } => model.predictors.feature_dim(),
            TrainedModel::Fs { model, .. } => model.regressor.w.len(),
            TrainedModel::Fas { model, .. } => model.w_xa.rows(),
        }
    }
}
