//! Serialized model: standardizer, hidden layer and readout.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::classifier::ElasticNetModel;
use crate::elm::{argmax_rows, HiddenLayer, RidgeSolution, Standardizer};
use crate::error::{Error, Result};

pub const MODEL_FORMAT: &str = "mdelm-model/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Readout {
    Ridge(RidgeSolution),
    ElasticNet(ElasticNetModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmModel {
    pub format: String,
    /// Hash of the encoding schema the inputs came from, if known.
    pub schema_hash: Option<String>,
    /// Input columns, in the order the model expects them.
    pub feature_names: Vec<String>,
    pub n_classes: usize,
    pub standardizer: Standardizer,
    pub layer: HiddenLayer,
    pub readout: Readout,
}

impl ElmModel {
    pub fn new(
        feature_names: Vec<String>,
        n_classes: usize,
        standardizer: Standardizer,
        layer: HiddenLayer,
        readout: Readout,
    ) -> Self {
        Self {
            format: MODEL_FORMAT.to_string(),
            schema_hash: None,
            feature_names,
            n_classes,
            standardizer,
            layer,
            readout,
        }
    }

    /// Class scores for raw (unstandardized) inputs.
    pub fn decision_function(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let h = self.layer.transform(&self.standardizer.transform(x)?)?;
        match &self.readout {
            Readout::Ridge(r) => {
                if h.ncols() != r.output_weights.nrows() {
                    return Err(Error::DimensionMismatch {
                        expected: r.output_weights.nrows(),
                        found: h.ncols(),
                    });
                }
                Ok(h * &r.output_weights)
            }
            Readout::ElasticNet(m) => m.decision_function(&h),
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.decision_function(x)?))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(s)?;
        if model.format != MODEL_FORMAT {
            return Err(Error::invalid(format!("unsupported model format `{}`", model.format)));
        }
        if model.feature_names.len() != model.layer.input_dim {
            return Err(Error::DimensionMismatch {
                expected: model.layer.input_dim,
                found: model.feature_names.len(),
            });
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
