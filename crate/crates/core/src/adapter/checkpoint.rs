use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AdapterError, AdapterParameters, PlmShapeConfig};
use crate::numerics::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    /// `[n]` for vectors, `[rows, cols]` for matrices.
    pub shape: Vec<usize>,
    /// Row-major values.
    pub data: Vec<f64>,
}

/// Named tensors, serialized as a JSON object sorted by name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Checkpoint {
    pub tensors: BTreeMap<String, TensorRecord>,
}

/// Biases (`b_*`) and queries (`q.*`) are stored one-dimensional.
fn is_vector(name: &str) -> bool {
    name.split('.').any(|s| s == "q" || s.starts_with("b_"))
}

impl Checkpoint {
    pub fn insert(&mut self, name: impl Into<String>, m: &Matrix) {
        let name = name.into();
        let shape = if m.rows() == 1 && is_vector(&name) {
            vec![m.cols()]
        } else {
            vec![m.rows(), m.cols()]
        };
        self.tensors.insert(
            name,
            TensorRecord {
                shape,
                data: m.as_slice().to_vec(),
            },
        );
    }

    pub fn get(&self, name: &str) -> Result<Matrix, AdapterError> {
        let rec = self
            .tensors
            .get(name)
            .ok_or_else(|| AdapterError::Checkpoint(format!("missing tensor {name}")))?;
        let (rows, cols) = match rec.shape[..] {
            [n] => (1, n),
            [r, c] => (r, c),
            _ => return Err(AdapterError::Checkpoint(format!("{name}: bad shape {:?}", rec.shape))),
        };
        Matrix::from_vec(rows, cols, rec.data.clone()).map_err(|e| AdapterError::Checkpoint(format!("{name}: {e}")))
    }

    pub fn from_adapters(params: &AdapterParameters) -> Self {
        let mut ck = Self::default();
        ck.add_adapters(params);
        ck
    }

    pub fn add_adapters(&mut self, params: &AdapterParameters) {
        for (name, m) in params.named_tensors() {
            self.insert(name, m);
        }
    }

    /// Rebuilds adapters of shape `cfg`; every tensor must be present with
    /// the expected shape.
    pub fn adapters(&self, cfg: PlmShapeConfig) -> Result<AdapterParameters, AdapterError> {
        cfg.check()?;
        let mut params = AdapterParameters::zeros(cfg);
        let names: Vec<(String, (usize, usize))> = params
            .named_tensors()
            .into_iter()
            .map(|(n, m)| (n, m.shape()))
            .collect();
        let mut flat = Vec::with_capacity(params.parameter_count());
        for (name, shape) in names {
            let m = self.get(&name)?;
            if m.shape() != shape {
                return Err(AdapterError::Checkpoint(format!(
                    "{name}: shape {:?}, expected {shape:?}",
                    m.shape()
                )));
            }
            flat.extend_from_slice(m.as_slice());
        }
        params.assign_flat(&flat);
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, AdapterError> {
        serde_json::from_str(s).map_err(|e| AdapterError::Checkpoint(e.to_string()))
    }
}
