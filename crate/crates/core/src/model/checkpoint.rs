use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelError, UnifiedModelParams};
use crate::scalar::Real;

pub const CHECKPOINT_FORMAT: &str = "ucvf-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub values: Vec<f64>,
}

/// JSON checkpoint. Values are written in shortest round-trip form, so an
/// `f64` model reloads bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub seed: u64,
    pub epoch: usize,
    pub tensors: Vec<TensorRecord>,
}

impl Checkpoint {
    pub fn new<T: Real>(
        config: &ModelConfig,
        seed: u64,
        epoch: usize,
        params: &UnifiedModelParams<T>,
    ) -> Self {
        let tensors = params
            .tensor_names()
            .into_iter()
            .zip(params.tensors())
            .map(|(name, t)| TensorRecord {
                name,
                values: t.iter().map(|x| x.to_f64_lossy()).collect(),
            })
            .collect();
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            config: config.clone(),
            seed,
            epoch,
            tensors,
        }
    }

    pub fn params<T: Real>(&self) -> Result<UnifiedModelParams<T>, ModelError> {
        let bad = |m: String| Err(ModelError::Checkpoint(m));
        if self.format != CHECKPOINT_FORMAT || self.version != CHECKPOINT_VERSION {
            return bad(format!(
                "unsupported checkpoint {} v{}",
                self.format, self.version
            ));
        }
        self.config.validate()?;
        let mut params = UnifiedModelParams::<T>::zeros(&self.config);
        let names = params.tensor_names();
        if names.len() != self.tensors.len() {
            return bad(format!(
                "{} tensors, expected {}",
                self.tensors.len(),
                names.len()
            ));
        }
        for ((dst, name), rec) in params
            .tensors_mut()
            .into_iter()
            .zip(&names)
            .zip(&self.tensors)
        {
            if &rec.name != name || rec.values.len() != dst.len() {
                return bad(format!(
                    "tensor {} with {} values, expected {} with {}",
                    rec.name,
                    rec.values.len(),
                    name,
                    dst.len()
                ));
            }
            for (d, &v) in dst.iter_mut().zip(&rec.values) {
                *d = T::from_f64_lossy(v);
            }
        }
        Ok(params)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, self).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let r = BufReader::new(File::open(path)?);
        serde_json::from_reader(r).map_err(|e| ModelError::Checkpoint(e.to_string()))
    }
}
