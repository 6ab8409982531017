//! Versioned JSON checkpoints for trained reward models.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irl::model::RewardModel;
use crate::scalar::Scalar;

pub const CHECKPOINT_FORMAT: &str = "graphrag-irl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Checkpoint<T: Scalar> {
    pub format: String,
    pub version: u32,
    pub scalar: String,
    pub config_hash: String,
    pub model: RewardModel<T>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(model: RewardModel<T>, config_hash: &str) -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            scalar: std::any::type_name::<T>().into(),
            config_hash: config_hash.into(),
            model,
        }
    }
}

pub fn write_checkpoint<T: Scalar>(path: &Path, checkpoint: &Checkpoint<T>) -> Result<()> {
    let text = serde_json::to_string_pretty(checkpoint).map_err(|e| Error::Format(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint<T: Scalar>(path: &Path) -> Result<Checkpoint<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let c: Checkpoint<T> = serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported checkpoint {} v{}",
            path.display(),
            c.format,
            c.version
        )));
    }
    if c.scalar != std::any::type_name::<T>() {
        return Err(Error::Format(format!(
            "{}: checkpoint holds {} parameters",
            path.display(),
            c.scalar
        )));
    }
    c.model.check()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Standardizer;
    use crate::irl::model::Architecture;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut m = RewardModel::<f64>::init(Architecture::Mlp { hidden: 5 }, 4, 3);
        m.standardizer = Standardizer {
            mean: vec![0.1, 1.0 / 3.0, -2e-17, 5.0],
            std: vec![1.0, 0.7, 1e-9, std::f64::consts::PI],
            epsilon: 1e-8,
        };
        write_checkpoint(&path, &Checkpoint::new(m.clone(), "abc")).unwrap();
        let back: Checkpoint<f64> = read_checkpoint(&path).unwrap();
        assert_eq!(back.model, m);
        assert_eq!(back.config_hash, "abc");

        let m32 = RewardModel::<f32>::init(Architecture::Linear, 7, 9);
        write_checkpoint(&path, &Checkpoint::new(m32.clone(), "x")).unwrap();
        assert_eq!(read_checkpoint::<f32>(&path).unwrap().model, m32);
        assert!(read_checkpoint::<f64>(&path).is_err());
    }
}
