//! One document holding every tunable of a run.
//!
//! ```toml
//! seed = 42
//!
//! [ranges]
//! lo = [0.005, 0.0, 0.1, -0.95, 0.0, 0.0, 0.05, 10.0, -1.0]
//! hi = [5.0, 1.0, 1.0, 0.0, 1.0, 0.1, 1.0, 6000.0, 1.0]
//!
//! [network]
//! layer_sizes = [9, 150, 150, 150, 150, 150, 150, 1]
//! epochs = 200
//!
//! [calibration]
//! n_starts = 5
//! ```
//!
//! Missing keys take their defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{BoxTransform, CalibrationConfig};
use crate::dataset::ParameterRanges;
use crate::ddn::NetworkConfig;
use crate::heston::{FiniteDiffConfig, QuadratureConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Drives sampling, splitting, initialisation, shuffling, dropout,
    /// start points and noise, each on its own stream.
    pub seed: u64,
    pub ranges: ParameterRanges,
    pub quadrature: QuadratureConfig,
    pub finite_difference: FiniteDiffConfig,
    pub network: NetworkConfig,
    pub calibration: CalibrationConfig,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_toml_string()?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed must not exceed {}", i64::MAX)));
        }
        self.ranges.validate()?;
        self.quadrature.validate()?;
        if !(self.finite_difference.h_rel > 0.0 && self.finite_difference.h_abs > 0.0) {
            return Err(Error::Config("finite-difference steps must be positive".into()));
        }
        self.network().validate()?;
        self.calibration().validate()
    }

    /// Network settings with the global seed applied.
    pub fn network(&self) -> NetworkConfig {
        NetworkConfig {
            seed: self.seed,
            ..self.network.clone()
        }
    }

    /// Calibration settings with the global seed applied.
    pub fn calibration(&self) -> CalibrationConfig {
        CalibrationConfig {
            seed: self.seed,
            ..self.calibration
        }
    }

    pub fn calibration_box(&self) -> BoxTransform {
        BoxTransform::from_ranges(&self.ranges)
    }
}
