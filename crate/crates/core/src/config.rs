//! JSON configuration: a full scenario plus output options.
//!
//! Parsing is strict. Unknown keys are rejected and every error carries the
//! dotted path of the offending key.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::contact::ContactParams;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::sim::{CommandParams, RoverParams, Scenario, SimParams, TerrainParams, TerrainShape};
use crate::terrain::Channel;
use crate::vehicle::{FrictionParams, LimiterParams};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputParams {
    /// Terrain channels written as `dem_<channel>.asc` after a run.
    pub dem_channels: Vec<Channel>,
    /// When set, also write `dem_mask.asc` marking ruts deeper than this, mm.
    pub threshold_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub rover: RoverParams,
    pub model: ModelParams,
    pub friction: FrictionParams,
    pub limiter: LimiterParams,
    pub contact: ContactParams,
    pub terrain: TerrainParams,
    pub command: CommandParams,
    pub sim: SimParams,
    pub output: OutputParams,
}

impl Config {
    pub fn scenario(&self) -> Scenario {
        Scenario {
            rover: self.rover.clone(),
            models: self.model,
            friction: self.friction,
            limiter: self.limiter.clone(),
            contact: self.contact,
            terrain: self.terrain.clone(),
            command: self.command.clone(),
            sim: self.sim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario().validate()?;
        if let Some(t) = self.output.threshold_mm {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::config("output.threshold_mm", "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(
                if key == "." { String::new() } else { key },
                e.inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads and validates a config file. A relative heightmap path is taken
    /// relative to the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let mut cfg: Config = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::config(e.path().to_string(), e.inner().to_string()))?;
        if let TerrainShape::Heightmap { path: hm } = &mut cfg.terrain.shape {
            if hm.is_relative() {
                if let Some(dir) = path.parent() {
                    *hm = dir.join(&*hm);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
