//! Run configuration: one TOML file with a table per component, plus
//! `section.key=value` overrides.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::ArrayConfig;
use crate::nnet::{ArchConfig, FusionConfig, ModelConfig};
use crate::percept::GridConfig;
use crate::scene::{SceneConfig, VIEW_COUNT};
use crate::train::TrainConfig;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("bad override `{0}`: expected section.key=value")]
    Override(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Output size of each camera view as a fraction of the rendered size.
    pub image_resize_fraction: f64,
    /// Probability of dropping each LiDAR or image block at generation.
    pub failure_rate: f64,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            image_resize_fraction: 0.2,
            failure_rate: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub fusion: FusionConfig,
    pub arch: ArchConfig,
    pub init_seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            fusion: FusionConfig::default(),
            arch: ArchConfig::default(),
            init_seed: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Outage thresholds R_T in bits/s/Hz.
    pub thresholds: Vec<f64>,
    /// When set, rates are also reported in Mbps at this bandwidth.
    pub bandwidth_hz: Option<f64>,
    /// Numbers of relay UAVs hidden in the robustness study.
    pub missing_uavs: Vec<usize>,
    /// Numbers of views hidden per UAV in the robustness study.
    pub missing_views: Vec<usize>,
    pub dropout_seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            thresholds: (0..=24).map(|i| i as f64 * 0.5).collect(),
            bandwidth_hz: None,
            missing_uavs: vec![0, 1, 2, 3],
            missing_views: vec![0, 1, 2, 3],
            dropout_seed: 11,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneConfig,
    pub array: ArrayConfig,
    pub grid: GridConfig,
    pub preprocess: PreprocessConfig,
    pub model: ModelSection,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    /// Parses TOML text, applies overrides in order and validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table.try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&std::path::Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let inv = |e: String| ConfigError::Invalid(e);
        self.scene.validate().map_err(|e| inv(e.to_string()))?;
        self.array.validate().map_err(|e| inv(e.to_string()))?;
        self.grid.validate().map_err(inv)?;
        self.train.validate().map_err(|e| inv(e.to_string()))?;
        self.model_config().validate().map_err(|e| inv(e.to_string()))?;
        let p = &self.preprocess;
        if !(p.image_resize_fraction > 0.0 && p.image_resize_fraction <= 1.0) {
            return Err(inv("image_resize_fraction must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&p.failure_rate) {
            return Err(inv("failure_rate must lie in [0, 1]".into()));
        }
        if self.array.relays > self.scene.num_uavs {
            return Err(inv(format!("{} relays but only {} UAVs", self.array.relays, self.scene.num_uavs)));
        }
        if self.eval.thresholds.iter().any(|t| !t.is_finite()) {
            return Err(inv("thresholds must be finite".into()));
        }
        if self.eval.missing_uavs.iter().any(|&m| m > self.array.relays) {
            return Err(inv("missing_uavs exceeds the relay count".into()));
        }
        if self.eval.missing_views.iter().any(|&m| m > VIEW_COUNT) {
            return Err(inv(format!("missing_views exceeds {VIEW_COUNT}")));
        }
        Ok(())
    }

    pub fn num_links(&self) -> usize {
        self.scene.num_rsus * (1 + self.array.relays)
    }

    /// `[channels, height, width]` of one preprocessed view.
    pub fn image_shape(&self) -> [usize; 3] {
        let f = self.preprocess.image_resize_fraction;
        let [w, h] = self.scene.image_resolution;
        [
            crate::scene::CHANNELS,
            crate::percept::resized_dim(h, f),
            crate::percept::resized_dim(w, f),
        ]
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            fusion: self.model.fusion.clone(),
            arch: self.model.arch.clone(),
            image_shape: self.image_shape(),
            grid_shape: self.grid.shape,
            num_links: self.num_links(),
            num_lanes: self.scene.num_lanes,
            relays: self.array.relays,
            init_seed: self.model.init_seed,
        }
    }

    /// SHA-256 of everything that shapes generated data.
    pub fn generation_hash(&self) -> [u8; 32] {
        let parts = (&self.scene, &self.array, &self.grid, &self.preprocess);
        Sha256::digest(serde_json::to_vec(&parts).expect("config serializes")).into()
    }
}

fn apply_override(table: &mut toml::Table, o: &str) -> Result<(), ConfigError> {
    let (path, raw) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.to_string()))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(ConfigError::Override(o.to_string()));
    }
    let value = parse_value(raw.trim());
    let mut t = table;
    for k in &keys[..keys.len() - 1] {
        let entry = t.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry.as_table_mut().ok_or_else(|| ConfigError::Override(o.to_string()))?;
    }
    t.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

/// A TOML literal when it parses as one, a bare string otherwise.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}
