use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::TOOL_VERSION;
use crate::error::{Error, Result};
use crate::experiments::{ExpertConfig, ScenarioConfig};
use crate::flow::{ArtifactMeta, TrainConfig};
use crate::mask::{AtomicGrid, BuildConfig, InputGrid};
use crate::mppi::MppiConfig;
use crate::planner::PlanConfig;
use crate::vehicle::{PidGains, VehicleLimits};

/// File name of the resolved configuration echoed into the output directory.
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: PathBuf,
    pub model: PathBuf,
    pub cache: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: "out/dataset.csv".into(),
            model: "out/model.gpnf".into(),
            cache: "out/cache.gpmc".into(),
            output_dir: "out".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Bins per prior dimension (K); the cache has K⁴ cells.
    pub bins: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { bins: 12 }
    }
}

/// Everything a pipeline run depends on. Every field has a default, so an
/// empty file is a valid configuration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seeds the synthetic expert data.
    pub seed: u64,
    pub paths: Paths,
    pub expert: ExpertConfig,
    pub train: TrainConfig,
    pub grid: GridConfig,
    pub roi: AtomicGrid,
    pub cache: BuildConfig,
    pub planner: PlanConfig,
    pub pid: PidGains,
    pub vehicle: VehicleLimits,
    pub mppi: MppiConfig,
    pub scenario: ScenarioConfig,
}

impl PipelineConfig {
    /// Strict parse: unknown keys are errors, missing keys take defaults.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        InputGrid::new(self.grid.bins).map_err(|e| Error::Config(format!("grid: {e}")))?;
        self.roi.validate()?;
        if !(self.cache.ds > 0.0 && self.cache.ds.is_finite()) || self.cache.n_recon < 2 {
            return Err(Error::Config("cache: ds must be positive and n_recon >= 2".into()));
        }
        if self.expert.n == 0 || !(self.expert.noise >= 0.0) || self.expert.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Config("expert: need n > 0 and non-negative noise and weights".into()));
        }
        if !(self.vehicle.a_max > 0.0 && self.vehicle.psidot_max > 0.0 && self.vehicle.psi_max > 0.0 && self.vehicle.wheelbase > 0.0) {
            return Err(Error::Config("vehicle: limits must be positive".into()));
        }
        self.train.validate()?;
        self.planner.validate()?;
        self.mppi.validate()?;
        self.scenario.validate()
    }

    /// The fully resolved configuration, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration is always representable")
    }

    /// SHA-256 of [`Self::to_toml`].
    pub fn hash(&self) -> [u8; 32] {
        Sha256::digest(self.to_toml().as_bytes()).into()
    }

    pub fn meta(&self) -> ArtifactMeta {
        ArtifactMeta {
            config_hash: self.hash(),
            tool_version: TOOL_VERSION.to_string(),
        }
    }

    pub fn input_grid(&self) -> InputGrid {
        InputGrid::new(self.grid.bins).expect("validated")
    }

    /// Writes the resolved configuration into the output directory.
    pub fn echo(&self) -> Result<PathBuf> {
        let dir = &self.paths.output_dir;
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let path = dir.join(RESOLVED_CONFIG);
        fs::write(&path, self.to_toml()).map_err(|e| Error::file(&path, e))?;
        Ok(path)
    }
}
