//! Run configuration file (TOML).
//!
//! Every key is optional and falls back to the value of [`RunConfig::default`];
//! unknown keys are rejected.
//!
//! ```toml
//! seed = 0
//! scenes = 20
//! steps = 100
//! output = "out"
//!
//! [scene]
//! vehicles = 8
//! extents = { min_range = 10.0, max_range = 45.0 }
//!
//! [sensor]
//! max_range = 70.0
//! rotation_rate_hz = 2.0
//! rays_per_degree = 4
//!
//! [trajectory]
//! speed = 10.0
//! duration = 0.5
//! curvature = 0.01
//!
//! [attack]
//! mode = "full"
//! branch = "classification"
//! eps_t = 0.1
//! eps_r = 0.01
//! iters = 20
//!
//! [detector]
//! refine = true
//!
//! [eval]
//! iou_threshold = 0.7
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skewscan_core::attack::AttackConfig;
use skewscan_core::detector::DetectorConfig;
use skewscan_core::metrics::EvalConfig;
use skewscan_core::scene::SensorModel;

use crate::error::{Error, Result};
use crate::pipeline::{SceneConfig, TrajectoryConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of the first scene; scene `k` of a suite uses `seed + k`.
    pub seed: u64,
    /// Scenes in a simulated suite (`attack` or `eval` without `--input`, and `sweep-params`).
    pub scenes: usize,
    /// Interpolation steps `N`, one per packet.
    pub steps: usize,
    pub output: PathBuf,
    pub scene: SceneConfig,
    pub sensor: SensorModel,
    pub trajectory: TrajectoryConfig,
    pub attack: AttackConfig,
    pub detector: DetectorConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenes: 20,
            steps: 100,
            output: PathBuf::from("out"),
            scene: SceneConfig::default(),
            sensor: SensorModel::default(),
            trajectory: TrajectoryConfig::default(),
            attack: AttackConfig::default(),
            detector: DetectorConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Usage(format!("cannot serialize config: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    /// Checks every section.
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Usage("steps must be positive".into()));
        }
        if self.scenes == 0 {
            return Err(Error::Usage("scenes must be positive".into()));
        }
        self.sensor.validate()?;
        self.attack.validate()?;
        self.detector.validate()?;
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.scenes as u64).map(|k| self.seed.wrapping_add(k)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trip() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(RunConfig::parse(&text, Path::new("x")).unwrap(), cfg);
    }

    #[test]
    fn empty_file_is_default() {
        assert_eq!(RunConfig::parse("", Path::new("x")).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        let e = RunConfig::parse("[attack]\nepsilon = 0.1\n", Path::new("c.toml")).unwrap_err();
        assert!(matches!(e, Error::Format { .. }));
        assert!(e.to_string().contains("epsilon"), "{e}");
        assert!(RunConfig::parse("bogus = 1\n", Path::new("c.toml")).is_err());
    }

    #[test]
    fn module_doc_example_parses() {
        let doc = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let cfg = RunConfig::parse(&doc, Path::new("doc")).unwrap();
        assert_eq!(cfg.scenes, 20);
        assert!(cfg.validate().is_ok());
    }
}
