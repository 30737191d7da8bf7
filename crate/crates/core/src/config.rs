//! Run configuration. Every knob has a default, so an empty JSON object is a
//! valid config; unknown fields are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dynamics::StepConfig;
use crate::error::{Error, Result};
use crate::evolution::EvoConfig;
use crate::sensors::NoiseSpec;
use crate::world::{ArenaSpec, RobotSpec, TaskConfig};

/// Everything a single episode depends on besides seeds and controllers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub arena: ArenaSpec,
    pub robot: RobotSpec,
    pub noise: NoiseSpec,
    pub step: StepConfig,
    pub task: TaskConfig,
}

impl SimConfig {
    pub fn noiseless() -> Self {
        SimConfig {
            noise: NoiseSpec::noiseless(),
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.arena.validate()?;
        self.robot.validate()?;
        self.noise.validate()?;
        self.step.validate()?;
        self.task.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PostEvalSettings {
    pub trials: usize,
    pub seed: u64,
}

impl Default for PostEvalSettings {
    fn default() -> Self {
        PostEvalSettings { trials: 10, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub arena: ArenaSpec,
    pub robot: RobotSpec,
    pub noise: NoiseSpec,
    pub step: StepConfig,
    pub task: TaskConfig,
    pub evolution: EvoConfig,
    pub posteval: PostEvalSettings,
    /// Write a best-genome snapshot every this many generations.
    pub snapshot_every: usize,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        RunConfig {
            arena: sim.arena,
            robot: sim.robot,
            noise: sim.noise,
            step: sim.step,
            task: sim.task,
            evolution: EvoConfig::default(),
            posteval: PostEvalSettings::default(),
            snapshot_every: 10,
            output_dir: PathBuf::from("runs/latest"),
        }
    }
}

impl RunConfig {
    pub fn sim(&self) -> SimConfig {
        SimConfig {
            arena: self.arena,
            robot: self.robot,
            noise: self.noise,
            step: self.step,
            task: self.task,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sim().validate()?;
        self.evolution.validate()?;
        if self.posteval.trials == 0 {
            return Err(Error::config("posteval.trials", "must be at least 1"));
        }
        if self.snapshot_every == 0 {
            return Err(Error::config("snapshot_every", "must be at least 1"));
        }
        Ok(())
    }

    /// Parses and validates a JSON config. Errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::config(
                if field == "." { "<root>".into() } else { field },
                e.inner().to_string(),
            )
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }
}
