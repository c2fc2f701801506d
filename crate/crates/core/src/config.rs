//! Run configuration shared by the CLI commands.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::csg::{CsgConfig, GapMode};
use crate::layer::LAYER_COUNT;
use crate::qsr::QsrConfig;
use crate::tracker::TrackerConfig;

/// All pipeline parameters in one place. Field names match the CLI flags
/// and the config file keys.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Consecutive identical observations required to change a committed
    /// relation state.
    pub theta: u32,
    /// Look-back/look-ahead window (in frames) for precondition and effect
    /// collection.
    pub zeta: u32,
    /// Weight gain per frame of re-detection gap.
    pub sigma: f64,
    /// Weight decay per unobserved frame.
    pub decay: f64,
    /// Weight below which a committed relation is pruned.
    pub omega_min: f64,
    /// Detection confidence threshold.
    pub alpha: f64,
    /// Per-layer relation confidence thresholds
    /// (functional, topological, part_whole, attributive).
    pub layer_thresholds: [f64; LAYER_COUNT],
    /// Weight update mode for re-detection gaps.
    pub gap_mode: GapMode,
    /// Class labels whose nodes count as agents.
    pub agent_classes: BTreeSet<String>,
    pub tracker: TrackerConfig,
    pub qsr: QsrConfig,
    /// Retained history rows before the ring buffer drops old ones.
    pub history_cap: usize,
    /// RNG seed for simulation and evaluation commands.
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            theta: 3,
            zeta: 10,
            sigma: 0.5,
            decay: 0.02,
            omega_min: 0.05,
            alpha: 0.194,
            layer_thresholds: [0.3; LAYER_COUNT],
            gap_mode: GapMode::Linear,
            agent_classes: ["person", "hand"].iter().map(|s| s.to_string()).collect(),
            tracker: TrackerConfig::default(),
            qsr: QsrConfig::default(),
            history_cap: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let config: RunConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.theta < 1 {
            return Err(ConfigError::Invalid("theta must be >= 1".into()));
        }
        for (name, value) in [("alpha", self.alpha), ("omega_min", self.omega_min)] {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Invalid(format!("{name} {value} outside [0,1]")));
            }
        }
        for t in self.layer_thresholds {
            if !t.is_finite() || !(0.0..=1.0).contains(&t) {
                return Err(ConfigError::Invalid(format!("layer threshold {t} outside [0,1]")));
            }
        }
        for (name, value) in [("sigma", self.sigma), ("decay", self.decay)] {
            if !value.is_finite() || value < 0.0 {
                return Err(ConfigError::Invalid(format!("{name} must be >= 0, got {value}")));
            }
        }
        if !(0.0..=1.0).contains(&self.qsr.holding_iou_threshold) {
            return Err(ConfigError::Invalid("holding_iou_threshold outside [0,1]".into()));
        }
        Ok(())
    }

    pub fn csg_config(&self) -> CsgConfig {
        CsgConfig {
            refine_window: self.theta,
            redetection_gain: self.sigma,
            decay: self.decay,
            prune_threshold: self.omega_min,
            history_cap: self.history_cap,
            inactive_after: self.tracker.max_age,
            agent_classes: self.agent_classes.clone(),
            gap_mode: self.gap_mode,
        }
    }
}
