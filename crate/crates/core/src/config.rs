//! Tunables for every pipeline stage, loadable from a TOML document.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bridge::DEFAULT_CUTOFF;
use crate::dataset::{R2fLimits, DEFAULT_MASK_PROB, SEQUENCE_LEN};
use crate::dbm::{DbmOptions, MatchWeights};
use crate::metrics::DEFAULT_THRESHOLD;
use crate::postprocess::{KdeParams, PostprocessConfig, DEFAULT_FAR_THRESHOLD, DEFAULT_MAX_ITERS};
use crate::skyline::MelodyWeights;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Parse(String),
    #[error("config key `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub mask_prob: f64,
    pub cutoff: f64,
    pub far_threshold: u8,
    pub max_iters: usize,
    pub ttest_threshold: f64,
    pub kde: KdeParams,
    pub melody: MelodyWeights,
    pub matching: MatchWeights,
    pub r2f: R2fLimits,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: None,
            mask_prob: DEFAULT_MASK_PROB,
            cutoff: DEFAULT_CUTOFF,
            far_threshold: DEFAULT_FAR_THRESHOLD,
            max_iters: DEFAULT_MAX_ITERS,
            ttest_threshold: DEFAULT_THRESHOLD,
            kde: KdeParams::default(),
            melody: MelodyWeights::default(),
            matching: MatchWeights::default(),
            r2f: R2fLimits::default(),
        }
    }
}

fn check(ok: bool, key: &'static str, message: impl FnOnce() -> String) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            key,
            message: message(),
        })
    }
}

fn non_negative(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite() && *v >= 0.0)
}

impl PipelineConfig {
    /// Parses and validates. Missing keys take their defaults; unknown keys
    /// are rejected.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: PipelineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        check((0.0..=1.0).contains(&self.mask_prob), "mask_prob", || {
            format!("{} outside [0, 1]", self.mask_prob)
        })?;
        check(self.cutoff > 0.0 && self.cutoff < 1.0, "cutoff", || {
            format!("{} outside (0, 1)", self.cutoff)
        })?;
        check(self.far_threshold > 0, "far_threshold", || "must be positive".into())?;
        check(self.max_iters > 0, "max_iters", || "must be positive".into())?;
        check(self.ttest_threshold.is_finite(), "ttest_threshold", || {
            "must be finite".into()
        })?;
        let kde = &self.kde;
        check(
            kde.initial_bandwidth.is_finite() && kde.initial_bandwidth > 0.0,
            "kde.initial_bandwidth",
            || format!("{} must be positive", kde.initial_bandwidth),
        )?;
        check(kde.decay > 0.0 && kde.decay < 1.0, "kde.decay", || {
            format!("{} outside (0, 1)", kde.decay)
        })?;
        check(kde.floor.is_finite() && kde.floor > 0.0, "kde.floor", || {
            format!("{} must be positive", kde.floor)
        })?;
        check(kde.grid_step > 0.0 && kde.grid_step <= 1.0, "kde.grid_step", || {
            format!("{} outside (0, 1]", kde.grid_step)
        })?;
        let m = &self.melody;
        check(
            non_negative(&[m.mean_pitch, m.coverage, m.variety]) && m.mean_pitch + m.coverage + m.variety > 0.0,
            "melody",
            || "weights must be non-negative and not all zero".into(),
        )?;
        let w = &self.matching;
        check(non_negative(&[w.hit, w.miss, w.density]), "matching", || {
            "weights must be non-negative".into()
        })?;
        check(
            (1..=SEQUENCE_LEN).contains(&self.r2f.max_input_tokens),
            "r2f.max_input_tokens",
            || format!("{} outside [1, {SEQUENCE_LEN}]", self.r2f.max_input_tokens),
        )?;
        check(
            (2..=SEQUENCE_LEN).contains(&self.r2f.max_output_tokens),
            "r2f.max_output_tokens",
            || format!("{} outside [2, {SEQUENCE_LEN}]", self.r2f.max_output_tokens),
        )?;
        Ok(())
    }

    pub fn postprocess(&self) -> PostprocessConfig {
        PostprocessConfig {
            kde: self.kde,
            far_threshold: self.far_threshold,
            max_iters: self.max_iters,
        }
    }

    pub fn dbm(&self) -> DbmOptions {
        DbmOptions {
            melody: self.melody,
            matching: self.matching,
        }
    }
}
