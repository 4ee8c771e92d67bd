//! `[section]` / `key = value` configuration with one section per module.
//!
//! ```text
//! [pac]
//! theta = 0.5
//! delta = 0.8
//! nms_iou = 0.65
//!
//! [eval]
//! ap_range = "0.5:0.05:0.95"
//! score_thresh = 0.5
//!
//! [synth]
//! n_frames = 500
//! rho = 0.0
//!
//! [temporal]
//! k = 4
//! ```
//!
//! Every section and key is optional. Unknown keys are rejected by name.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gtconv::DEFAULT_SEQUENCE_LEN;
use crate::pac::{PacError, PacParams};
use crate::synth::{SynthConfig, SynthError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("[pac] {0}")]
    Pac(#[from] PacError),
    #[error("[synth] {0}")]
    Synth(#[from] SynthError),
    #[error("[eval] {0}")]
    Eval(#[from] crate::eval::EvalError),
    #[error("[temporal] k must be at least 1")]
    SequenceLen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PacSection {
    pub theta: f64,
    pub delta: f64,
    pub nms_iou: f64,
}

impl Default for PacSection {
    fn default() -> Self {
        let p = PacParams::default();
        Self {
            theta: p.theta(),
            delta: p.delta(),
            nms_iou: p.nms_iou(),
        }
    }
}

impl PacSection {
    pub fn params(&self) -> Result<PacParams, PacError> {
        PacParams::new(self.theta, self.delta, self.nms_iou)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub ap_range: String,
    pub score_thresh: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            ap_range: "0.5:0.05:0.95".to_string(),
            score_thresh: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TemporalSection {
    pub k: usize,
}

impl Default for TemporalSection {
    fn default() -> Self {
        Self {
            k: DEFAULT_SEQUENCE_LEN,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub pac: PacSection,
    pub eval: EvalSection,
    pub synth: SynthConfig,
    pub temporal: TemporalSection,
}

impl Config {
    /// Parses and validates every section.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().to_string()))?;
        cfg.pac.params()?;
        cfg.synth.validate()?;
        crate::eval::parse_threshold_range(&cfg.eval.ap_range)?;
        if cfg.temporal.k == 0 {
            return Err(ConfigError::SequenceLen);
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}
