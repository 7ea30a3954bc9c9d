//! Pipeline configuration, read from TOML.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::WindowRules;
use crate::evaluation::{BayesConfig, DiagramConfig};
use crate::optimizer::OptimizerConfig;
use crate::pattern::{LearnConfig, Qualification};
use crate::rebound::ReboundRule;
use crate::trading::StrategyParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub prices: PathBuf,
    /// CSV `date,annual_rate_percent`.
    pub risk_free: Option<PathBuf>,
    /// Used when no risk-free file is given.
    pub risk_free_constant_percent: Option<f64>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { prices: PathBuf::from("prices.csv"), risk_free: None, risk_free_constant_percent: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictionConfig {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub step: i64,
}

impl Default for PredictionConfig {
    fn default() -> Self {
        Self {
            start: NaiveDate::from_ymd_opt(1975, 1, 1).unwrap(),
            end: NaiveDate::from_ymd_opt(2009, 7, 22).unwrap(),
            step: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct EvaluationConfig {
    pub diagram: DiagramConfig,
    pub bayes: BayesConfig,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TradingConfig {
    pub strategies: Vec<StrategyParams>,
    pub draws: usize,
    pub cost_bps: f64,
}

impl Default for TradingConfig {
    fn default() -> Self {
        Self {
            strategies: vec![
                StrategyParams { threshold: 0.2, offset: 10, holding: 10 },
                StrategyParams { threshold: 0.7, offset: 30, holding: 10 },
            ],
            draws: 1000,
            cost_bps: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub data: DataConfig,
    pub windows: WindowRules,
    pub optimizer: OptimizerConfig,
    pub rebounds: ReboundRule,
    pub learning: LearnConfig,
    pub prediction: PredictionConfig,
    pub evaluation: EvaluationConfig,
    pub trading: TradingConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            data: DataConfig::default(),
            windows: WindowRules::default(),
            optimizer: OptimizerConfig::default(),
            rebounds: ReboundRule::default(),
            learning: LearnConfig::default(),
            prediction: PredictionConfig::default(),
            evaluation: EvaluationConfig::default(),
            trading: TradingConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse { path: PathBuf::new(), message: e.to_string() })
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out);
        fix(&mut self.data.prices);
        if let Some(p) = self.data.risk_free.as_mut() {
            fix(p);
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn qualifications(&self) -> &[Qualification] {
        &self.learning.qualifications
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.windows.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.optimizer.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.rebounds.half_width < 1 {
            return Err(ConfigError::Invalid("rebound half_width must be at least 1".into()));
        }
        if self.prediction.step < 1 {
            return Err(ConfigError::Invalid("prediction step must be at least 1".into()));
        }
        if self.prediction.start > self.prediction.end {
            return Err(ConfigError::Invalid("prediction start is after its end".into()));
        }
        if self.learning.cutoff > self.prediction.start {
            return Err(ConfigError::Invalid("learning cutoff is after the prediction start".into()));
        }
        if self.learning.qualifications.is_empty() {
            return Err(ConfigError::Invalid("at least one feature qualification is required".into()));
        }
        if self.evaluation.diagram.alarm_duration < 1 {
            return Err(ConfigError::Invalid("alarm duration must be at least 1 day".into()));
        }
        for s in &self.trading.strategies {
            if s.offset < 0 || s.holding < 0 {
                return Err(ConfigError::Invalid("strategy offset and holding must be non-negative".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip() {
        let c = PipelineConfig::default();
        let back = PipelineConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(c, back);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c = PipelineConfig::from_toml_str(
            r#"
seed = 7
[data]
prices = "sp.csv"
[windows]
dt1_step = 100
[learning]
cutoff = "2003-01-01"
qualifications = [{ alpha = 10, beta = 200 }, { alpha = 20, beta = 1000 }]
[prediction]
start = "2003-01-01"
"#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.windows.dt1_step, 100);
        assert_eq!(c.windows.dt2_step, 50);
        assert_eq!(c.learning.qualifications.len(), 2);
        assert_eq!(c.learning.near_days, 10.0);
        assert_eq!(c.trading.strategies.len(), 2);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml_str("[data]\nprice = \"x\"\n").is_err());
    }

    #[test]
    fn cutoff_after_prediction_start_is_invalid() {
        let mut c = PipelineConfig::default();
        c.learning.cutoff = NaiveDate::from_ymd_opt(1990, 1, 1).unwrap();
        assert!(c.validate().is_err());
    }
}
