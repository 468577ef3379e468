//! Run configuration: an optional TOML file overlaid by command-line flags.
//!
//! The resolved configuration is written back into every run directory as
//! `config.toml`, so `--config <run>/config.toml` repeats a run exactly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use trustsim::corpus::GeneratorConfig;
use trustsim::eval::Binning;
use trustsim::trust::{FeatureSchema, TrainConfig};
use trustsim::{CorpusFormat, Error, QLearningConfig, Result, TableMode};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulated: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fallback_threshold: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dialogs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub users: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub episodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rollouts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trust_weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classifier: Option<ClassifierSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qlearning: Option<QLearningSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub binning: Option<Binning>,
}

/// Classifier hyperparameters; the shuffle seed comes from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub epochs: usize,
    pub lambda: f64,
    pub lag_window: usize,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        ClassifierSection {
            epochs: d.epochs,
            lambda: d.lambda,
            lag_window: d.schema.lag_window,
        }
    }
}

impl ClassifierSection {
    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            schema: FeatureSchema::with_lag_window(self.lag_window),
            epochs: self.epochs,
            lambda: self.lambda,
            seed,
        }
    }
}

/// Q-learning hyperparameters; the exploration seed comes from the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QLearningSection {
    pub learning_rate: f64,
    pub discount: f64,
    pub epsilon: f64,
    pub epsilon_min: f64,
    pub initial_q: f64,
}

impl Default for QLearningSection {
    fn default() -> Self {
        let d = QLearningConfig::default();
        QLearningSection {
            learning_rate: d.learning_rate,
            discount: d.discount,
            epsilon: d.epsilon,
            epsilon_min: d.epsilon_min,
            initial_q: d.initial_q,
        }
    }
}

impl QLearningSection {
    pub fn config(&self, seed: u64) -> QLearningConfig {
        QLearningConfig {
            learning_rate: self.learning_rate,
            discount: self.discount,
            epsilon: self.epsilon,
            epsilon_min: self.epsilon_min,
            initial_q: self.initial_q,
            seed,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Fields set in `flags` win over fields set here.
    pub fn overlay(self, flags: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: flags.$f.or(self.$f),)* } };
        }
        pick!(
            corpus, simulated, table, out, mode, format, seed, fallback_threshold, dialogs, users, episodes,
            rollouts, score_weight, trust_weight, train_fraction, duration_upper, generator, classifier,
            qlearning, binning
        )
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn table_mode(&self) -> Result<TableMode> {
        self.mode
            .as_deref()
            .unwrap_or("task-step")
            .parse()
            .map_err(Error::InvalidConfig)
    }

    pub fn corpus_format(&self) -> Result<CorpusFormat> {
        self.format.as_deref().unwrap_or("csv").parse().map_err(Error::InvalidConfig)
    }
}
