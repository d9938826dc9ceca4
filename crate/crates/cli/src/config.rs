//! JSON run configuration. Unknown keys are rejected and every run writes the
//! resolved document, defaults expanded, next to its outputs.

use std::path::{Path, PathBuf};

use lanczos_net::nn::ModelConfig;
use lanczos_net::train::{Task, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{read_file, CliError, CliResult};
use crate::sbm::SbmSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Synthetic node classification.
    Sbm { spec: SbmSpec },
    /// Node classification from files; relative paths resolve against the config's directory.
    Files {
        graph: PathBuf,
        features: PathBuf,
        labels: PathBuf,
        split: PathBuf,
    },
    /// Graph-level regression over a graph set file.
    GraphSet { path: PathBuf, split: PathBuf },
}

impl DataSource {
    pub fn task(&self) -> Task {
        match self {
            DataSource::GraphSet { .. } => Task::GraphRegression,
            _ => Task::NodeClassification,
        }
    }
}

/// Optional training settings; absent entries take the task defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    #[serde(default)]
    pub learning_rate: Option<f64>,
    #[serde(default)]
    pub weight_decay: Option<f64>,
    #[serde(default)]
    pub max_epochs: Option<usize>,
    #[serde(default)]
    pub early_stop_window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))?;
        cfg.model.validate()?;
        if let DataSource::Sbm { spec } = &cfg.data {
            spec.validate()?;
        }
        Ok(cfg)
    }

    /// Loads a config and anchors relative data paths at its directory.
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut cfg = Self::from_json(&read_file(path)?).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let anchor = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut cfg.data {
            DataSource::Sbm { .. } => {}
            DataSource::Files {
                graph,
                features,
                labels,
                split,
            } => {
                for p in [graph, features, labels, split] {
                    anchor(p);
                }
            }
            DataSource::GraphSet { path, split } => {
                anchor(path);
                anchor(split);
            }
        }
        Ok(cfg)
    }

    pub fn train_config(&self, seed: u64) -> CliResult<TrainConfig> {
        let mut t = TrainConfig::for_task(self.data.task(), seed);
        let s = &self.train;
        t.learning_rate = s.learning_rate.unwrap_or(t.learning_rate);
        t.weight_decay = s.weight_decay.unwrap_or(t.weight_decay);
        t.max_epochs = s.max_epochs.unwrap_or(t.max_epochs);
        t.early_stop_window = s.early_stop_window.unwrap_or(t.early_stop_window);
        t.validate()?;
        Ok(t)
    }

    /// The same run with every default filled in and the seed fixed.
    pub fn resolved(&self, seed: u64) -> CliResult<Self> {
        let t = self.train_config(seed)?;
        let mut out = self.clone();
        out.seed = seed;
        out.train = TrainSettings {
            learning_rate: Some(t.learning_rate),
            weight_decay: Some(t.weight_decay),
            max_epochs: Some(t.max_epochs),
            early_stop_window: Some(t.early_stop_window),
        };
        if let DataSource::Sbm { spec } = &mut out.data {
            spec.seed = Some(spec.seed.unwrap_or(seed));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}
