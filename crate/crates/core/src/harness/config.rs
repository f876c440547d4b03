//! Experiment configuration read from TOML.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{self, Dataset, Dgp, PreprocessConfig};
use crate::error::{Error, Result};
use crate::model::{DEFAULT_ALPHA, DEFAULT_COMMITTEE_SIZE};
use crate::sac::SacConfig;
use crate::selectors::{EgalConfig, SelectorKind};

/// Environment variable that overrides `experiment.output_dir`.
pub const OUTPUT_DIR_ENV: &str = "WIGS_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    TwoRegime,
    ThreeRegime,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DatasetSource,
    /// Sample size for the built-in generators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Seed for the built-in generators.
    #[serde(default)]
    pub seed: u64,
    /// CSV file, resolved against the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub preprocessing: PreprocessConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    pub initial_fraction: f64,
    pub replications: usize,
    pub base_seed: u64,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            initial_fraction: 0.05,
            replications: 10,
            base_seed: 0,
            parallelism: 1,
            output_dir: PathBuf::from("wigs-output"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub alpha: f64,
    pub cv_folds: usize,
    pub committee_size: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            cv_folds: 5,
            committee_size: DEFAULT_COMMITTEE_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub experiment: ExperimentSettings,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub sac: SacConfig,
    #[serde(default)]
    pub egal: EgalConfig,
    pub methods: Vec<SelectorKind>,
}

impl ExperimentConfig {
    /// A built-in DGP config with default settings for the given methods.
    pub fn synthetic(source: DatasetSource, n: usize, methods: Vec<SelectorKind>) -> Self {
        Self {
            dataset: DatasetConfig {
                source,
                n: Some(n),
                seed: 0,
                path: None,
                preprocessing: PreprocessConfig::default(),
            },
            experiment: ExperimentSettings::default(),
            model: ModelConfig::default(),
            sac: SacConfig::default(),
            egal: EgalConfig::default(),
            methods,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and applies the output-directory environment override.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
            cfg.experiment.output_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self.dataset.source {
            DatasetSource::Csv if self.dataset.path.is_none() => {
                return bad("dataset.path is required for source = \"csv\"".into())
            }
            DatasetSource::TwoRegime | DatasetSource::ThreeRegime
                if self.dataset.n.unwrap_or(0) < 2 =>
            {
                return bad("dataset.n must be at least 2 for a built-in generator".into())
            }
            _ => {}
        }
        let e = &self.experiment;
        if !(e.initial_fraction > 0.0 && e.initial_fraction < 1.0) {
            return bad(format!(
                "experiment.initial_fraction {} outside (0, 1)",
                e.initial_fraction
            ));
        }
        if e.replications == 0 {
            return bad("experiment.replications must be at least 1".into());
        }
        if e.base_seed.checked_add(e.replications as u64).is_none() {
            return bad("experiment.base_seed + replications overflows".into());
        }
        if !(self.model.alpha >= 0.0) || !self.model.alpha.is_finite() {
            return bad(format!(
                "model.alpha {} must be finite and non-negative",
                self.model.alpha
            ));
        }
        if self.model.cv_folds < 2 {
            return bad("model.cv_folds must be at least 2".into());
        }
        if self.model.committee_size < 2 {
            return bad("model.committee_size must be at least 2".into());
        }
        if self.egal.bandwidth_sample < 2 || !(0.0..=1.0).contains(&self.egal.diversity_quantile) {
            return bad(
                "egal.bandwidth_sample must be >= 2 and egal.diversity_quantile in [0, 1]".into(),
            );
        }
        self.sac.validate()?;
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        let mut labels = BTreeSet::new();
        for m in &self.methods {
            if let SelectorKind::Wigs { policy } = m {
                policy
                    .validate()
                    .map_err(|err| Error::Config(format!("{}: {err}", m.label())))?;
            }
            if !labels.insert(m.label()) {
                return bad(format!("method {} listed twice", m.label()));
            }
        }
        Ok(())
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.experiment.replications as u64)
            .map(|i| self.experiment.base_seed + i)
            .collect()
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        let d = &self.dataset;
        match d.source {
            DatasetSource::TwoRegime => Dgp::TwoRegime.sample(d.n.unwrap_or(0), d.seed),
            DatasetSource::ThreeRegime => Dgp::ThreeRegime.sample(d.n.unwrap_or(0), d.seed),
            DatasetSource::Csv => {
                let path = d
                    .path
                    .as_deref()
                    .ok_or_else(|| Error::Config("dataset.path missing".into()))?;
                data::load_csv(path, &d.preprocessing)
            }
        }
    }
}
