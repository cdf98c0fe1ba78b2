use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::curve::DEFAULT_WINDOW;
use crate::data::{load_csv, CsvSchema, Dataset, OutcomeDirection};
use crate::synthetic::{generate, SyntheticSpec};
use crate::welfare::{PipelineConfig, SweepConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSource {
    pub path: PathBuf,
    pub features: Vec<String>,
    pub treatment: String,
    pub outcome: String,
    pub direction: OutcomeDirection,
    #[serde(default = "comma")]
    pub delimiter: char,
    /// Defaults to the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Design treatment probability, if known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub known_propensity: Option<f64>,
}

fn comma() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Csv(CsvSource),
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_window() -> usize {
    DEFAULT_WINDOW
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { window: DEFAULT_WINDOW }
    }
}

/// Everything one invocation needs. Serialised as TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out_dir: PathBuf,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub curve: CurveConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    /// Default synthetic dataset with every setting at its default.
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: default_out(),
            dataset: DatasetSource::Synthetic(SyntheticSpec::default()),
            pipeline: PipelineConfig::default(),
            sweep: SweepConfig::default(),
            curve: CurveConfig::default(),
        }
    }
}

pub const EFFECTIVE_CONFIG: &str = "config.effective.toml";

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; a relative CSV path is resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let DatasetSource::Csv(src) = &mut cfg.dataset {
            if src.path.is_relative() {
                if let Some(dir) = path.parent() {
                    let joined = dir.join(&src.path);
                    src.path = std::path::absolute(&joined).unwrap_or(joined);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overrides the run seed and, for synthetic data, the generator seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let DatasetSource::Synthetic(spec) = &mut self.dataset {
            spec.seed = seed;
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed {} exceeds {}", self.seed, i64::MAX)));
        }
        match &self.dataset {
            DatasetSource::Synthetic(spec) => spec.validate()?,
            DatasetSource::Csv(src) => {
                if src.features.is_empty() {
                    return Err(Error::Config("csv source lists no feature columns".into()));
                }
            }
        }
        if self.curve.window < 2 {
            return Err(Error::Config(format!(
                "curve window {} must be at least 2",
                self.curve.window
            )));
        }
        self.pipeline.validate()?;
        self.sweep.validate()
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        match &self.dataset {
            DatasetSource::Synthetic(spec) => Ok(generate(spec)?.0),
            DatasetSource::Csv(src) => {
                let schema = CsvSchema {
                    features: src.features.clone(),
                    treatment: src.treatment.clone(),
                    outcome: src.outcome.clone(),
                    delimiter: src.delimiter,
                };
                let ds = load_csv(&src.path, &schema, src.direction)?.with_known_propensity(src.known_propensity)?;
                Ok(match &src.name {
                    Some(name) => rename(ds, name)?,
                    None => ds,
                })
            }
        }
    }
}

fn rename(ds: Dataset, name: &str) -> Result<Dataset> {
    let renamed = Dataset::new(
        name,
        ds.x().clone(),
        ds.w().to_vec(),
        ds.y().to_vec(),
        ds.outcome_direction(),
    )?;
    renamed
        .with_feature_names(ds.feature_names().to_vec())?
        .with_known_propensity(ds.known_propensity())
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
seed = 4

[dataset.synthetic]
n = 500
d = 6
noise_sd = 1.0
treat_fraction = 0.5
rho = 0.8
te_scale = 1.0

[pipeline]
te_mode = "oracle_pseudo"

[pipeline.crossfit.outcome]
kind = "ridge_linear"

[sweep]
k_values = [0.0, 0.1]
bootstrap_reps = 10
welfare = [{ kind = "utilitarian" }, { kind = "weighted_utilitarian", alpha = 1.5 }]
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = RunConfig::from_toml_str(EXAMPLE).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.pipeline.crossfit.n_folds, 2);
        assert_eq!(cfg.sweep.budget, 0.2);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = EXAMPLE.replace("seed = 4", "sed = 4");
        assert!(matches!(RunConfig::from_toml_str(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn alpha_grid_above_cap_rejected() {
        let bad = format!("{EXAMPLE}\n[sweep.alpha_grid]\nlo = 0.0\nhi = 12.0\nstep = 0.25\n");
        assert!(RunConfig::from_toml_str(&bad).is_err());
    }
}
