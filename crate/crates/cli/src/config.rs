//! TOML experiment configuration.

use std::fs;
use std::path::{Path, PathBuf};

use pass_core::classifier::TrainConfig;
use pass_core::selectors::SelectorConfig;
use pass_core::Error;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Idn,
    Symmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub n: usize,
    pub d: usize,
    pub classes: usize,
    pub separation: f64,
    pub noise_kind: NoiseKind,
    /// 0 leaves the labels clean.
    pub noise_rate: f64,
    pub test_fraction: f64,
}

/// Optimiser settings. The epoch count comes from `selector.total_epochs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub hidden_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub weight_decay: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            hidden_sizes: t.hidden_sizes,
            learning_rate: t.learning_rate,
            momentum: t.momentum,
            batch_size: t.batch_size,
            weight_decay: t.weight_decay,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub selector: SelectorConfig,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| CliError::validation(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden_sizes: self.train.hidden_sizes.clone(),
            learning_rate: self.train.learning_rate,
            momentum: self.train.momentum,
            batch_size: self.train.batch_size,
            epochs: self.selector.total_epochs,
            weight_decay: self.train.weight_decay,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let ds = &self.dataset;
        if ds.noise_rate != 0.0 && !(ds.noise_rate > 0.0 && ds.noise_rate <= 0.95) {
            return Err(Error::NoiseRate(ds.noise_rate).into());
        }
        if !(ds.test_fraction > 0.0 && ds.test_fraction < 1.0) {
            return Err(CliError::validation(format!(
                "test_fraction must be in (0, 1), got {}",
                ds.test_fraction
            )));
        }
        if ds.classes < 2 || ds.d < 2 || ds.n < ds.classes {
            return Err(CliError::validation(format!(
                "need n >= classes >= 2 and d >= 2 (got n={}, d={}, classes={})",
                ds.n, ds.d, ds.classes
            )));
        }
        if !(ds.separation > 0.0 && ds.separation.is_finite()) {
            return Err(CliError::validation("separation must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::validation("seeds must not be empty"));
        }
        self.selector.validate()?;
        self.train_config().validate()?;
        Ok(())
    }
}

/// Parses `"1,2,3"`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let seeds = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| CliError::validation(format!("invalid seed `{}`", t.trim())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if seeds.is_empty() {
        return Err(CliError::validation("seeds must not be empty"));
    }
    Ok(seeds)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seeds = [1, 2]

[dataset]
n = 200
d = 4
classes = 3
separation = 3.0
noise_kind = "idn"
noise_rate = 0.3
test_fraction = 0.2
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.seeds, vec![1, 2]);
        assert_eq!(cfg.selector, SelectorConfig::default());
        assert_eq!(cfg.train_config().epochs, cfg.selector.total_epochs);
        assert_eq!(cfg.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn rejects_bad_rate_and_unknown_keys() {
        let bad = MINIMAL.replace("noise_rate = 0.3", "noise_rate = 1.5");
        let err = ExperimentConfig::parse(&bad).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("noise_rate out of range"));

        let unknown = format!("{MINIMAL}\nbogus = 1\n");
        assert_eq!(ExperimentConfig::parse(&unknown).unwrap_err().code, 2);

        let no_seeds = MINIMAL.replace("seeds = [1, 2]", "seeds = []");
        assert_eq!(ExperimentConfig::parse(&no_seeds).unwrap_err().code, 2);
    }

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1, 2,3").unwrap(), vec![1, 2, 3]);
        assert!(parse_seeds("1,x").is_err());
    }
}
