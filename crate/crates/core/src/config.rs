//! Single JSON file holding every tunable; missing sections take defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::EndpointConfig;
use crate::dataset::DatasetConfig;
use crate::error::{Error, Result};
use crate::eval::SuiteConfig;
use crate::model::NoiseConfig;
use crate::scenario::GenConfig;
use crate::sim::PhysParams;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub generator: GenConfig,
    pub physics: PhysParams,
    pub noise: NoiseConfig,
    pub dataset: DatasetConfig,
    pub suite: SuiteConfig,
    pub endpoint: EndpointConfig,
    /// Catalog cache directory; `None` disables caching.
    pub cache_dir: Option<String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Config = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.physics.validate()?;
        if self.dataset.preference_sets.is_empty() || self.suite.preference_sets.is_empty() {
            return Err(Error::invalid(
                "config",
                "preference set lists must not be empty",
            ));
        }
        for t in [self.dataset.threshold, self.suite.threshold] {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::invalid("config", "threshold must lie in [0, 1]"));
            }
        }
        if self.suite.budget_factor == 0 {
            return Err(Error::invalid("config", "budget_factor must be at least 1"));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips() {
        let c = Config::default();
        assert_eq!(serde_json::from_str::<Config>(&c.to_json()).unwrap(), c);
        c.validate().unwrap();
    }

    #[test]
    fn partial_file_fills_defaults() {
        let c: Config = serde_json::from_str(r#"{"generator": {"master_seed": 7}}"#).unwrap();
        assert_eq!(c.generator.master_seed, 7);
        assert_eq!(c.generator.boxes, [3, 6]);
        assert_eq!(c.suite.scenarios_per_set, 40);
    }

    #[test]
    fn load_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, "{").unwrap();
        match Config::load(&p) {
            Err(Error::Json { path, .. }) => assert_eq!(path, p),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Config::load(&dir.path().join("none.json")),
            Err(Error::Io { .. })
        ));
    }
}
