//! On-disk catalog cache keyed by scenario and physics parameters.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::keys::sha256_hex;
use crate::model::Scenario;
use crate::sim::{enumerate_stacks, PhysParams, StackCatalog};

#[derive(Debug, Clone, Default)]
pub struct CatalogCache {
    dir: Option<PathBuf>,
}

impl CatalogCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        CatalogCache {
            dir: Some(dir.into()),
        }
    }

    /// Always recomputes.
    pub fn disabled() -> Self {
        CatalogCache { dir: None }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn path_for(&self, scenario: &Scenario, params: &PhysParams) -> Option<PathBuf> {
        let key = sha256_hex(format!("{}\n{}", params.digest(), scenario.to_json()).as_bytes());
        self.dir
            .as_ref()
            .map(|d| d.join(format!("{}-{}.json", scenario.id, &key[..16])))
    }

    pub fn catalog(&self, scenario: &Scenario, params: &PhysParams) -> Result<StackCatalog> {
        let Some(path) = self.path_for(scenario, params) else {
            return enumerate_stacks(scenario, params);
        };
        if let Ok(text) = std::fs::read_to_string(&path) {
            // unreadable entries are recomputed and overwritten
            if let Ok(c) = serde_json::from_str::<StackCatalog>(&text) {
                if c.scenario_id == scenario.id && c.params_digest == params.digest() {
                    return Ok(c);
                }
            }
        }
        let catalog = enumerate_stacks(scenario, params)?;
        let dir = path.parent().expect("cache path has a parent");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, catalog.to_json()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        Ok(catalog)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::vb6_scenario;

    #[test]
    fn hit_equals_fresh_enumeration() {
        let dir = tempfile::tempdir().unwrap();
        let cache = CatalogCache::new(dir.path());
        let s = vb6_scenario();
        let p = PhysParams::default();
        let first = cache.catalog(&s, &p).unwrap();
        let path = cache.path_for(&s, &p).unwrap();
        assert!(path.exists());
        assert_eq!(cache.catalog(&s, &p).unwrap(), first);

        std::fs::write(&path, "not json").unwrap();
        assert_eq!(cache.catalog(&s, &p).unwrap(), first);

        let other = PhysParams {
            support_inset: 0.01,
            ..p
        };
        assert_ne!(cache.path_for(&s, &other), Some(path));
        assert!(CatalogCache::disabled().path_for(&s, &p).is_none());
    }
}
