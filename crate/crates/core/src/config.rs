//! TOML run configuration.
//!
//! ```toml
//! [scoring.minutiae]
//! top_n = 120
//!
//! [scoring.weights]
//! mt1 = 1.0
//! mt2 = 1.0
//! tt = 2.0
//!
//! [search]
//! workers = 4
//! top_k = 100
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::DEFAULT_BORDA_LIST_LEN;
use crate::scoring::ScoringConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    pub workers: usize,
    pub top_k: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { workers: 1, top_k: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionConfig {
    pub borda_list_len: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            borda_list_len: DEFAULT_BORDA_LIST_LEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scoring: ScoringConfig,
    pub search: SearchConfig,
    pub fusion: FusionConfig,
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Config = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let w = &self.scoring.weights;
        if [w.mt1, w.mt2, w.tt].iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Config("fusion weights must be non-negative".into()));
        }
        for (name, m) in [("minutiae", &self.scoring.minutiae), ("texture", &self.scoring.texture)] {
            if m.top_n == 0 || m.max_iterations == 0 {
                return Err(Error::Config(format!("{name}: top_n and max_iterations must be positive")));
            }
            if m.tolerance.is_nan() || m.tolerance <= 0.0 {
                return Err(Error::Config(format!("{name}: tolerance must be positive")));
            }
        }
        if self.search.top_k == 0 || self.fusion.borda_list_len == 0 {
            return Err(Error::Config("top_k and borda_list_len must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let c = Config::from_toml_str("[search]\nworkers = 4\n[scoring.minutiae]\ntop_n = 60\n").unwrap();
        assert_eq!(c.search.workers, 4);
        assert_eq!(c.scoring.minutiae.top_n, 60);
        assert_eq!(c.scoring.texture.top_n, 200);
        assert_eq!(c.scoring.weights.tt, 2.0);
    }

    #[test]
    fn round_trip_and_rejections() {
        let c = Config::default();
        assert_eq!(Config::from_toml_str(&c.to_toml_string()).unwrap(), c);
        assert!(Config::from_toml_str("[scoring.weights]\ntt = -1.0\n").is_err());
        assert!(Config::from_toml_str("bogus = 1\n").is_err());
    }
}
