//! Experiment configuration file (TOML).
//!
//! ```toml
//! [experiment]
//! catalog_path = "catalog.txt"     # omit for the built-in snapshot
//! baseline_path = "baseline.txt"   # omit for the built-in snapshot
//! trials = 8
//! output_dir = "results"
//! # seeds = [1, 2, 3, 4, 5, 6, 7, 8]
//! remeasure_baseline = false
//!
//! [ga]
//! population_size = 50
//! generations = 25
//! rng_seed = 1
//!
//! [backend]
//! kind = "simulated"
//! runs_per_eval = 40
//!
//! [backend.simulated]
//! target_path = "target.txt"
//! base_runtime = 1.0
//! ```
//!
//! Unknown keys are rejected. Relative paths are resolved against the
//! directory containing the config file.

use std::fs;
use std::path::{Path, PathBuf};

use passgi_core::GAConfig;
use serde::{Deserialize, Serialize};

use crate::backend::BackendConfig;
use crate::error::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub catalog_path: Option<PathBuf>,
    pub baseline_path: Option<PathBuf>,
    pub trials: usize,
    pub output_dir: PathBuf,
    /// One seed per trial; when absent trial `i` uses `ga.rng_seed + i`.
    pub seeds: Option<Vec<u64>>,
    /// Measure the baseline again before every trial instead of once.
    pub remeasure_baseline: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            catalog_path: None,
            baseline_path: None,
            trials: 8,
            output_dir: PathBuf::from("results"),
            seeds: None,
            remeasure_baseline: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub ga: GAConfig,
    pub backend: BackendConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads the file and makes every relative path absolute with respect
    /// to the file's directory.
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = self.experiment.catalog_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.experiment.baseline_path.as_mut() {
            fix(p);
        }
        fix(&mut self.experiment.output_dir);
        if let Some(p) = self.backend.source_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.backend.workdir.as_mut() {
            fix(p);
        }
        if let Some(sim) = self.backend.simulated.as_mut() {
            fix(&mut sim.target_path);
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.ga.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.backend.validate().map_err(Error::Config)?;
        if self.experiment.trials == 0 {
            return Err(Error::Config("experiment.trials must be at least 1".into()));
        }
        if let Some(seeds) = &self.experiment.seeds {
            if seeds.len() != self.experiment.trials {
                return Err(Error::Config(format!(
                    "experiment.seeds has {} entries but trials = {}",
                    seeds.len(),
                    self.experiment.trials
                )));
            }
        }
        Ok(())
    }

    pub fn trial_seeds(&self) -> Vec<u64> {
        match &self.experiment.seeds {
            Some(s) => s.clone(),
            None => (0..self.experiment.trials as u64).map(|i| self.ga.rng_seed.wrapping_add(i)).collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
