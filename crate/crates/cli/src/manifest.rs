//! Directory manifests: the list of samples a job wrote or failed on.

use std::path::Path;

use mesoshrink_core::io::write_atomic;
use mesoshrink_core::Scenario;
use serde::{Deserialize, Serialize};

use crate::config::JobConfig;
use crate::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub index: usize,
    pub stem: String,
    pub seed: u64,
    /// Per-sample parameter of derived datasets (smoothing threshold or
    /// erased thickness).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub index: usize,
    pub stem: String,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub scenario: Scenario,
    pub config_hash: String,
    pub config: JobConfig,
    pub entries: Vec<Entry>,
    pub failures: Vec<Failure>,
    /// Stem of the aggregate-free control cell, if one was simulated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control: Option<String>,
}

impl Manifest {
    pub fn new(config: &JobConfig) -> Self {
        Self {
            command: config.command.clone(),
            scenario: config.scenario,
            config_hash: config.hash(),
            config: config.clone(),
            entries: Vec::new(),
            failures: Vec::new(),
            control: None,
        }
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST);
        let bytes = std::fs::read(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Loads a manifest and checks that it belongs to `scenario`.
    pub fn load_for(dir: &Path, scenario: Scenario) -> Result<Self, CliError> {
        let m = Self::load(dir)?;
        if m.scenario != scenario {
            return Err(CliError::ScenarioMismatch(format!(
                "{} holds {} samples, job runs {scenario}",
                dir.display(),
                m.scenario
            )));
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(&dir.join(MANIFEST), &bytes)?;
        Ok(())
    }

    pub fn entry(&self, stem: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.stem == stem)
    }
}
