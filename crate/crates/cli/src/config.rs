//! Job descriptions as stored next to every output directory.

use std::path::{Path, PathBuf};

use mesoshrink_core::fem::SimConfig;
use mesoshrink_core::microgen::GenConfig;
use mesoshrink_core::Scenario;
use mesoshrink_surrogate::{NormalizationSpec, PropertyNetConfig, TrainConfig, UNetConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Net {
    Unet,
    Cnn,
}

impl Net {
    pub fn stem(self) -> &'static str {
        match self {
            Net::Unet => "unet",
            Net::Cnn => "cnn",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Desk,
    Paper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSettings {
    /// Raster, clearance and attempt limits; `classes` is used only when
    /// `random_grading` is off.
    pub template: GenConfig,
    /// Draw a fresh grading per sample.
    pub random_grading: bool,
    /// Share of samples allowed to fail before the job reports failure.
    pub failure_quota: f64,
}

impl Default for GenSettings {
    fn default() -> Self {
        Self {
            template: GenConfig::default(),
            random_grading: true,
            failure_quota: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreSettings {
    /// Samples drawn from the source dataset; all of them if larger.
    pub subset: usize,
    /// Fixed smoothing threshold; drawn from `s_bar_range` when absent.
    pub s_bar: Option<f64>,
    pub s_bar_range: [f64; 2],
    /// Fixed cover thickness; drawn from `thicknesses` when absent.
    pub thickness: Option<usize>,
    pub thicknesses: Vec<usize>,
}

impl Default for ExploreSettings {
    fn default() -> Self {
        Self {
            subset: 2000,
            s_bar: None,
            s_bar_range: [0.1, 0.5],
            thickness: None,
            thicknesses: vec![5, 10, 15, 25, 30],
        }
    }
}

/// Everything a job needs to reproduce its outputs. The output directory
/// and the worker count are deliberately not part of it: neither may change
/// what is written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JobConfig {
    pub command: String,
    pub scenario: Scenario,
    pub seed: u64,
    /// Samples to generate, or a cap on the samples used (0 = all).
    pub count: usize,
    /// Microstructure dataset.
    pub data: Option<PathBuf>,
    /// Simulated (or predicted) trajectories belonging to `data`.
    pub sims: Option<PathBuf>,
    /// Predictions compared against `sims` by `eval`.
    pub pred: Option<PathBuf>,
    /// Second dataset for `explore stats` comparisons.
    pub compare_data: Option<PathBuf>,
    pub compare_sims: Option<PathBuf>,
    pub unet: Option<PathBuf>,
    pub cnn: Option<PathBuf>,
    pub net: Option<Net>,
    pub preset: Preset,
    /// Simulate an aggregate-free control cell next to the dataset.
    pub control: bool,
    pub rollout_batch: usize,
    pub gen: GenSettings,
    pub sim: SimConfig,
    pub train: TrainConfig,
    pub unet_net: Option<UNetConfig>,
    pub cnn_net: Option<PropertyNetConfig>,
    pub norm: NormalizationSpec,
    pub explore: ExploreSettings,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub workers: usize,
}

impl Default for JobConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            scenario: Scenario::Uniform,
            seed: 0,
            count: 0,
            data: None,
            sims: None,
            pred: None,
            compare_data: None,
            compare_sims: None,
            unet: None,
            cnn: None,
            net: None,
            preset: Preset::Desk,
            control: false,
            rollout_batch: 8,
            gen: GenSettings::default(),
            sim: SimConfig::default(),
            train: TrainConfig::default(),
            unet_net: None,
            cnn_net: None,
            norm: NormalizationSpec::default(),
            explore: ExploreSettings::default(),
            out: None,
            workers: 1,
        }
    }
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_slice(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    pub fn out_dir(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::Config("--out is required".into()))
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path, CliError> {
        path.as_deref()
            .ok_or_else(|| CliError::Config(format!("{} needs --{flag}", self.command)))
    }

    pub fn unet_config(&self, input: [usize; 2]) -> UNetConfig {
        self.unet_net.clone().unwrap_or_else(|| {
            let base = match self.preset {
                Preset::Desk => UNetConfig::desk(self.scenario),
                Preset::Paper => UNetConfig::paper(self.scenario),
            };
            UNetConfig { input, ..base }
        })
    }

    pub fn cnn_config(&self, input: [usize; 2]) -> PropertyNetConfig {
        self.cnn_net.clone().unwrap_or_else(|| {
            let base = match self.preset {
                Preset::Desk => PropertyNetConfig::desk(self.scenario),
                Preset::Paper => PropertyNetConfig::paper(self.scenario),
            };
            PropertyNetConfig { input, ..base }
        })
    }
}
