//! Normalised network inputs and training targets.

use mesoshrink_core::fem::{ShrinkageProfile, SimResult, N_SNAPSHOTS, SNAPSHOT_STRIDE};
use mesoshrink_core::microgen::{Augmentation, Microstructure};
use mesoshrink_core::{Grid, Scenario};
use mesoshrink_nn::Tensor;
use serde::{Deserialize, Serialize};

use crate::SurrogateError;

/// Normalised channels may exceed this bound only by round-off.
const RANGE_SLACK: f32 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationSpec {
    /// Imposed shrinkage mapped to one, `−ε_i,sh / shrink_scale`.
    pub shrink_scale: f64,
    /// Stiffness mapped to one, Pa.
    pub stiffness_scale: f64,
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        Self {
            shrink_scale: 1e-3,
            stiffness_scale: 30e9,
        }
    }
}

impl NormalizationSpec {
    pub fn shrink(&self, eps: f64) -> f64 {
        -eps / self.shrink_scale
    }

    pub fn stiffness(&self, k: f64) -> f64 {
        k / self.stiffness_scale
    }

    pub fn denormalize_stiffness(&self, k_bar: f64) -> f64 {
        k_bar * self.stiffness_scale
    }

    /// `obs_scale` is the sample's largest imposed shrinkage magnitude at the
    /// final snapshot.
    pub fn observed(&self, eps_o: f64, obs_scale: f64) -> f64 {
        -eps_o / obs_scale
    }

    pub fn denormalize_observed(&self, eps_bar: f64, obs_scale: f64) -> f64 {
        -eps_bar * obs_scale
    }
}

/// What the networks see of a sample, for snapshots `t = 0..=10`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inputs {
    pub scenario: Scenario,
    pub rho: Grid<f32>,
    /// Normalised imposed shrinkage per snapshot.
    pub shrink: Vec<Grid<f32>>,
    /// Largest imposed shrinkage magnitude at the last snapshot.
    pub obs_scale: f64,
}

impl Inputs {
    pub fn new(micro: &Microstructure, profile: &ShrinkageProfile, norm: &NormalizationSpec) -> Self {
        let (h, w) = (micro.phase.height(), micro.phase.width());
        let fields: Vec<Grid<f64>> = (0..N_SNAPSHOTS)
            .map(|t| profile.field((t * SNAPSHOT_STRIDE) as f64, h, w, micro.phase.pitch))
            .collect();
        let obs_scale = fields[N_SNAPSHOTS - 1]
            .data()
            .iter()
            .fold(0.0f64, |m, e| m.max(e.abs()));
        Self {
            scenario: micro.scenario,
            rho: micro.phase.rho(),
            shrink: fields.iter().map(|f| f.map(|&e| norm.shrink(e) as f32)).collect(),
            obs_scale,
        }
    }

    pub fn height(&self) -> usize {
        self.rho.height()
    }

    pub fn width(&self) -> usize {
        self.rho.width()
    }

    pub fn steps(&self) -> usize {
        self.shrink.len() - 1
    }

    pub fn augmented(&self, op: Augmentation) -> Self {
        Self {
            scenario: self.scenario,
            rho: op.apply_grid(&self.rho),
            shrink: self.shrink.iter().map(|g| op.apply_grid(g)).collect(),
            obs_scale: self.obs_scale,
        }
    }
}

/// Simulated reference trajectory in network units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Targets {
    pub omega: Vec<Grid<f32>>,
    pub eps_bar: Vec<f32>,
    pub k_bar: Vec<f32>,
}

impl Targets {
    pub fn augmented(&self, op: Augmentation) -> Self {
        Self {
            omega: self.omega.iter().map(|g| op.apply_grid(g)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub inputs: Inputs,
    pub targets: Targets,
}

impl Sample {
    pub fn new(
        micro: &Microstructure,
        profile: &ShrinkageProfile,
        result: &SimResult,
        norm: &NormalizationSpec,
    ) -> Result<Self, SurrogateError> {
        let inputs = Inputs::new(micro, profile, norm);
        if result.snapshots.len() != inputs.shrink.len() {
            return Err(SurrogateError::Data(format!(
                "{} snapshots, expected {}",
                result.snapshots.len(),
                inputs.shrink.len()
            )));
        }
        if !(inputs.obs_scale > 0.0) {
            return Err(SurrogateError::Data("no imposed shrinkage at the last snapshot".into()));
        }
        let s = &result.snapshots;
        let targets = Targets {
            omega: s.iter().map(|s| s.omega.map(|&w| w as f32)).collect(),
            eps_bar: s
                .iter()
                .map(|s| norm.observed(s.eps_observed, inputs.obs_scale) as f32)
                .collect(),
            k_bar: s.iter().map(|s| norm.stiffness(s.k) as f32).collect(),
        };
        Ok(Self { inputs, targets })
    }

    pub fn augmented(&self, op: Augmentation) -> Self {
        Self {
            inputs: self.inputs.augmented(op),
            targets: self.targets.augmented(op),
        }
    }
}

fn check_range(name: &str, g: &Grid<f32>) -> Result<(), SurrogateError> {
    match g.data().iter().find(|v| !(**v >= 0.0 && **v <= 1.0 + RANGE_SLACK)) {
        Some(&v) => Err(SurrogateError::RangeViolation(format!("{name} channel holds {v}"))),
        None => Ok(()),
    }
}

/// Three-channel image for snapshot `t`: geometry, normalised imposed
/// shrinkage at `t` and the damage field supplied by the caller (the
/// previous step for the U-Net, the current one for the CNN).
pub fn assemble_input(inputs: &Inputs, t: usize, omega: &Grid<f32>) -> Result<[Grid<f32>; 3], SurrogateError> {
    if t > inputs.steps() {
        return Err(SurrogateError::Data(format!("snapshot {t} beyond {}", inputs.steps())));
    }
    let shrink = &inputs.shrink[t];
    if (omega.height(), omega.width()) != (inputs.height(), inputs.width()) {
        return Err(SurrogateError::Data("damage field does not match the raster".into()));
    }
    check_range("geometry", &inputs.rho)?;
    check_range("shrinkage", shrink)?;
    check_range("damage", omega)?;
    Ok([inputs.rho.clone(), shrink.clone(), omega.clone()])
}

/// Packs assembled images into an `(n, 3, h, w)` batch.
pub fn stack_images(images: &[[Grid<f32>; 3]]) -> Tensor<f32> {
    let (h, w) = (images[0][0].height(), images[0][0].width());
    let mut data = Vec::with_capacity(images.len() * 3 * h * w);
    for img in images {
        for ch in img {
            data.extend_from_slice(ch.data());
        }
    }
    Tensor::from_vec([images.len(), 3, h, w], data).unwrap()
}

/// Splits an `(n, 1, h, w)` output into grids.
pub fn unstack_fields(y: &Tensor<f32>) -> Vec<Grid<f32>> {
    let (h, w) = (y.height(), y.width());
    (0..y.batch())
        .map(|n| Grid::from_vec(h, w, y.plane(n, 0).to_vec()))
        .collect()
}
