//! Auto-regressive inference: the damage predicted at one snapshot is fed
//! back as input for the next.

use mesoshrink_core::fem::{surface_eigenstrain, SNAPSHOT_STRIDE};
use mesoshrink_core::io::ScalarRow;
use mesoshrink_core::Grid;
use mesoshrink_nn::ModelGraph;
use serde::{Deserialize, Serialize};

use crate::data::{assemble_input, stack_images, unstack_fields, Inputs, NormalizationSpec};
use crate::SurrogateError;

/// Pixel-wise maximum; damage never heals.
pub fn enforce_monotone(prev: &Grid<f32>, new: &Grid<f32>) -> Grid<f32> {
    let data = prev.data().iter().zip(new.data()).map(|(a, b)| a.max(*b)).collect();
    Grid::from_vec(prev.height(), prev.width(), data)
}

/// One U-Net pass per sample: damage at `t` from the damage at `t − 1`,
/// before the monotonicity clamp.
pub fn unet_step(
    unet: &ModelGraph<f32>,
    inputs: &[&Inputs],
    t: usize,
    prev: &[Grid<f32>],
) -> Result<Vec<Grid<f32>>, SurrogateError> {
    let images = inputs
        .iter()
        .zip(prev)
        .map(|(i, w)| assemble_input(i, t, w))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(unstack_fields(&unet.forward(&stack_images(&images))?))
}

/// Normalised `(ε̄, k̄)` per sample from the damage at snapshot `t`.
pub fn predict_properties(
    cnn: &ModelGraph<f32>,
    inputs: &[&Inputs],
    t: usize,
    omega: &[Grid<f32>],
) -> Result<Vec<(f32, f32)>, SurrogateError> {
    let images = inputs
        .iter()
        .zip(omega)
        .map(|(i, w)| assemble_input(i, t, w))
        .collect::<Result<Vec<_>, _>>()?;
    let y = cnn.forward(&stack_images(&images))?;
    Ok((0..y.batch()).map(|n| (y.item(n)[0], y.item(n)[1])).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RolloutResult {
    /// Damage for snapshots `0..=steps`; the first is the undamaged start.
    pub omega: Vec<Grid<f32>>,
    /// Normalised `(ε̄, k̄)` per snapshot, when a property network was given.
    pub properties: Option<Vec<(f32, f32)>>,
}

impl RolloutResult {
    /// Rows for the scalars CSV, in physical units. Without a property
    /// network the shrinkage and stiffness columns are NaN.
    pub fn scalar_rows(&self, inputs: &Inputs, norm: &NormalizationSpec) -> Vec<ScalarRow> {
        self.omega
            .iter()
            .enumerate()
            .map(|(t, w)| {
                let (eps, k) = match &self.properties {
                    Some(p) => (
                        norm.denormalize_observed(p[t].0 as f64, inputs.obs_scale),
                        norm.denormalize_stiffness(p[t].1 as f64),
                    ),
                    None => (f64::NAN, f64::NAN),
                };
                ScalarRow {
                    t,
                    eps_imposed_surface: surface_eigenstrain((t * SNAPSHOT_STRIDE) as f64),
                    eps_observed: eps,
                    k_pa: k,
                    omega_total: w.data().iter().map(|&v| v as f64).sum::<f64>() / w.len() as f64,
                }
            })
            .collect()
    }

    pub fn omega_f64(&self) -> Vec<Grid<f64>> {
        self.omega.iter().map(|g| g.map(|&v| v as f64)).collect()
    }
}

/// Rolls out every sample of `inputs` together, batch by batch.
pub fn rollout_batch(
    unet: &ModelGraph<f32>,
    cnn: Option<&ModelGraph<f32>>,
    inputs: &[&Inputs],
) -> Result<Vec<RolloutResult>, SurrogateError> {
    let Some(first) = inputs.first() else {
        return Ok(Vec::new());
    };
    let steps = first.steps();
    if inputs.iter().any(|i| i.steps() != steps) {
        return Err(SurrogateError::Data(
            "samples disagree on the number of snapshots".into(),
        ));
    }
    let zero: Vec<Grid<f32>> = inputs
        .iter()
        .map(|i| Grid::filled(i.height(), i.width(), 0.0))
        .collect();
    let mut omega = vec![zero];
    for t in 1..=steps {
        let prev = &omega[t - 1];
        let raw = unet_step(unet, inputs, t, prev)?;
        omega.push(prev.iter().zip(&raw).map(|(p, n)| enforce_monotone(p, n)).collect());
    }
    let properties = match cnn {
        Some(cnn) => Some(
            (0..=steps)
                .map(|t| predict_properties(cnn, inputs, t, &omega[t]))
                .collect::<Result<Vec<_>, _>>()?,
        ),
        None => None,
    };
    Ok((0..inputs.len())
        .map(|n| RolloutResult {
            omega: omega.iter().map(|step| step[n].clone()).collect(),
            properties: properties.as_ref().map(|p| p.iter().map(|step| step[n]).collect()),
        })
        .collect())
}

pub fn rollout(
    unet: &ModelGraph<f32>,
    cnn: Option<&ModelGraph<f32>>,
    inputs: &Inputs,
) -> Result<RolloutResult, SurrogateError> {
    Ok(rollout_batch(unet, cnn, &[inputs])?.pop().unwrap())
}
