//! Training objectives.

use serde::{Deserialize, Serialize};

/// Weight on the observed-shrinkage term of the property loss.
pub const SHRINK_WEIGHT: f64 = 1000.0;

/// Mean squared pixel error.
pub fn loss_damage(pred: &[f32], reference: &[f32]) -> f64 {
    assert_eq!(pred.len(), reference.len());
    let sum: f64 = pred
        .iter()
        .zip(reference)
        .map(|(&p, &r)| (p as f64 - r as f64).powi(2))
        .sum();
    sum / pred.len() as f64
}

/// Loss and its gradient with respect to `pred`.
pub fn loss_damage_grad(pred: &[f32], reference: &[f32]) -> (f64, Vec<f32>) {
    let scale = 2.0 / pred.len() as f64;
    let grad = pred
        .iter()
        .zip(reference)
        .map(|(&p, &r)| (scale * (p as f64 - r as f64)) as f32)
        .collect();
    (loss_damage(pred, reference), grad)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropertyLoss {
    /// `c·|Δε̄| + |Δk̄|`.
    #[default]
    Absolute,
    /// `c·Δε̄² + Δk̄²`, for ablation.
    Squared,
}

/// Predicted and reference `(ε̄, k̄)`.
pub fn loss_properties(pred: (f64, f64), reference: (f64, f64), form: PropertyLoss) -> f64 {
    let (de, dk) = (pred.0 - reference.0, pred.1 - reference.1);
    match form {
        PropertyLoss::Absolute => SHRINK_WEIGHT * de.abs() + dk.abs(),
        PropertyLoss::Squared => SHRINK_WEIGHT * de * de + dk * dk,
    }
}

/// Gradient of [`loss_properties`] with respect to the prediction. The
/// absolute form uses the zero subgradient at an exact match.
pub fn loss_properties_grad(pred: (f64, f64), reference: (f64, f64), form: PropertyLoss) -> (f64, f64) {
    let (de, dk) = (pred.0 - reference.0, pred.1 - reference.1);
    match form {
        PropertyLoss::Absolute => (SHRINK_WEIGHT * sign(de), sign(dk)),
        PropertyLoss::Squared => (2.0 * SHRINK_WEIGHT * de, 2.0 * dk),
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}
